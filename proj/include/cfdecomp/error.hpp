#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfdecomp {

enum class ErrorKind {
  InvalidInput,
  MissingColumn,
  RankDeficient,
  UndefinedFunctional,
  GridTooShort,
  SupportViolation,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Hard error raised by every module. The kind is what the CLI reports in its
/// machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cfdecomp
