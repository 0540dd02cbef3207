#pragma once

#include "cfdecomp/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cfdecomp {

enum class Source { X, Z, V };

/// A single factor of a basis term: a covariate raised to a power, or the
/// indicator that a covariate equals a given level.
struct Factor {
  Source source = Source::X;
  int index = 0;
  int power = 1;
  std::optional<double> level;

  double eval(std::span<const double> x, std::span<const double> z, double v) const;
  friend bool operator==(const Factor&, const Factor&) = default;
};

/// Product of factors. The empty product is the constant term.
struct Term {
  std::vector<Factor> factors;

  bool is_constant() const noexcept { return factors.empty(); }
  bool uses_v() const noexcept;
  double eval(std::span<const double> x, std::span<const double> z, double v) const;
  /// Textual form accepted by parse_term.
  std::string label() const;
  friend bool operator==(const Term&, const Term&) = default;
};

/// Parses "1", "x0", "z1^2", "v*x0", "[x0=2]*z0". Named covariates are
/// resolved against `x_names` / `z_names` when given.
Term parse_term(std::string_view text, std::span<const std::string> x_names = {},
                std::span<const std::string> z_names = {});

/// Term lists for the hours design p(x, z) and the wage design m(x, v).
struct BasisSpec {
  std::vector<Term> p_terms;
  std::vector<Term> m_terms;

  /// Constant, raw x, raw z.
  static BasisSpec linear(int nx, int nz);

  /// Default wage design from the hours design: its x-only terms, then v, v^2
  /// and v times each x term.
  static std::vector<Term> default_m_terms(const std::vector<Term>& p_terms);

  /// Fully saturated cell indicators for discrete covariates. `x_levels[k]`
  /// lists the levels of x_k (same for z). The m design saturates x only and
  /// adds v, v^2 and v times every x cell indicator.
  static BasisSpec saturated(const std::vector<std::vector<double>>& x_levels,
                             const std::vector<std::vector<double>>& z_levels);

  /// Throws Error(Config) when the spec breaks an invariant: p terms use v,
  /// m terms use z, m terms miss the constant / v / v^2, or an index exceeds
  /// the covariate dimensions.
  void validate(int nx, int nz) const;
};

/// Fixed column order: constant, raw x, raw z, raw v, powers, interactions.
/// Stable within each category.
std::vector<Term> canonical_order(std::vector<Term> terms);

struct BasisResult {
  Eigen::MatrixXd matrix;
  std::vector<std::string> warnings;
};

/// p(x_i, z_i) for every observation, columns in canonical order. Emits a
/// warning for every column that exactly duplicates an earlier one.
BasisResult build_basis(const std::vector<Observation>& observations,
                        const std::vector<Term>& p_terms);

/// Writes m(x, v) into `out` (length = terms.size()).
void eval_terms(const std::vector<Term>& terms, std::span<const double> x,
                std::span<const double> z, double v, std::span<double> out);

/// m(x_i, v_i) for every observation.
Eigen::MatrixXd build_wage_design(const std::vector<Observation>& observations,
                                  std::span<const double> v,
                                  const std::vector<Term>& m_terms);

/// Builds a YearSample: validates observations, builds basis_p and sets the
/// trimming cap (default quantile rule when `cap` is empty).
YearSample make_year_sample(int year, std::vector<Observation> observations,
                            const BasisSpec& spec, std::optional<double> cap = std::nullopt,
                            std::vector<std::string>* warnings = nullptr);

}  // namespace cfdecomp
