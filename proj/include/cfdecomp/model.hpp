#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace cfdecomp {

/// One person-year record.
///
/// `wage` is present iff `hours > 0` and always equals earnings / hours.
/// Weekly hours and weeks worked are optional; when both are present their
/// product must reproduce annual hours.
struct Observation {
  double earnings = 0.0;
  double hours = 0.0;
  std::optional<double> wage;
  std::optional<double> weekly_hours;
  std::optional<double> weeks;
  std::vector<double> x;
  std::vector<double> z;
  double weight = 1.0;

  bool works() const noexcept { return hours > 0.0; }
};

/// Relative tolerance used by the observation invariants.
inline constexpr double kIdentityTolerance = 1e-9;

/// Builds an observation from raw fields, deriving the wage. Throws
/// Error(InvalidInput) when an invariant does not hold.
Observation make_observation(double earnings, double hours, std::vector<double> x,
                             std::vector<double> z, double weight = 1.0,
                             std::optional<double> weekly_hours = std::nullopt,
                             std::optional<double> weeks = std::nullopt);

/// Throws Error(InvalidInput) describing the first violated invariant.
void validate(const Observation& obs);

/// All observations of one (year, group) cell plus the hours design matrix.
struct YearSample {
  int year = 0;
  std::vector<Observation> observations;
  /// Rows are p(x_i, z_i); first column is the constant.
  Eigen::MatrixXd basis_p;
  /// Trimming cap h-bar for the wage equations.
  double trimming_cap = 0.0;

  std::size_t size() const noexcept { return observations.size(); }
  std::vector<double> hours() const;
  std::vector<double> weights() const;
};

/// Default trimming cap: the 0.99 empirical quantile of positive hours.
double default_trimming_cap(const std::vector<Observation>& observations,
                            double level = 0.99);

/// Year roles: participation rule (q), hours function (r), covariate and
/// control distribution (s), wage structure (p).
struct CounterfactualConfig {
  int q = 0;
  int r = 0;
  int s = 0;
  int p = 0;

  static CounterfactualConfig observed(int year) { return {year, year, year, year}; }
  std::string label() const;
  friend bool operator==(const CounterfactualConfig&, const CounterfactualConfig&) = default;
};

}  // namespace cfdecomp
