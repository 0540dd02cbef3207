#pragma once

#include "cfdecomp/basis.hpp"
#include "cfdecomp/control_function.hpp"
#include "cfdecomp/model.hpp"
#include "cfdecomp/structural.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cfdecomp {

enum class ControlFunctionMode { Interval, Point };

/// Everything needed to fit one year's components.
struct FitOptions {
  BasisSpec basis;
  std::size_t hours_grid_points = 400;
  StructuralOptions structural;
  ControlFunctionMode control_function = ControlFunctionMode::Interval;
  std::uint64_t seed = 0;
};

/// Fitted components of one year, all estimated on the same sample.
struct YearModel {
  int year = 0;
  std::shared_ptr<const YearSample> sample;
  std::vector<double> weights;
  DrFit hours;
  ControlFunctionSet cf;
  LdsfFit ldsf;
  LasfFit lasf;
  /// Sorted distinct positive hours, the Riemann-sum support.
  std::vector<double> hours_values;
};

using ModelSet = std::map<int, YearModel>;

/// Steps 1, 2a and 2b for one year. `weights` overrides the observation
/// weights (bootstrap); empty means the sample's own weights.
YearModel fit_year_model(std::shared_ptr<const YearSample> sample, const FitOptions& options,
                         std::span<const double> weights = {});

/// Fits every sample in turn; threshold fits inside each year run in parallel.
ModelSet fit_models(const std::vector<std::shared_ptr<const YearSample>>& samples,
                    const FitOptions& options,
                    const std::vector<std::vector<double>>& weights = {});

struct CounterfactualCdf {
  CounterfactualConfig config;
  std::vector<double> y_grid;
  std::vector<double> values;
};

/// Default earnings grid: 0 plus `count` order statistics of pooled positive
/// earnings across all modeled years.
std::vector<double> default_earnings_grid(const ModelSet& models, std::size_t count = 500);

/// G<q,r,s,p>(y) = 1 + mean_s{ 1(F^q(0|P_i) < V_i) [G^p(y / Q^r(V_i|P_i), X_i, V_i) - 1] }
/// with year-s weights. Throws Error(InvalidInput) for unknown years, a
/// non-increasing grid or designs of different widths.
CounterfactualCdf counterfactual_cdf(const ModelSet& models, const CounterfactualConfig& cfg,
                                     std::span<const double> y_grid);

/// Several configurations at once; profiles are shared between
/// configurations with the same (p, s).
std::vector<CounterfactualCdf> counterfactual_cdfs(const ModelSet& models,
                                                   std::span<const CounterfactualConfig> configs,
                                                   std::span<const double> y_grid);

/// Left inverse on the grid: the smallest y with G(y) >= tau. Throws
/// Error(GridTooShort) when tau exceeds the last value.
double counterfactual_quantile(const CounterfactualCdf& cdf, double tau);

/// mean_s{ 1(F^q(0|P_i) < V_i) mu^p(X_i, V_i) Q^r(V_i|P_i) }.
double counterfactual_mean(const ModelSet& models, const CounterfactualConfig& cfg);

/// Per-row ingredients of a configuration; exposed for diagnostics and tests.
struct CounterfactualRows {
  std::vector<std::uint8_t> participates;
  std::vector<double> hours;
};
CounterfactualRows counterfactual_rows(const ModelSet& models, const CounterfactualConfig& cfg);

void write_cdf(std::ostream& out, const CounterfactualCdf& cdf);

// ---------------------------------------------------------------------------
// Support diagnostics

struct SupportOptions {
  /// Covariates with more distinct pooled values than this are binned into
  /// pooled deciles.
  std::size_t max_levels = 10;
  std::size_t v_bins = 10;
  bool strict = false;
};

struct SupportViolation {
  /// "XV" for (XV*q ∩ XV*s) ⊄ XV*p, "XZ" for XZs ⊄ XZq ∪ XZr.
  std::string condition;
  std::string cell;
  /// Weighted share of year-s observations in the cell.
  double mass = 0.0;
};

struct SupportReport {
  bool pass = true;
  std::vector<SupportViolation> violations;
  double violating_mass(std::string_view condition) const;
};

/// Empirical cell-support comparison for a configuration. Warns, never
/// throws, unless options.strict (then Error(SupportViolation)).
SupportReport check_support(const ModelSet& models, const CounterfactualConfig& cfg,
                            const SupportOptions& options = {});

}  // namespace cfdecomp
