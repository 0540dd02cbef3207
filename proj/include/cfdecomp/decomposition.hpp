#pragma once

#include "cfdecomp/counterfactual.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cfdecomp {

/// Distributional statistic a decomposition is computed for.
struct Functional {
  enum class Kind { Quantile, Mean, Ratio };
  Kind kind = Kind::Quantile;
  double tau = 0.5;
  /// Denominator quantile of a ratio.
  double tau_lo = 0.5;

  static Functional quantile(double tau) { return {Kind::Quantile, tau, 0.0}; }
  static Functional mean() { return {Kind::Mean, 0.0, 0.0}; }
  static Functional ratio(double hi, double lo) { return {Kind::Ratio, hi, lo}; }

  /// "q0.5", "mean", "ratio0.9_0.5". parse() accepts the same forms and
  /// "ratio0.9/0.5".
  std::string label() const;
  static Functional parse(std::string_view text);
};

/// The five configurations of the sequential decomposition between base year
/// b and year t: <t,t,t,t>, <t,t,t,b>, <t,t,b,b>, <t,b,b,b>, <b,b,b,b>.
std::array<CounterfactualConfig, 5> decomposition_chain(int base, int t);

/// Terms of one year's decomposition. Relative terms are divided by the base
/// functional value; structural + composition + intensive + extensive equals
/// total up to rounding.
struct DecompositionRecord {
  int year = 0;
  bool defined = true;
  std::string reason;  // why the record is undefined
  double total = 0.0;
  double structural = 0.0;
  double composition = 0.0;
  double intensive = 0.0;
  double extensive = 0.0;
  /// Functional values along the chain, <t,t,t,t> first.
  std::array<double, 5> chain_values{};
  double normalization = 0.0;

  double absolute(double relative) const { return relative * normalization; }
  std::array<double, 5> terms() const { return {total, structural, composition, intensive, extensive}; }
};

inline constexpr std::array<const char*, 5> kTermNames = {"total", "structural", "composition",
                                                          "intensive", "extensive"};

/// Evaluates a functional on one configuration. `y_grid` is only used for
/// quantile-based functionals.
double evaluate_functional(const ModelSet& models, const CounterfactualConfig& cfg,
                           const Functional& functional, std::span<const double> y_grid);

/// Four-term decomposition of year t relative to base year b. Throws
/// Error(UndefinedFunctional) when the base value is zero ("functional
/// undefined at base") or a ratio has a zero denominator.
DecompositionRecord decompose_functional(const ModelSet& models, int base, int t,
                                         const Functional& functional,
                                         std::span<const double> y_grid);

/// Same for the quantile ratio Q(tau_hi) / Q(tau_lo).
DecompositionRecord decompose_ratio(const ModelSet& models, int base, int t, double tau_hi,
                                    double tau_lo, std::span<const double> y_grid);

struct DecompositionSeries {
  int base_year = 0;
  Functional functional;
  double normalization = 0.0;
  std::vector<DecompositionRecord> records;
};

/// Decomposes every modeled year against `base`. Undefined functionals are
/// kept as records with defined = false rather than zeros.
DecompositionSeries decompose_series(const ModelSet& models, int base,
                                     const Functional& functional,
                                     std::span<const double> y_grid);

/// Several functionals at once. Each configuration's CDF is computed a single
/// time and shared across functionals; configurations run in parallel.
std::vector<DecompositionSeries> decompose_series(const ModelSet& models, int base,
                                                  const std::vector<Functional>& functionals,
                                                  std::span<const double> y_grid);

// ---------------------------------------------------------------------------
// Hours

/// Two-term decomposition of an annual-hours functional.
struct HoursDecomposition {
  int year = 0;
  bool defined = true;
  std::string reason;
  double total = 0.0;
  double structure = 0.0;
  double composition = 0.0;
  double normalization = 0.0;
};

/// Counterfactual hours CDF F<c,d>: year-d rows, year-c conditional CDF.
/// Evaluated on the year-c threshold grid.
struct HoursCdf {
  int conditional_year = 0;
  int covariate_year = 0;
  std::vector<double> h_grid;
  std::vector<double> values;
};

HoursCdf counterfactual_hours_cdf(const ModelSet& models, int conditional_year,
                                  int covariate_year);
double hours_functional(const ModelSet& models, int conditional_year, int covariate_year,
                        const Functional& functional);

/// structure = F<t,t> - F<b,t>, composition = F<b,t> - F<b,b>, relative to
/// the base value.
HoursDecomposition decompose_hours(const ModelSet& models, int base, int t,
                                   const Functional& functional);

// ---------------------------------------------------------------------------
// Descriptive diagnostics

double employment_rate(const YearSample& sample);

struct LogHoursVariance {
  double var_log_hours = 0.0;
  double var_log_weekly_hours = 0.0;
  double var_log_weeks = 0.0;
  double covariance = 0.0;
};

/// Weighted variance decomposition of log annual hours among workers:
/// var ln H = var ln HW + var ln Wk + 2 cov. ln H is taken as ln HW + ln Wk,
/// so the identity holds to rounding. Throws Error(MissingColumn) when a
/// worker lacks weekly hours or weeks.
LogHoursVariance variance_log_hours_decomposition(const YearSample& sample);

void write_series(std::ostream& out, const DecompositionSeries& series);

}  // namespace cfdecomp
