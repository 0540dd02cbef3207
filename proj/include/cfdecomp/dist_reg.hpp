#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cfdecomp {

enum class OutcomeKind { Hours, Wage };

/// Only the logit link is estimated; probit is accepted by the configuration
/// parser and rejected by fit_dr.
enum class Link { Logit, Probit };

enum class ColumnStatus : std::uint8_t {
  Interior,        // Newton converged
  DegenerateZero,  // no fitted outcome at or below the threshold
  DegenerateOne,   // every fitted outcome at or below the threshold
  Separated,       // coefficient norm diverged; predictions saturate
  NotConverged,    // iteration cap reached
};

std::string_view to_string(ColumnStatus status);

struct DrOptions {
  Link link = Link::Logit;
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  int max_halvings = 30;
  double divergence_norm = 30.0;
  /// Names used in rank-deficiency errors.
  std::vector<std::string> column_labels;
};

/// A fitted logistic distribution regression: one coefficient vector per
/// threshold. Column j models P(outcome <= thresholds[j] | row).
struct DrFit {
  std::vector<double> thresholds;
  Eigen::MatrixXd coefficients;  // d x K
  OutcomeKind outcome_kind = OutcomeKind::Hours;
  bool rearranged = false;
  std::vector<ColumnStatus> status;
  std::vector<int> iterations;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(coefficients.rows()); }
  std::size_t size() const noexcept { return thresholds.size(); }

  /// Predicted probabilities at every threshold for one design row. Sorted
  /// into a nondecreasing sequence when the fit is rearranged.
  void profile(const Eigen::Ref<const Eigen::VectorXd>& row, std::span<double> out) const;
  std::vector<double> profile(const Eigen::Ref<const Eigen::VectorXd>& row) const;

  /// Number of thresholds that did not converge (NotConverged status).
  std::size_t nonconverged_count() const;
};

/// Threshold grid over an outcome: every distinct value when there are at
/// most `max_points`, else `max_points` order statistics at levels k/max_points
/// (the sample maximum included). `include_zero` prepends 0.
std::vector<double> threshold_grid(std::vector<double> values, std::size_t max_points,
                                   bool include_zero);

/// Hours grid: 0 plus positive hours, capped at 400 points.
std::vector<double> default_hours_grid(std::span<const double> hours,
                                       std::size_t max_points = 400);

/// Fits one logistic regression of 1{outcome <= h} on `design` for every h in
/// `grid`, maximizing the weighted Bernoulli log-likelihood over rows with
/// trim[i] != 0 (all rows when trim is empty) by damped Newton steps.
///
/// Throws Error(RankDeficient) naming the collinear columns when the design
/// restricted to the fitting rows is not of full column rank. Thresholds that
/// fail to converge are flagged in `status` and the fit continues.
DrFit fit_dr(const Eigen::MatrixXd& design, std::span<const double> outcome,
             std::span<const double> weights, std::vector<double> grid,
             std::span<const std::uint8_t> trim, OutcomeKind kind,
             const DrOptions& options = {});

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Profiles of many rows at once (one output row per design row), using
/// vectorized logistic evaluation. Same semantics as DrFit::profile.
void predict_profiles(const DrFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& rows, RowMatrix& out);

/// Lambda(row' pi(h-)) where h- is the largest threshold <= value; 0 below the
/// grid and 1 above it.
double predict_cdf(const DrFit& fit, const Eigen::Ref<const Eigen::VectorXd>& row, double value);

/// Marks the fit rearranged: predictions are sorted across thresholds at
/// prediction time. Returns the number of monotonicity violations found on
/// `reference_rows` before rearrangement via `violations` when non-null.
DrFit rearrange(DrFit fit, const Eigen::MatrixXd& reference_rows,
                std::size_t* violations = nullptr);

/// Adjacent decreasing pairs across all rows' prediction profiles.
std::size_t count_monotonicity_violations(const DrFit& fit, const Eigen::MatrixXd& rows);

/// Riemann-sum generalized inverse
///   Q(v | row) = sum_j (h_{j+1} - h_j) 1{F(h_j | row) <= v},  h_0 = 0,
/// over the sorted distinct positive `hours_values`. Saturates at the largest
/// value. Throws Error(InvalidInput) unless 0 < v < 1.
double conditional_quantile(const DrFit& fit, const Eigen::Ref<const Eigen::VectorXd>& row,
                            double v, std::span<const double> hours_values);

/// Same quantity from a precomputed, nondecreasing profile in O(log K).
double conditional_quantile_sorted(std::span<const double> thresholds,
                                   std::span<const double> profile, double v,
                                   std::span<const double> hours_values);

/// Sorted distinct positive values.
std::vector<double> sorted_positive_values(std::span<const double> values);

/// Deduplicated prediction profiles for a set of design rows.
class ProfileTable {
 public:
  ProfileTable() = default;
  ProfileTable(const DrFit& fit, const Eigen::MatrixXd& rows);

  std::span<const double> operator[](std::size_t row) const {
    return {data_.data() + slot_[row] * width_, width_};
  }
  std::size_t unique_rows() const noexcept { return width_ == 0 ? 0 : data_.size() / width_; }

 private:
  std::size_t width_ = 0;
  std::vector<double> data_;
  std::vector<std::size_t> slot_;
};

/// Flat CSV dump: header line, then one line per threshold with
/// threshold, status, iterations, coefficients.
void write_fit(std::ostream& out, const DrFit& fit);
DrFit read_fit(std::istream& in);

}  // namespace cfdecomp
