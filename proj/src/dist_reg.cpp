#include "cfdecomp/dist_reg.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/stats.hpp"
#include "cfdecomp/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace cfdecomp {

std::string_view to_string(ColumnStatus status) {
  switch (status) {
    case ColumnStatus::Interior: return "interior";
    case ColumnStatus::DegenerateZero: return "degenerate0";
    case ColumnStatus::DegenerateOne: return "degenerate1";
    case ColumnStatus::Separated: return "separated";
    case ColumnStatus::NotConverged: return "not_converged";
  }
  return "unknown";
}

namespace {

constexpr std::size_t kBlock = 16;

/// Insertion sort: linear on the nearly sorted profiles produced by
/// threshold-wise fits.
void sort_nearly_sorted(double* first, double* last) {
  for (double* i = first + 1; i < last; ++i) {
    const double v = *i;
    double* j = i;
    for (; j > first && j[-1] > v; --j) *j = j[-1];
    *j = v;
  }
}

std::string row_key(const Eigen::Ref<const Eigen::VectorXd>& row) {
  std::string key(static_cast<std::size_t>(row.size()) * sizeof(double), '\0');
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    const double v = row(j) == 0.0 ? 0.0 : row(j);  // fold -0.0
    std::memcpy(key.data() + static_cast<std::size_t>(j) * sizeof(double), &v, sizeof(double));
  }
  return key;
}

/// Fitting rows grouped by identical design vectors. The likelihood only
/// depends on each group's total weight and the weight at or below the
/// threshold, so a saturated design collapses to one row per cell.
struct Groups {
  Eigen::MatrixXd rows;                      // U x d
  Eigen::VectorXd total;                     // W_u
  std::vector<std::vector<double>> outcome;  // sorted outcomes per group
  std::vector<std::vector<double>> cum;      // cumulative weights
  std::size_t fitted = 0;                    // number of fitting observations

  void successes(double h, Eigen::VectorXd& s, std::size_t& count) const {
    count = 0;
    for (std::size_t u = 0; u < outcome.size(); ++u) {
      const auto& o = outcome[u];
      const auto k = static_cast<std::size_t>(std::upper_bound(o.begin(), o.end(), h) - o.begin());
      s(static_cast<Eigen::Index>(u)) = k == 0 ? 0.0 : cum[u][k - 1];
      count += k;
    }
  }
};

Groups make_groups(const Eigen::MatrixXd& design, std::span<const double> outcome,
                   std::span<const double> weights, std::span<const std::uint8_t> trim) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::size_t> first_row;
  std::vector<std::vector<std::pair<double, double>>> members;
  Groups g;
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    if (!trim.empty() && !trim[i]) continue;
    if (!(weights[i] > 0.0)) continue;
    const auto key = row_key(design.row(static_cast<Eigen::Index>(i)).transpose());
    auto [it, inserted] = index.try_emplace(key, first_row.size());
    if (inserted) {
      first_row.push_back(i);
      members.emplace_back();
    }
    members[it->second].emplace_back(outcome[i], weights[i]);
    ++g.fitted;
  }
  const auto u_count = static_cast<Eigen::Index>(first_row.size());
  g.rows.resize(u_count, design.cols());
  g.total.resize(u_count);
  g.outcome.resize(first_row.size());
  g.cum.resize(first_row.size());
  for (std::size_t u = 0; u < first_row.size(); ++u) {
    g.rows.row(static_cast<Eigen::Index>(u)) = design.row(static_cast<Eigen::Index>(first_row[u]));
    auto& m = members[u];
    std::sort(m.begin(), m.end());
    double acc = 0.0;
    g.outcome[u].reserve(m.size());
    g.cum[u].reserve(m.size());
    for (const auto& [y, w] : m) {
      g.outcome[u].push_back(y);
      g.cum[u].push_back(acc += w);
    }
    g.total(static_cast<Eigen::Index>(u)) = acc;
  }
  return g;
}

void check_rank(const Groups& g, const DrOptions& options) {
  const auto d = g.rows.cols();
  // Column scaling keeps the rank decision independent of covariate units.
  Eigen::MatrixXd scaled = g.rows;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double norm = scaled.col(j).norm();
    if (norm > 0.0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank >= d) return;
  std::ostringstream os;
  os << "design is rank deficient (rank " << rank << " of " << d << "); collinear columns:";
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < d; ++k) {
    const auto j = static_cast<std::size_t>(perm(k));
    os << ' ' << (j < options.column_labels.size() ? options.column_labels[j] : "col" + std::to_string(j));
  }
  throw Error(ErrorKind::RankDeficient, os.str());
}

/// Fitted probabilities at linear index eta.
void logistic(const Eigen::VectorXd& eta, Eigen::ArrayXd& p) {
  const Eigen::ArrayXd e = (-eta.array().abs()).exp();
  p = (eta.array() >= 0.0).select(1.0, e) / (1.0 + e);
}

/// sum_u s_u eta_u - w_u log(1 + e^eta_u), with (1 + e).log() in place of
/// log1p so that it vectorizes.
double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& s, const Eigen::VectorXd& w) {
  const Eigen::ArrayXd softplus = eta.array().max(0.0) + (1.0 + (-eta.array().abs()).exp()).log();
  return (s.array() * eta.array() - w.array() * softplus).sum();
}

/// Linear index and probabilities at the current coefficients. They do not
/// depend on the threshold, so a warm start carries them over.
struct NewtonState {
  Eigen::VectorXd eta;
  Eigen::ArrayXd p;
  bool valid = false;
};

struct NewtonOutcome {
  ColumnStatus status;
  int iterations;
};

/// Distinct row-wise products x_uj x_uk (j <= k). With these the Hessian of
/// every threshold is one matrix-vector product instead of a weighted X'X.
/// Dummy-coded designs repeat many products (x1 x1 = x1) or zero them
/// (x1 x2 = 0), so equal columns are stored once and zero columns dropped.
struct OuterProducts {
  Eigen::MatrixXd columns;
  std::vector<Eigen::Index> slot;  // per (j <= k) pair; -1 for a zero column
  bool empty() const noexcept { return slot.empty(); }
};

OuterProducts outer_products(const Eigen::MatrixXd& x) {
  const auto d = x.cols();
  const Eigen::Index cells = d * (d + 1) / 2;
  OuterProducts out;
  // Beyond ~128 MB fall back to forming X'CX directly.
  if (static_cast<double>(x.rows()) * static_cast<double>(cells) > 1.6e7) return out;
  std::vector<Eigen::VectorXd> distinct;
  Eigen::VectorXd col;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j; k < d; ++k) {
      col = x.col(j).cwiseProduct(x.col(k));
      if ((col.array() == 0.0).all()) {
        out.slot.push_back(-1);
        continue;
      }
      const auto it = std::find(distinct.begin(), distinct.end(), col);
      out.slot.push_back(it - distinct.begin());
      if (it == distinct.end()) distinct.push_back(col);
    }
  }
  out.columns.resize(x.rows(), static_cast<Eigen::Index>(distinct.size()));
  for (std::size_t c = 0; c < distinct.size(); ++c) out.columns.col(static_cast<Eigen::Index>(c)) = distinct[c];
  return out;
}

/// Damped Newton ascent of sum_u s_u eta_u - w_u log(1 + e^eta_u).
///
/// The objective is concave along the step, so phi(t) - phi(0) >= t phi'(t):
/// a nonnegative slope at the trial point certifies ascent without evaluating
/// any logarithm. Near the optimum the slope after a full step is a tiny
/// number of either sign; phi'(t) >= -phi'(0) / 2 puts the trapezoid estimate
/// of the gain above t phi'(0) / 4 and is accepted too. The likelihood itself
/// is only compared when both tests fail.
NewtonOutcome newton(const Eigen::MatrixXd& x, const OuterProducts& outer, const Eigen::VectorXd& s,
                     const Eigen::VectorXd& w, Eigen::VectorXd& theta, NewtonState& state,
                     const DrOptions& options) {
  const auto u_count = x.rows();
  const auto d = x.cols();
  auto& eta = state.eta;
  auto& p = state.p;
  if (!state.valid) {
    eta.noalias() = x * theta;
    logistic(eta, p);
    state.valid = true;
  }
  Eigen::ArrayXd p_trial(u_count);
  Eigen::VectorXd grad(d), delta(d), eta_trial(u_count), eta_step(u_count), curvature(u_count);
  Eigen::VectorXd packed(outer.columns.cols());
  Eigen::MatrixXd hessian(d, d), weighted;
  const double total = w.sum();
  const double slope_tolerance = 1e-14 * std::max(1.0, total);

  auto gradient = [&] { grad.noalias() = x.transpose() * (s.array() - w.array() * p).matrix(); };

  for (int it = 0; it < options.max_iterations; ++it) {
    gradient();
    if (grad.cwiseAbs().maxCoeff() < options.gradient_tolerance) return {ColumnStatus::Interior, it};
    // A warm start may already sit beyond the bound; only iterates count.
    if (it > 0 && theta.norm() > options.divergence_norm) return {ColumnStatus::Separated, it};

    curvature = (w.array() * p * (1.0 - p)).matrix();
    if (!outer.empty()) {
      packed.noalias() = outer.columns.transpose() * curvature;
      std::size_t c = 0;
      for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = j; k < d; ++k, ++c) {
          const auto slot = outer.slot[c];
          hessian(j, k) = hessian(k, j) = slot < 0 ? 0.0 : packed(slot);
        }
      }
    } else {
      weighted = curvature.asDiagonal() * x;
      hessian.noalias() = x.transpose() * weighted;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, hessian.diagonal().maxCoeff())) {
      hessian.diagonal().array() += 1e-10 * std::max(1.0, hessian.diagonal().maxCoeff());
      ldlt.compute(hessian);
    }
    delta = ldlt.solve(grad);
    eta_step.noalias() = x * delta;
    const double slope0 = grad.dot(delta);

    bool accepted = false;
    double step = 1.0;
    double ll = 0.0;
    bool have_ll = false;
    for (int half = 0; half <= options.max_halvings; ++half) {
      eta_trial = eta + step * eta_step;
      logistic(eta_trial, p_trial);
      const double slope = ((s.array() - w.array() * p_trial) * eta_step.array()).sum();
      accepted = step * slope >= -slope_tolerance || slope >= -0.5 * slope0;
      if (!accepted) {
        if (!have_ll) {
          ll = log_likelihood(eta, s, w);
          have_ll = true;
        }
        const double ll_trial = log_likelihood(eta_trial, s, w);
        accepted = ll_trial >= ll - 1e-12 * std::abs(ll);
      }
      if (accepted) {
        theta += step * delta;
        eta.swap(eta_trial);
        p.swap(p_trial);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No ascent direction left at working precision.
      const bool flat = grad.cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, total);
      return {flat ? ColumnStatus::Interior : ColumnStatus::NotConverged, it + 1};
    }
  }
  if (theta.norm() > options.divergence_norm) return {ColumnStatus::Separated, options.max_iterations};
  gradient();
  return {grad.cwiseAbs().maxCoeff() < options.gradient_tolerance ? ColumnStatus::Interior
                                                                   : ColumnStatus::NotConverged,
          options.max_iterations};
}

/// Starting value: intercept at the logit of the event share when the design
/// has a constant column, zero elsewhere.
Eigen::VectorXd start_value(const Eigen::MatrixXd& x, const Eigen::VectorXd& s,
                            const Eigen::VectorXd& w, Eigen::Index constant_col) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(x.cols());
  if (constant_col >= 0) {
    const double share = std::clamp(s.sum() / w.sum(), 1e-6, 1.0 - 1e-6);
    theta(constant_col) = std::log(share / (1.0 - share));
  }
  return theta;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> threshold_grid(std::vector<double> values, std::size_t max_points,
                                   bool include_zero) {
  std::vector<double> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> grid =
      distinct.size() <= max_points ? std::move(distinct) : quantile_grid(std::move(values), max_points);
  if (include_zero && (grid.empty() || grid.front() > 0.0)) grid.insert(grid.begin(), 0.0);
  return grid;
}

std::vector<double> default_hours_grid(std::span<const double> hours, std::size_t max_points) {
  std::vector<double> positive;
  for (double h : hours)
    if (h > 0.0) positive.push_back(h);
  return threshold_grid(std::move(positive), max_points, true);
}

DrFit fit_dr(const Eigen::MatrixXd& design, std::span<const double> outcome,
             std::span<const double> weights, std::vector<double> grid,
             std::span<const std::uint8_t> trim, OutcomeKind kind, const DrOptions& options) {
  if (options.link != Link::Logit)
    throw Error(ErrorKind::Config, "distribution regression: only the logit link is implemented");
  const auto n = static_cast<std::size_t>(design.rows());
  if (outcome.size() != n || weights.size() != n || (!trim.empty() && trim.size() != n))
    throw Error(ErrorKind::InvalidInput, "distribution regression: length mismatch");
  if (grid.empty()) throw Error(ErrorKind::InvalidInput, "distribution regression: empty grid");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw Error(ErrorKind::InvalidInput, "distribution regression: grid not strictly increasing");

  const Groups groups = make_groups(design, outcome, weights, trim);
  if (groups.fitted == 0) throw Error(ErrorKind::InvalidInput, "distribution regression: no fitting rows");
  check_rank(groups, options);

  Eigen::Index constant_col = -1;
  for (Eigen::Index j = 0; j < groups.rows.cols(); ++j) {
    if ((groups.rows.col(j).array() == 1.0).all()) {
      constant_col = j;
      break;
    }
  }

  DrFit fit;
  fit.outcome_kind = kind;
  fit.thresholds = std::move(grid);
  const std::size_t k_count = fit.thresholds.size();
  const auto d = design.cols();
  fit.coefficients = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(k_count));
  fit.status.assign(k_count, ColumnStatus::Interior);
  fit.iterations.assign(k_count, 0);

  const OuterProducts outer = outer_products(groups.rows);
  const std::size_t blocks = (k_count + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t b) {
    Eigen::VectorXd s(groups.rows.rows());
    Eigen::VectorXd theta;
    NewtonState state;
    bool warm = false;
    for (std::size_t k = b * kBlock; k < std::min(k_count, (b + 1) * kBlock); ++k) {
      std::size_t count = 0;
      groups.successes(fit.thresholds[k], s, count);
      if (count == 0 || count == groups.fitted) {
        fit.status[k] = count == 0 ? ColumnStatus::DegenerateZero : ColumnStatus::DegenerateOne;
        continue;
      }
      if (!warm) {
        theta = start_value(groups.rows, s, groups.total, constant_col);
        state.valid = false;
      }
      auto result = newton(groups.rows, outer, s, groups.total, theta, state, options);
      if (warm && result.status != ColumnStatus::Interior) {
        // The neighbour's solution can be a poor start near separation.
        theta = start_value(groups.rows, s, groups.total, constant_col);
        state.valid = false;
        const auto cold = newton(groups.rows, outer, s, groups.total, theta, state, options);
        result = {cold.status, result.iterations + cold.iterations};
      }
      fit.status[k] = result.status;
      fit.iterations[k] = result.iterations;
      fit.coefficients.col(static_cast<Eigen::Index>(k)) = theta;
      warm = result.status == ColumnStatus::Interior;
    }
  });
  return fit;
}

void DrFit::profile(const Eigen::Ref<const Eigen::VectorXd>& row, std::span<double> out) const {
  const auto k_count = thresholds.size();
  for (std::size_t k = 0; k < k_count; ++k) {
    switch (status[k]) {
      case ColumnStatus::DegenerateZero: out[k] = 0.0; break;
      case ColumnStatus::DegenerateOne: out[k] = 1.0; break;
      default: out[k] = logistic(coefficients.col(static_cast<Eigen::Index>(k)).dot(row)); break;
    }
  }
  if (rearranged) sort_nearly_sorted(out.data(), out.data() + k_count);
}

std::vector<double> DrFit::profile(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  std::vector<double> out(thresholds.size());
  profile(row, out);
  return out;
}

void predict_profiles(const DrFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& rows, RowMatrix& out) {
  const auto k_count = static_cast<Eigen::Index>(fit.size());
  out.resize(rows.rows(), k_count);
  out.noalias() = rows * fit.coefficients;
  out = (1.0 + (-out.array()).exp()).inverse().matrix();
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto s = fit.status[static_cast<std::size_t>(k)];
    if (s == ColumnStatus::DegenerateZero) out.col(k).setZero();
    if (s == ColumnStatus::DegenerateOne) out.col(k).setOnes();
  }
  if (!fit.rearranged) return;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double* row = out.data() + i * k_count;
    sort_nearly_sorted(row, row + k_count);
  }
}

std::size_t DrFit::nonconverged_count() const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), ColumnStatus::NotConverged));
}

double predict_cdf(const DrFit& fit, const Eigen::Ref<const Eigen::VectorXd>& row, double value) {
  if (fit.thresholds.empty() || value < fit.thresholds.front()) return 0.0;
  if (value > fit.thresholds.back()) return 1.0;
  const auto k = static_cast<std::size_t>(
      std::upper_bound(fit.thresholds.begin(), fit.thresholds.end(), value) - fit.thresholds.begin() - 1);
  if (!fit.rearranged) {
    switch (fit.status[k]) {
      case ColumnStatus::DegenerateZero: return 0.0;
      case ColumnStatus::DegenerateOne: return 1.0;
      default: return logistic(fit.coefficients.col(static_cast<Eigen::Index>(k)).dot(row));
    }
  }
  return fit.profile(row)[k];
}

std::size_t count_monotonicity_violations(const DrFit& fit, const Eigen::MatrixXd& rows) {
  std::size_t violations = 0;
  std::vector<double> prof(fit.size());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    fit.profile(rows.row(i).transpose(), prof);
    for (std::size_t k = 1; k < prof.size(); ++k)
      if (prof[k] < prof[k - 1]) ++violations;
  }
  return violations;
}

DrFit rearrange(DrFit fit, const Eigen::MatrixXd& reference_rows, std::size_t* violations) {
  if (violations) {
    fit.rearranged = false;
    *violations = count_monotonicity_violations(fit, reference_rows);
  }
  fit.rearranged = true;
  return fit;
}

std::vector<double> sorted_positive_values(std::span<const double> values) {
  std::vector<double> out;
  for (double v : values)
    if (v > 0.0) out.push_back(v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double conditional_quantile(const DrFit& fit, const Eigen::Ref<const Eigen::VectorXd>& row, double v,
                            std::span<const double> hours_values) {
  if (!(v > 0.0 && v < 1.0))
    throw Error(ErrorKind::InvalidInput, "conditional_quantile: v must lie in (0, 1)");
  const auto prof = fit.profile(row);
  if (fit.rearranged) return conditional_quantile_sorted(fit.thresholds, prof, v, hours_values);

  auto cdf_at = [&](double h) {
    if (h < fit.thresholds.front()) return 0.0;
    if (h > fit.thresholds.back()) return 1.0;
    const auto k = static_cast<std::size_t>(
        std::upper_bound(fit.thresholds.begin(), fit.thresholds.end(), h) - fit.thresholds.begin() - 1);
    return prof[k];
  };
  double q = 0.0;
  double prev = 0.0;
  for (double h : hours_values) {
    if (cdf_at(prev) <= v) q += h - prev;
    prev = h;
  }
  return q;
}

double conditional_quantile_sorted(std::span<const double> thresholds, std::span<const double> profile,
                                   double v, std::span<const double> hours_values) {
  if (hours_values.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::upper_bound(profile.begin(), profile.end(), v) - profile.begin());
  if (k == profile.size()) return hours_values.back();
  const double t = thresholds[k];
  if (t <= 0.0) return 0.0;
  const auto it = std::lower_bound(hours_values.begin(), hours_values.end(), t);
  return it == hours_values.end() ? hours_values.back() : *it;
}

ProfileTable::ProfileTable(const DrFit& fit, const Eigen::MatrixXd& rows) : width_(fit.size()) {
  std::unordered_map<std::string, std::size_t> index;
  slot_.resize(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto key = row_key(rows.row(i).transpose());
    auto [it, inserted] = index.try_emplace(key, index.size());
    if (inserted) {
      data_.resize(data_.size() + width_);
      fit.profile(rows.row(i).transpose(), std::span<double>(data_.data() + it->second * width_, width_));
    }
    slot_[static_cast<std::size_t>(i)] = it->second;
  }
}

// ---------------------------------------------------------------------------
// Serialization

void write_fit(std::ostream& out, const DrFit& fit) {
  out << "cfdecomp-drfit,1\n";
  out << "kind," << (fit.outcome_kind == OutcomeKind::Hours ? "hours" : "wage") << '\n';
  out << "rearranged," << (fit.rearranged ? 1 : 0) << '\n';
  out << "dimension," << fit.dimension() << '\n';
  out << "thresholds," << fit.size() << '\n';
  out << "threshold,status,iterations";
  for (std::size_t j = 0; j < fit.dimension(); ++j) out << ",c" << j;
  out << '\n';
  for (std::size_t k = 0; k < fit.size(); ++k) {
    out << format_double(fit.thresholds[k]) << ',' << static_cast<int>(fit.status[k]) << ','
        << fit.iterations[k];
    for (std::size_t j = 0; j < fit.dimension(); ++j)
      out << ',' << format_double(fit.coefficients(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
    out << '\n';
  }
}

DrFit read_fit(std::istream& in) {
  auto fail = [](const std::string& what) -> void { throw Error(ErrorKind::Io, "read_fit: " + what); };
  std::string line;
  auto next_fields = [&]() {
    if (!std::getline(in, line)) fail("unexpected end of file");
    return split_csv_line(line);
  };
  auto f = next_fields();
  if (f.size() != 2 || f[0] != "cfdecomp-drfit" || f[1] != "1") fail("bad header");
  DrFit fit;
  f = next_fields();
  if (f.size() != 2 || f[0] != "kind") fail("missing kind");
  fit.outcome_kind = f[1] == "hours" ? OutcomeKind::Hours : OutcomeKind::Wage;
  f = next_fields();
  if (f.size() != 2 || f[0] != "rearranged") fail("missing rearranged");
  fit.rearranged = f[1] == "1";
  f = next_fields();
  if (f.size() != 2 || f[0] != "dimension") fail("missing dimension");
  const auto d = static_cast<Eigen::Index>(std::stoul(f[1]));
  f = next_fields();
  if (f.size() != 2 || f[0] != "thresholds") fail("missing thresholds");
  const auto k_count = std::stoul(f[1]);
  next_fields();  // column header
  fit.coefficients.resize(d, static_cast<Eigen::Index>(k_count));
  for (std::size_t k = 0; k < k_count; ++k) {
    f = next_fields();
    if (f.size() != static_cast<std::size_t>(d) + 3) fail("bad row " + std::to_string(k));
    double value = 0.0;
    if (!parse_double(f[0], value)) fail("bad threshold");
    fit.thresholds.push_back(value);
    fit.status.push_back(static_cast<ColumnStatus>(std::stoi(f[1])));
    fit.iterations.push_back(std::stoi(f[2]));
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!parse_double(f[static_cast<std::size_t>(j) + 3], value)) fail("bad coefficient");
      fit.coefficients(j, static_cast<Eigen::Index>(k)) = value;
    }
  }
  return fit;
}

}  // namespace cfdecomp
