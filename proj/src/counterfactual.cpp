#include "cfdecomp/counterfactual.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/stats.hpp"
#include "cfdecomp/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace cfdecomp {

namespace {

constexpr std::size_t kChunk = 256;

std::vector<std::string> labels(const std::vector<Term>& terms) {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.label());
  return out;
}

const YearModel& model_for(const ModelSet& models, int year) {
  const auto it = models.find(year);
  if (it == models.end()) throw Error(ErrorKind::InvalidInput, "no fitted model for year " + std::to_string(year));
  return it->second;
}

struct Roles {
  const YearModel& q;
  const YearModel& r;
  const YearModel& s;
  const YearModel& p;
};

Roles resolve(const ModelSet& models, const CounterfactualConfig& cfg) {
  Roles roles{model_for(models, cfg.q), model_for(models, cfg.r), model_for(models, cfg.s),
              model_for(models, cfg.p)};
  const auto width = static_cast<std::size_t>(roles.s.sample->basis_p.cols());
  if (roles.q.hours.dimension() != width || roles.r.hours.dimension() != width)
    throw Error(ErrorKind::InvalidInput, "counterfactual " + cfg.label() +
                                             ": hours designs differ in width across years");
  if (roles.p.ldsf.m_terms != roles.s.ldsf.m_terms)
    throw Error(ErrorKind::InvalidInput, "counterfactual " + cfg.label() +
                                             ": wage designs differ across years");
  return roles;
}

double cdf_at_zero(const DrFit& fit, std::span<const double> profile) {
  return fit.thresholds.front() > 0.0 ? 0.0 : profile[0];
}

}  // namespace

YearModel fit_year_model(std::shared_ptr<const YearSample> sample, const FitOptions& options,
                         std::span<const double> weights) {
  if (!sample) throw Error(ErrorKind::InvalidInput, "fit_year_model: null sample");
  YearModel model;
  model.year = sample->year;
  model.weights = weights.empty() ? sample->weights() : std::vector<double>(weights.begin(), weights.end());
  if (model.weights.size() != sample->size())
    throw Error(ErrorKind::InvalidInput, "fit_year_model: weight vector length mismatch");

  const auto hours = sample->hours();
  auto hours_options = options.structural.dr;
  hours_options.column_labels = labels(canonical_order(options.basis.p_terms));
  model.hours = fit_dr(sample->basis_p, hours, model.weights,
                       default_hours_grid(hours, options.hours_grid_points), {}, OutcomeKind::Hours,
                       hours_options);
  model.hours.rearranged = true;

  model.cf = options.control_function == ControlFunctionMode::Interval
                 ? interval_sample_control_function(model.hours, *sample, options.seed)
                 : point_control_function(model.hours, *sample, options.seed);

  const auto m_terms = canonical_order(options.basis.m_terms.empty()
                                           ? BasisSpec::default_m_terms(options.basis.p_terms)
                                           : options.basis.m_terms);
  model.ldsf = fit_ldsf(*sample, model.cf, m_terms, model.weights, options.structural);
  model.lasf = fit_lasf(*sample, model.cf, m_terms, model.weights);
  model.hours_values = sorted_positive_values(hours);
  model.sample = std::move(sample);
  return model;
}

ModelSet fit_models(const std::vector<std::shared_ptr<const YearSample>>& samples,
                    const FitOptions& options, const std::vector<std::vector<double>>& weights) {
  if (!weights.empty() && weights.size() != samples.size())
    throw Error(ErrorKind::InvalidInput, "fit_models: one weight vector per sample expected");
  ModelSet models;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const int year = samples[k]->year;
    if (models.count(year)) throw Error(ErrorKind::InvalidInput, "duplicate year " + std::to_string(year));
    models.emplace(year, fit_year_model(samples[k], options,
                                        weights.empty() ? std::span<const double>{} : weights[k]));
  }
  return models;
}

std::vector<double> default_earnings_grid(const ModelSet& models, std::size_t count) {
  std::vector<double> pooled;
  for (const auto& [year, m] : models)
    for (const auto& o : m.sample->observations)
      if (o.earnings > 0.0) pooled.push_back(o.earnings);
  auto grid = quantile_grid(std::move(pooled), count);
  grid.insert(grid.begin(), 0.0);
  return grid;
}

CounterfactualRows counterfactual_rows(const ModelSet& models, const CounterfactualConfig& cfg) {
  const auto roles = resolve(models, cfg);
  const auto& sample = *roles.s.sample;
  const ProfileTable prof_q(roles.q.hours, sample.basis_p);
  const ProfileTable prof_r = cfg.r == cfg.q ? prof_q : ProfileTable(roles.r.hours, sample.basis_p);
  CounterfactualRows rows;
  rows.participates.resize(sample.size());
  rows.hours.resize(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double v = roles.s.cf.v_hat[i];
    rows.participates[i] = cdf_at_zero(roles.q.hours, prof_q[i]) < v ? 1 : 0;
    rows.hours[i] = rows.participates[i]
                        ? conditional_quantile_sorted(roles.r.hours.thresholds, prof_r[i], v, roles.r.hours_values)
                        : 0.0;
  }
  return rows;
}

std::vector<CounterfactualCdf> counterfactual_cdfs(const ModelSet& models,
                                                   std::span<const CounterfactualConfig> configs,
                                                   std::span<const double> y_grid) {
  if (y_grid.empty()) throw Error(ErrorKind::InvalidInput, "counterfactual: empty earnings grid");
  for (std::size_t j = 1; j < y_grid.size(); ++j)
    if (!(y_grid[j] > y_grid[j - 1]))
      throw Error(ErrorKind::InvalidInput, "counterfactual: earnings grid not increasing");

  const std::size_t ny = y_grid.size();
  std::vector<CounterfactualRows> rows;
  // Configurations sharing (p, s) evaluate the same LDSF profiles.
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    resolve(models, configs[c]);
    rows.push_back(counterfactual_rows(models, configs[c]));
    groups[{configs[c].p, configs[c].s}].push_back(c);
  }

  struct Task {
    const std::vector<std::size_t>* members;
    std::size_t chunk;
  };
  std::vector<Task> tasks;
  for (const auto& [key, members] : groups) {
    const std::size_t n = model_for(models, key.second).sample->size();
    for (std::size_t c = 0; c * kChunk < n; ++c) tasks.push_back({&members, c});
  }
  // partial[config][chunk]: chunk sums of w (G^p - 1) on the grid.
  std::vector<std::vector<std::vector<double>>> partial(configs.size());
  for (const auto& [key, members] : groups) {
    const std::size_t n = model_for(models, key.second).sample->size();
    for (auto c : members) partial[c].resize((n + kChunk - 1) / kChunk);
  }

  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& members = *tasks[t].members;
    const auto roles = resolve(models, configs[members.front()]);
    const auto& sample = *roles.s.sample;
    const auto& ldsf = roles.p.ldsf;
    const auto& wt = ldsf.dr.thresholds;
    const std::size_t k_count = wt.size();
    const std::size_t d = ldsf.m_terms.size();
    const std::size_t begin = tasks[t].chunk * kChunk;
    const std::size_t end = std::min(sample.size(), begin + kChunk);

    auto active = [&](std::size_t c, std::size_t i) { return rows[c].participates[i] && rows[c].hours[i] > 0.0; };
    std::vector<std::size_t> used;
    std::vector<std::size_t> slot(end - begin, 0);
    for (std::size_t i = begin; i < end; ++i) {
      if (std::none_of(members.begin(), members.end(), [&](std::size_t c) { return active(c, i); })) continue;
      slot[i - begin] = used.size();
      used.push_back(i);
    }
    RowMatrix prof;
    if (!used.empty()) {
      Eigen::MatrixXd design(static_cast<Eigen::Index>(used.size()), static_cast<Eigen::Index>(d));
      std::vector<double> m(d);
      for (std::size_t a = 0; a < used.size(); ++a) {
        const auto& o = sample.observations[used[a]];
        eval_terms(ldsf.m_terms, o.x, o.z, roles.s.cf.v_hat[used[a]], m);
        for (std::size_t j = 0; j < d; ++j) design(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = m[j];
      }
      predict_profiles(ldsf.dr, design, prof);
    }

    std::vector<double> diff(ny + 1);
    for (auto c : members) {
      std::fill(diff.begin(), diff.end(), 0.0);
      double level = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        if (!active(c, i)) continue;
        const double w = roles.s.weights[i];
        const double inv_h = 1.0 / rows[c].hours[i];
        const double* g = prof.data() + slot[i - begin] * k_count;
        // Row term w (G^p(y / h) - 1) is a step function of the grid index.
        level -= w;
        std::size_t j = 0;
        double prev = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
          while (j < ny && y_grid[j] * inv_h < wt[k]) ++j;
          if (j == ny) break;
          diff[j] += w * (g[k] - prev);
          prev = g[k];
        }
        while (j < ny && !(y_grid[j] * inv_h > wt.back())) ++j;  // G^p = 1 beyond the last threshold
        diff[j] += w * (1.0 - prev);
      }
      auto& acc = partial[c][tasks[t].chunk];
      acc.resize(ny);
      for (std::size_t j = 0; j < ny; ++j) {
        level += diff[j];
        acc[j] = level;
      }
    }
  });

  std::vector<CounterfactualCdf> out;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto& weights = model_for(models, configs[c].s).weights;
    double total_weight = 0.0;
    for (double w : weights) total_weight += w;
    std::vector<double> sum(ny, 0.0);
    for (const auto& acc : partial[c])
      for (std::size_t j = 0; j < ny; ++j) sum[j] += acc[j];
    CounterfactualCdf cdf;
    cdf.config = configs[c];
    cdf.y_grid.assign(y_grid.begin(), y_grid.end());
    cdf.values.resize(ny);
    for (std::size_t j = 0; j < ny; ++j) cdf.values[j] = std::clamp(1.0 + sum[j] / total_weight, 0.0, 1.0);
    out.push_back(std::move(cdf));
  }
  return out;
}

CounterfactualCdf counterfactual_cdf(const ModelSet& models, const CounterfactualConfig& cfg,
                                     std::span<const double> y_grid) {
  return std::move(counterfactual_cdfs(models, std::span(&cfg, 1), y_grid).front());
}

double counterfactual_quantile(const CounterfactualCdf& cdf, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidInput, "quantile level must lie in (0, 1)");
  if (cdf.values.empty() || tau > cdf.values.back())
    throw Error(ErrorKind::GridTooShort, "grid too short: CDF of " + cdf.config.label() + " ends at " +
                                             format_double(cdf.values.empty() ? 0.0 : cdf.values.back()) +
                                             " < " + format_double(tau));
  const auto it = std::lower_bound(cdf.values.begin(), cdf.values.end(), tau);
  return cdf.y_grid[static_cast<std::size_t>(it - cdf.values.begin())];
}

double counterfactual_mean(const ModelSet& models, const CounterfactualConfig& cfg) {
  const auto roles = resolve(models, cfg);
  const auto rows = counterfactual_rows(models, cfg);
  const auto& sample = *roles.s.sample;
  const auto& weights = roles.s.weights;
  std::vector<double> contribution(sample.size(), 0.0);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!rows.participates[i] || rows.hours[i] == 0.0) continue;
    const auto& o = sample.observations[i];
    contribution[i] = eval_lasf(roles.p.lasf, o.x, roles.s.cf.v_hat[i]) * rows.hours[i];
  }
  return weighted_mean(contribution, weights);
}

void write_cdf(std::ostream& out, const CounterfactualCdf& cdf) {
  out << "y,G\n";
  for (std::size_t j = 0; j < cdf.y_grid.size(); ++j)
    out << format_double(cdf.y_grid[j]) << ',' << format_double(cdf.values[j]) << '\n';
}

// ---------------------------------------------------------------------------
// Support diagnostics

namespace {

/// Maps a covariate value to a cell label: its own value when the pooled
/// covariate has few levels, else its pooled decile.
struct Discretizer {
  std::vector<double> cuts;  // decile upper bounds; empty = raw levels
  bool binned = false;

  std::string cell(double value) const {
    if (!binned) return format_double(value);
    const auto k = std::lower_bound(cuts.begin(), cuts.end(), value) - cuts.begin();
    return "bin" + std::to_string(k);
  }
};

Discretizer make_discretizer(std::vector<double> pooled, std::size_t max_levels) {
  Discretizer d;
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> distinct = pooled;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= max_levels) return d;
  d.binned = true;
  for (int k = 1; k < 10; ++k) d.cuts.push_back(empirical_quantile(pooled, k / 10.0));
  return d;
}

}  // namespace

double SupportReport::violating_mass(std::string_view condition) const {
  double m = 0.0;
  for (const auto& v : violations)
    if (v.condition == condition) m += v.mass;
  return m;
}

SupportReport check_support(const ModelSet& models, const CounterfactualConfig& cfg,
                            const SupportOptions& options) {
  const auto roles = resolve(models, cfg);
  const std::vector<const YearModel*> involved = {&roles.q, &roles.r, &roles.s, &roles.p};
  const auto& s_obs = roles.s.sample->observations;
  const std::size_t nx = s_obs.empty() ? 0 : s_obs.front().x.size();
  const std::size_t nz = s_obs.empty() ? 0 : s_obs.front().z.size();

  std::vector<Discretizer> dx(nx), dz(nz);
  for (std::size_t k = 0; k < nx; ++k) {
    std::vector<double> pooled;
    for (const auto* m : involved)
      for (const auto& o : m->sample->observations) pooled.push_back(o.x[k]);
    dx[k] = make_discretizer(std::move(pooled), options.max_levels);
  }
  for (std::size_t k = 0; k < nz; ++k) {
    std::vector<double> pooled;
    for (const auto* m : involved)
      for (const auto& o : m->sample->observations) pooled.push_back(o.z[k]);
    dz[k] = make_discretizer(std::move(pooled), options.max_levels);
  }
  const std::size_t v_bins = std::max<std::size_t>(1, options.v_bins);

  auto x_cell = [&](const Observation& o) {
    std::string c;
    for (std::size_t k = 0; k < nx; ++k) c += (k ? "," : "") + ("x" + std::to_string(k) + "=") + dx[k].cell(o.x[k]);
    return c;
  };
  auto xz_cell = [&](const Observation& o) {
    std::string c = x_cell(o);
    for (std::size_t k = 0; k < nz; ++k) c += (c.empty() ? "" : ",") + ("z" + std::to_string(k) + "=") + dz[k].cell(o.z[k]);
    return c;
  };
  auto xv_cell = [&](const Observation& o, double v) {
    const auto b = std::min(v_bins - 1, static_cast<std::size_t>(v * static_cast<double>(v_bins)));
    std::string c = x_cell(o);
    return c + (c.empty() ? "" : ",") + "v=bin" + std::to_string(b);
  };

  auto xv_support = [&](const YearModel& m) {
    std::set<std::string> cells;
    for (std::size_t i = 0; i < m.sample->size(); ++i)
      if (m.sample->observations[i].works()) cells.insert(xv_cell(m.sample->observations[i], m.cf.v_hat[i]));
    return cells;
  };
  auto xz_support = [&](const YearModel& m) {
    std::set<std::string> cells;
    for (const auto& o : m.sample->observations) cells.insert(xz_cell(o));
    return cells;
  };

  double total = 0.0;
  for (double w : roles.s.weights) total += w;
  std::map<std::string, double> xv_mass, xz_mass;
  for (std::size_t i = 0; i < s_obs.size(); ++i) {
    xz_mass[xz_cell(s_obs[i])] += roles.s.weights[i] / total;
    if (s_obs[i].works()) xv_mass[xv_cell(s_obs[i], roles.s.cf.v_hat[i])] += roles.s.weights[i] / total;
  }

  SupportReport report;
  const auto xv_q = xv_support(roles.q);
  const auto xv_p = xv_support(roles.p);
  for (const auto& [cell, mass] : xv_mass)
    if (xv_q.count(cell) && !xv_p.count(cell)) report.violations.push_back({"XV", cell, mass});
  const auto xz_q = xz_support(roles.q);
  const auto xz_r = xz_support(roles.r);
  for (const auto& [cell, mass] : xz_mass)
    if (!xz_q.count(cell) && !xz_r.count(cell)) report.violations.push_back({"XZ", cell, mass});
  report.pass = report.violations.empty();

  if (options.strict && !report.pass) {
    std::ostringstream os;
    os << "support conditions fail for " << cfg.label() << ":";
    for (const auto& v : report.violations) os << " [" << v.condition << ' ' << v.cell << ']';
    throw Error(ErrorKind::SupportViolation, os.str());
  }
  return report;
}

}  // namespace cfdecomp
