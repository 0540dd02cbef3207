#include "cfdecomp/decomposition.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/stats.hpp"
#include "cfdecomp/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>

namespace cfdecomp {

std::string Functional::label() const {
  switch (kind) {
    case Kind::Quantile: return "q" + format_double(tau);
    case Kind::Mean: return "mean";
    case Kind::Ratio: return "ratio" + format_double(tau) + "_" + format_double(tau_lo);
  }
  return "?";
}

Functional Functional::parse(std::string_view text) {
  const std::string s(text);
  auto level = [&](const std::string& part) {
    double v = 0.0;
    if (!parse_double(part, v) || !(v > 0.0 && v < 1.0))
      throw Error(ErrorKind::Config, "functional '" + s + "': level must lie in (0, 1)");
    return v;
  };
  if (s == "mean") return mean();
  if (s.size() > 1 && s[0] == 'q') return quantile(level(s.substr(1)));
  if (s.rfind("ratio", 0) == 0) {
    const auto body = s.substr(5);
    const auto sep = body.find_first_of("_/");
    if (sep == std::string::npos) throw Error(ErrorKind::Config, "functional '" + s + "': expected ratioHI_LO");
    return ratio(level(body.substr(0, sep)), level(body.substr(sep + 1)));
  }
  throw Error(ErrorKind::Config, "unknown functional '" + s + "'");
}

std::array<CounterfactualConfig, 5> decomposition_chain(int b, int t) {
  return {{{t, t, t, t}, {t, t, t, b}, {t, t, b, b}, {t, b, b, b}, {b, b, b, b}}};
}

namespace {

/// What has been computed for one configuration.
struct ConfigResult {
  std::optional<CounterfactualCdf> cdf;
  std::optional<double> mean;
};

double ratio_value(double hi, double lo, const std::string& where) {
  if (lo == 0.0) throw Error(ErrorKind::UndefinedFunctional, "zero denominator quantile at " + where);
  return hi / lo;
}

double value_of(const ConfigResult& r, const Functional& f) {
  switch (f.kind) {
    case Functional::Kind::Quantile: return counterfactual_quantile(*r.cdf, f.tau);
    case Functional::Kind::Mean: return *r.mean;
    case Functional::Kind::Ratio:
      return ratio_value(counterfactual_quantile(*r.cdf, f.tau), counterfactual_quantile(*r.cdf, f.tau_lo),
                         r.cdf->config.label());
  }
  return 0.0;
}

ConfigResult compute(const ModelSet& models, const CounterfactualConfig& cfg, bool need_cdf, bool need_mean,
                     std::span<const double> y_grid) {
  ConfigResult r;
  if (need_cdf) r.cdf = counterfactual_cdf(models, cfg, y_grid);
  if (need_mean) r.mean = counterfactual_mean(models, cfg);
  return r;
}

DecompositionRecord make_record(int year, const std::array<double, 5>& v) {
  const double norm = v[4];
  if (norm == 0.0 || !std::isfinite(norm))
    throw Error(ErrorKind::UndefinedFunctional, "functional undefined at base");
  DecompositionRecord rec;
  rec.year = year;
  rec.chain_values = v;
  rec.normalization = norm;
  rec.total = (v[0] - v[4]) / norm;
  rec.structural = (v[0] - v[1]) / norm;
  rec.composition = (v[1] - v[2]) / norm;
  rec.intensive = (v[2] - v[3]) / norm;
  rec.extensive = (v[3] - v[4]) / norm;
  return rec;
}

DecompositionRecord undefined_record(int year, std::string reason) {
  DecompositionRecord rec;
  rec.year = year;
  rec.defined = false;
  rec.reason = std::move(reason);
  return rec;
}

bool is_undefined_kind(ErrorKind k) {
  return k == ErrorKind::UndefinedFunctional || k == ErrorKind::GridTooShort;
}

}  // namespace

double evaluate_functional(const ModelSet& models, const CounterfactualConfig& cfg,
                           const Functional& functional, std::span<const double> y_grid) {
  const bool mean = functional.kind == Functional::Kind::Mean;
  return value_of(compute(models, cfg, !mean, mean, y_grid), functional);
}

DecompositionRecord decompose_functional(const ModelSet& models, int base, int t,
                                         const Functional& functional, std::span<const double> y_grid) {
  const auto chain = decomposition_chain(base, t);
  std::array<double, 5> v{};
  for (std::size_t k = 0; k < 5; ++k) v[k] = evaluate_functional(models, chain[k], functional, y_grid);
  return make_record(t, v);
}

DecompositionRecord decompose_ratio(const ModelSet& models, int base, int t, double tau_hi, double tau_lo,
                                    std::span<const double> y_grid) {
  return decompose_functional(models, base, t, Functional::ratio(tau_hi, tau_lo), y_grid);
}

std::vector<DecompositionSeries> decompose_series(const ModelSet& models, int base,
                                                  const std::vector<Functional>& functionals,
                                                  std::span<const double> y_grid) {
  if (!models.count(base)) throw Error(ErrorKind::InvalidInput, "base year " + std::to_string(base) + " not fitted");
  bool need_cdf = false, need_mean = false;
  for (const auto& f : functionals) (f.kind == Functional::Kind::Mean ? need_mean : need_cdf) = true;

  std::vector<CounterfactualConfig> configs;
  std::map<std::string, std::size_t> index;
  for (const auto& [t, m] : models)
    for (const auto& cfg : decomposition_chain(base, t))
      if (index.try_emplace(cfg.label(), configs.size()).second) configs.push_back(cfg);

  std::vector<ConfigResult> results(configs.size());
  if (need_cdf) {
    auto cdfs = counterfactual_cdfs(models, configs, y_grid);
    for (std::size_t k = 0; k < configs.size(); ++k) results[k].cdf = std::move(cdfs[k]);
  }
  if (need_mean)
    parallel_for(configs.size(), [&](std::size_t k) { results[k].mean = counterfactual_mean(models, configs[k]); });
  auto result_of = [&](const CounterfactualConfig& cfg) -> const ConfigResult& {
    return results[index.at(cfg.label())];
  };

  std::vector<DecompositionSeries> out;
  for (const auto& f : functionals) {
    DecompositionSeries series;
    series.base_year = base;
    series.functional = f;
    try {
      series.normalization = value_of(result_of(CounterfactualConfig::observed(base)), f);
    } catch (const Error& e) {
      if (!is_undefined_kind(e.kind())) throw;
    }
    for (const auto& [t, m] : models) {
      try {
        std::array<double, 5> v{};
        const auto chain = decomposition_chain(base, t);
        for (std::size_t k = 0; k < 5; ++k) v[k] = value_of(result_of(chain[k]), f);
        series.records.push_back(make_record(t, v));
      } catch (const Error& e) {
        if (!is_undefined_kind(e.kind())) throw;
        series.records.push_back(undefined_record(t, e.what()));
      }
    }
    out.push_back(std::move(series));
  }
  return out;
}

DecompositionSeries decompose_series(const ModelSet& models, int base, const Functional& functional,
                                     std::span<const double> y_grid) {
  return std::move(decompose_series(models, base, std::vector<Functional>{functional}, y_grid).front());
}

// ---------------------------------------------------------------------------
// Hours

HoursCdf counterfactual_hours_cdf(const ModelSet& models, int conditional_year, int covariate_year) {
  const auto c = models.find(conditional_year);
  const auto d = models.find(covariate_year);
  if (c == models.end() || d == models.end())
    throw Error(ErrorKind::InvalidInput, "hours counterfactual: year not fitted");
  const auto& fit = c->second.hours;
  const auto& sample = *d->second.sample;
  if (fit.dimension() != static_cast<std::size_t>(sample.basis_p.cols()))
    throw Error(ErrorKind::InvalidInput, "hours counterfactual: designs differ in width across years");
  const auto& weights = d->second.weights;
  const ProfileTable table(fit, sample.basis_p);
  HoursCdf out;
  out.conditional_year = conditional_year;
  out.covariate_year = covariate_year;
  out.h_grid = fit.thresholds;
  out.values.assign(fit.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto prof = table[i];
    for (std::size_t k = 0; k < prof.size(); ++k) out.values[k] += weights[i] * prof[k];
    total += weights[i];
  }
  for (auto& v : out.values) v = std::clamp(v / total, 0.0, 1.0);
  return out;
}

namespace {

double hours_quantile(const HoursCdf& cdf, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidInput, "quantile level must lie in (0, 1)");
  if (tau > cdf.values.back()) throw Error(ErrorKind::GridTooShort, "grid too short for the hours quantile");
  const auto it = std::lower_bound(cdf.values.begin(), cdf.values.end(), tau);
  return cdf.h_grid[static_cast<std::size_t>(it - cdf.values.begin())];
}

}  // namespace

double hours_functional(const ModelSet& models, int conditional_year, int covariate_year,
                        const Functional& functional) {
  const auto cdf = counterfactual_hours_cdf(models, conditional_year, covariate_year);
  switch (functional.kind) {
    case Functional::Kind::Quantile: return hours_quantile(cdf, functional.tau);
    case Functional::Kind::Mean: {
      // Mean of the step CDF: integral of 1 - F over [0, max threshold].
      double m = 0.0;
      for (std::size_t k = 0; k + 1 < cdf.h_grid.size(); ++k)
        m += (cdf.h_grid[k + 1] - cdf.h_grid[k]) * (1.0 - cdf.values[k]);
      if (cdf.h_grid.front() > 0.0) m += cdf.h_grid.front();
      return m;
    }
    case Functional::Kind::Ratio:
      return ratio_value(hours_quantile(cdf, functional.tau), hours_quantile(cdf, functional.tau_lo),
                         "hours <" + std::to_string(conditional_year) + "," + std::to_string(covariate_year) + ">");
  }
  return 0.0;
}

HoursDecomposition decompose_hours(const ModelSet& models, int base, int t, const Functional& functional) {
  const double tt = hours_functional(models, t, t, functional);
  const double bt = hours_functional(models, base, t, functional);
  const double bb = hours_functional(models, base, base, functional);
  if (bb == 0.0) throw Error(ErrorKind::UndefinedFunctional, "functional undefined at base");
  HoursDecomposition out;
  out.year = t;
  out.normalization = bb;
  out.total = (tt - bb) / bb;
  out.structure = (tt - bt) / bb;
  out.composition = (bt - bb) / bb;
  return out;
}

// ---------------------------------------------------------------------------
// Descriptive diagnostics

double employment_rate(const YearSample& sample) {
  double working = 0.0, total = 0.0;
  for (const auto& o : sample.observations) {
    total += o.weight;
    if (o.works()) working += o.weight;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidInput, "employment rate of an empty sample");
  return working / total;
}

LogHoursVariance variance_log_hours_decomposition(const YearSample& sample) {
  std::vector<double> a, b, w;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& o = sample.observations[i];
    if (!o.works()) continue;
    if (!o.weekly_hours || !o.weeks)
      throw Error(ErrorKind::MissingColumn, "variance decomposition needs weekly hours and weeks (row " +
                                                std::to_string(i) + ")");
    if (!(*o.weekly_hours > 0.0) || !(*o.weeks > 0.0))
      throw Error(ErrorKind::InvalidInput, "weekly hours and weeks must be positive for workers (row " +
                                               std::to_string(i) + ")");
    a.push_back(std::log(*o.weekly_hours));
    b.push_back(std::log(*o.weeks));
    w.push_back(o.weight);
  }
  if (a.empty()) throw Error(ErrorKind::InvalidInput, "variance decomposition: no workers");
  double total = 0.0, ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += w[i];
    ma += w[i] * a[i];
    mb += w[i] * b[i];
  }
  ma /= total;
  mb /= total;
  LogHoursVariance out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    out.var_log_weekly_hours += w[i] * da * da;
    out.var_log_weeks += w[i] * db * db;
    out.covariance += w[i] * da * db;
    out.var_log_hours += w[i] * (da + db) * (da + db);
  }
  out.var_log_weekly_hours /= total;
  out.var_log_weeks /= total;
  out.covariance /= total;
  out.var_log_hours /= total;
  return out;
}

void write_series(std::ostream& out, const DecompositionSeries& series) {
  out << "year,functional,defined";
  for (const char* t : kTermNames) out << ',' << t;
  for (const char* t : kTermNames) out << ",abs_" << t;
  out << ",normalization\n";
  const auto label = series.functional.label();
  for (const auto& r : series.records) {
    out << r.year << ',' << label << ',' << (r.defined ? 1 : 0);
    const auto terms = r.terms();
    for (double v : terms) out << ',' << (r.defined ? format_double(v) : "NA");
    for (double v : terms) out << ',' << (r.defined ? format_double(r.absolute(v)) : "NA");
    out << ',' << (r.defined ? format_double(r.normalization) : "NA") << '\n';
  }
}

}  // namespace cfdecomp
