#include "cfdecomp/synthetic.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace cfdecomp {

double WageLaw::operator()(double x, double e) const {
  const double index = a + b * x + sigma * e;
  return form == Form::LogLinear ? std::exp(index) : index;
}

double HoursLaw::latent(double x, double z, double u) const {
  return c + d * x + f * z + s * normal_quantile(u);
}

double HoursLaw::operator()(double x, double z, double u) const {
  const double l = latent(x, z, u);
  return l > min_hours ? l : l - min_hours;
}

double HoursLaw::participation_cutoff(double x, double z) const {
  return normal_cdf((min_hours - c - d * x - f * z) / s);
}

const YearDgp& DgpSpec::year(int label) const {
  for (const auto& y : years)
    if (y.year == label) return y;
  throw Error(ErrorKind::Config, "DGP has no year " + std::to_string(label));
}

void DgpSpec::validate() const {
  if (years.empty()) throw Error(ErrorKind::Config, "DGP needs at least one year");
  std::set<int> labels;
  for (const auto& y : years) {
    const std::string where = "DGP year " + std::to_string(y.year) + ": ";
    if (!labels.insert(y.year).second) throw Error(ErrorKind::Config, where + "duplicate year");
    if (y.n == 0) throw Error(ErrorKind::Config, where + "n must be positive");
    const auto& cov = y.covariates;
    if (cov.x_probs.empty() || cov.z_given_x.size() != cov.x_probs.size())
      throw Error(ErrorKind::Config, where + "x_probs and z_given_x must have equal nonzero length");
    double total = 0.0;
    for (double p : cov.x_probs) {
      if (!(p >= 0.0)) throw Error(ErrorKind::Config, where + "negative x probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::Config, where + "x_probs must sum to 1");
    for (double p : cov.z_given_x)
      if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Config, where + "z_given_x must lie in [0, 1]");
    if (!(std::abs(y.rho) < 1.0)) throw Error(ErrorKind::Config, where + "|rho| must be below 1");
    if (!(y.wage.sigma > 0.0)) throw Error(ErrorKind::Config, where + "wage sigma must be positive");
    if (y.bunching && !(y.bunching->share > 0.0 && y.bunching->share < 1.0))
      throw Error(ErrorKind::Config, where + "bunching share must lie in (0, 1)");
    // k must be strictly increasing in u on every (x, z) cell.
    for (std::size_t x = 0; x < cov.x_probs.size(); ++x) {
      for (int z = 0; z <= 1; ++z) {
        double prev = -HUGE_VAL;
        for (int j = 1; j < 200; ++j) {
          const double k = y.hours(static_cast<double>(x), z, j / 200.0);
          if (!(k > prev))
            throw Error(ErrorKind::Config, where + "hours function not strictly increasing in u");
          prev = k;
        }
      }
    }
  }
}

namespace {

/// CDF of latent hours among workers (L > min_hours), mixing over cells.
double worker_latent_cdf(const YearDgp& y, double h) {
  double num = 0.0, den = 0.0;
  const auto& cov = y.covariates;
  for (std::size_t x = 0; x < cov.x_probs.size(); ++x) {
    for (int z = 0; z <= 1; ++z) {
      const double pz = z ? cov.z_given_x[x] : 1.0 - cov.z_given_x[x];
      const double pi = cov.x_probs[x] * pz;
      if (pi == 0.0) continue;
      const double mu = y.hours.c + y.hours.d * static_cast<double>(x) + y.hours.f * z;
      const double f0 = normal_cdf((y.hours.min_hours - mu) / y.hours.s);
      const double fh = normal_cdf((h - mu) / y.hours.s);
      num += pi * std::max(0.0, fh - f0);
      den += pi * (1.0 - f0);
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

double worker_latent_quantile(const YearDgp& y, double p) {
  double lo = y.hours.min_hours;
  double hi = y.hours.c + 40.0 * y.hours.s + std::abs(y.hours.d) * 10.0 + std::abs(y.hours.f);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (worker_latent_cdf(y, mid) < p ? lo : hi) = mid;
  }
  return hi;
}

std::size_t draw_index(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

}  // namespace

std::optional<std::pair<double, double>> bunching_interval(const YearDgp& y) {
  if (!y.bunching) return std::nullopt;
  const double share = y.bunching->share;
  const double center = worker_latent_cdf(y, y.bunching->atom);
  const double p0 = std::clamp(center - share / 2.0, 0.0, 1.0 - share);
  const double lo = p0 == 0.0 ? y.hours.min_hours : worker_latent_quantile(y, p0);
  const double hi = worker_latent_quantile(y, p0 + share);
  return std::make_pair(lo, hi);
}

double reported_hours(const YearDgp& y, double x, double z, double u,
                      const std::optional<std::pair<double, double>>& interval) {
  const double k = y.hours(x, z, u);
  if (!(k > 0.0)) return 0.0;
  if (interval && k > interval->first && k <= interval->second) return y.bunching->atom;
  return k;
}

std::vector<SimulatedRow> simulate_rows(const YearDgp& y, std::uint64_t seed) {
  const auto interval = bunching_interval(y);
  const double tail = std::sqrt(1.0 - y.rho * y.rho);
  std::vector<SimulatedRow> rows(y.n);
  parallel_for(y.n, [&](std::size_t i) {
    Stream st(stream_id({seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(y.year)), i}));
    const auto xi = draw_index(y.covariates.x_probs, st.uniform());
    const double x = static_cast<double>(xi);
    const double z = st.uniform() < y.covariates.z_given_x[xi] ? 1.0 : 0.0;
    const double u = st.uniform();
    const double e = y.rho * normal_quantile(u) + tail * st.normal();
    const double h = reported_hours(y, x, z, u, interval);
    auto& row = rows[i];
    row.u = u;
    row.e = e;
    if (h > 0.0) {
      const double wage = y.wage(x, e);
      if (!(wage > 0.0) || !std::isfinite(wage))
        throw Error(ErrorKind::Config, "DGP year " + std::to_string(y.year) + ": wage law produced a nonpositive wage");
      const double weeks = std::min(52.0, std::max(1.0, h / 40.0));
      row.obs = make_observation(wage * h, h, {x}, {z}, 1.0, h / weeks, weeks);
    } else {
      row.obs = make_observation(0.0, 0.0, {x}, {z}, 1.0, 0.0, 0.0);
    }
  });
  return rows;
}

std::vector<std::vector<Observation>> simulate(const DgpSpec& spec) {
  spec.validate();
  std::vector<std::vector<Observation>> out;
  for (const auto& y : spec.years) {
    auto rows = simulate_rows(y, spec.seed);
    std::vector<Observation> obs;
    obs.reserve(rows.size());
    for (auto& r : rows) obs.push_back(std::move(r.obs));
    out.push_back(std::move(obs));
  }
  return out;
}

DgpSpec canonical_dgp(std::size_t n, std::uint64_t seed) {
  DgpSpec spec;
  spec.seed = seed;
  YearDgp base;
  base.year = 2000;
  base.n = n;
  YearDgp later = base;
  later.year = 2010;
  later.wage.a = 2.6;
  later.wage.b = 0.35;
  later.covariates.x_probs = {0.3, 0.35, 0.35};
  later.hours.c = 1600.0;
  spec.years = {base, later};
  return spec;
}

std::vector<double> oracle_earnings_draws(const DgpSpec& spec, const CounterfactualConfig& cfg,
                                          std::size_t draws, std::uint64_t seed) {
  const auto& yq = spec.year(cfg.q);
  const auto& yr = spec.year(cfg.r);
  const auto& ys = spec.year(cfg.s);
  const auto& yp = spec.year(cfg.p);
  const auto interval_r = bunching_interval(yr);
  const double tail = std::sqrt(1.0 - yp.rho * yp.rho);
  const auto key = [](int year) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(year)); };
  std::vector<double> out(draws);
  parallel_for(draws, [&](std::size_t j) {
    Stream st(stream_id({seed, key(cfg.q), key(cfg.r), key(cfg.s), key(cfg.p), j}));
    const auto xi = draw_index(ys.covariates.x_probs, st.uniform());
    const double x = static_cast<double>(xi);
    const double z = st.uniform() < ys.covariates.z_given_x[xi] ? 1.0 : 0.0;
    const double u = st.uniform();
    const double eps = st.normal();
    if (!(yq.hours(x, z, u) > 0.0)) {
      out[j] = 0.0;
      return;
    }
    const double h = reported_hours(yr, x, z, u, interval_r);
    out[j] = h > 0.0 ? yp.wage(x, yp.rho * normal_quantile(u) + tail * eps) * h : 0.0;
  });
  return out;
}

CounterfactualCdf oracle_counterfactual_cdf(const DgpSpec& spec, const CounterfactualConfig& cfg,
                                            std::span<const double> y_grid, std::size_t draws,
                                            std::uint64_t seed) {
  const auto y = oracle_earnings_draws(spec, cfg, draws, seed);
  CounterfactualCdf cdf;
  cdf.config = cfg;
  cdf.y_grid.assign(y_grid.begin(), y_grid.end());
  cdf.values = empirical_cdf(y, {}, y_grid);
  return cdf;
}

double oracle_lasf(const YearDgp& y, double x, double v, std::size_t draws, std::uint64_t seed) {
  const double tail = std::sqrt(1.0 - y.rho * y.rho);
  const double shift = y.rho * normal_quantile(v);
  double sum = 0.0;
  Stream st(stream_id({seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(y.year))}));
  for (std::size_t j = 0; j < draws; ++j) sum += y.wage(x, shift + tail * st.normal());
  return sum / static_cast<double>(draws);
}

double true_ldsf(const YearDgp& y, double w, double x, double v) {
  double e_star = 0.0;
  if (y.wage.form == WageLaw::Form::LogLinear) {
    if (!(w > 0.0)) return 0.0;
    e_star = (std::log(w) - y.wage.a - y.wage.b * x) / y.wage.sigma;
  } else {
    e_star = (w - y.wage.a - y.wage.b * x) / y.wage.sigma;
  }
  return normal_cdf((e_star - y.rho * normal_quantile(v)) / std::sqrt(1.0 - y.rho * y.rho));
}

}  // namespace cfdecomp
