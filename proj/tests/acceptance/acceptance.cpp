// Acceptance harness: runs the numbered criteria and prints one PASS/FAIL
// line per criterion. Exit status is nonzero when any criterion fails.

#include "cfdecomp/bootstrap.hpp"
#include "cfdecomp/decomposition.hpp"
#include "cfdecomp/dist_reg.hpp"
#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/pipeline.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/stats.hpp"
#include "cfdecomp/synthetic.hpp"

#include "support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

using namespace cfdecomp;
using namespace cfdecomp::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Context {
  std::string cli;
  fs::path workdir;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

const std::vector<Functional>& all_functionals() {
  static const std::vector<Functional> f = {Functional::quantile(0.25), Functional::quantile(0.5),
                                            Functional::quantile(0.75), Functional::quantile(0.9),
                                            Functional::mean(), Functional::ratio(0.9, 0.5)};
  return f;
}

double telescoping_gap(const DecompositionRecord& r) {
  return std::abs(r.structural + r.composition + r.intensive + r.extensive - r.total);
}

// ---------------------------------------------------------------------------

Outcome telescoping(const Context&) {
  Outcome o;
  double worst = 0.0;
  std::size_t records = 0;
  const auto models = fit_spec(canonical_dgp(20000, 101));
  const auto grid = default_earnings_grid(models);
  for (const auto& s : decompose_series(models, 2000, all_functionals(), grid))
    for (const auto& r : s.records) {
      if (!r.defined) continue;
      worst = std::max(worst, telescoping_gap(r));
      ++records;
    }

  const auto spec = canonical_dgp(5000, 102);
  const auto basis = canonical_basis();
  const auto samples = simulate_samples(spec, basis);
  const auto options = fit_options(basis);
  const auto boot_grid = default_earnings_grid(fit_models(samples, options));
  BootstrapPlan plan;
  plan.replications = 20;
  plan.seed = 103;
  for (const auto& result : bootstrap_decomposition(samples, options, plan, 2000, all_functionals(), boot_grid))
    for (const auto& draw : result.draws)
      for (const auto& r : draw) {
        if (!r.defined) continue;
        worst = std::max(worst, telescoping_gap(r));
        ++records;
      }
  o.pass = worst < 1e-10 && records > 0;
  o.detail = "max gap " + fmt(worst) + " over " + std::to_string(records) + " records";
  return o;
}

Outcome observed_consistency(const Context&) {
  Outcome o;
  const auto spec = canonical_dgp(20000, 201);
  const auto basis = canonical_basis();
  const auto samples = simulate_samples(spec, basis);
  const auto models = fit_models(samples, fit_options(basis));
  const auto grid = default_earnings_grid(models);
  double worst = 0.0;
  for (const auto& s : samples) {
    const auto g = counterfactual_cdf(models, CounterfactualConfig::observed(s->year), grid);
    std::vector<double> y;
    for (const auto& ob : s->observations) y.push_back(ob.earnings);
    const auto emp = empirical_cdf(y, s->weights(), grid);
    worst = std::max(worst, sup_distance(g.values, emp));
  }
  o.pass = worst < 0.03;
  o.detail = "sup distance " + fmt(worst) + " (limit 0.03)";
  return o;
}

Outcome oracle_equivalence(const Context&) {
  Outcome o;
  const auto spec = canonical_dgp(20000, 301);
  const auto models = fit_spec(spec);
  const auto grid = default_earnings_grid(models);
  std::vector<CounterfactualConfig> configs;
  for (int q : {2000, 2010})
    for (int r : {2000, 2010})
      for (int s : {2000, 2010})
        for (int p : {2000, 2010}) configs.push_back({q, r, s, p});
  const auto fitted = counterfactual_cdfs(models, configs, grid);

  std::map<std::string, double> oracle_median;
  double worst_cdf = 0.0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const auto draws = oracle_earnings_draws(spec, configs[k], 1000000, 302);
    const auto truth = empirical_cdf(draws, {}, grid);
    worst_cdf = std::max(worst_cdf, sup_distance(fitted[k].values, truth));
    oracle_median[configs[k].label()] = empirical_quantile(draws, 0.5);
  }

  const auto est = decompose_functional(models, 2000, 2010, Functional::quantile(0.5), grid);
  const auto chain = decomposition_chain(2000, 2010);
  std::array<double, 5> q{};
  for (std::size_t k = 0; k < 5; ++k) q[k] = oracle_median.at(chain[k].label());
  const double base = q[4];
  const std::array<double, 4> truth = {(q[0] - q[1]) / base, (q[1] - q[2]) / base, (q[2] - q[3]) / base,
                                       (q[3] - q[4]) / base};
  const std::array<double, 4> fitted_terms = {est.structural, est.composition, est.intensive, est.extensive};
  double worst_term = 0.0;
  for (std::size_t k = 0; k < 4; ++k) worst_term = std::max(worst_term, std::abs(fitted_terms[k] - truth[k]));
  o.pass = worst_cdf < 0.05 && worst_term < 0.03;
  o.detail = "16 configs sup " + fmt(worst_cdf) + " (limit 0.05), median terms max diff " + fmt(worst_term) +
             " (limit 0.03)";
  return o;
}

Outcome single_channel(const Context&) {
  Outcome o;
  const std::array<std::pair<Channel, const char*>, 4> channels = {{{Channel::Wage, "wage"},
                                                                    {Channel::Covariates, "covariates"},
                                                                    {Channel::Hours, "hours"},
                                                                    {Channel::Participation, "participation"}}};
  std::ostringstream detail;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto models = fit_spec(single_channel_dgp(channels[c].first, 20000, 401));
    const auto grid = default_earnings_grid(models);
    const auto r = decompose_functional(models, 2000, 2010, Functional::quantile(0.5), grid);
    const std::array<double, 4> terms = {r.structural, r.composition, r.intensive, r.extensive};
    const double share = terms[c] / r.total;
    double others = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      if (k != c) others = std::max(others, std::abs(terms[k]));
    const bool ok = share >= 0.9 && others < 0.02;
    o.pass = o.pass && ok;
    detail << channels[c].second << " share " << fmt(share, 3) << " others " << fmt(others, 3) << "; ";
  }
  // Nested expansion: every base-year worker also works under the new rule.
  auto spec = single_channel_dgp(Channel::Participation, 20000, 402, 0.0);
  spec.years[0].hours.min_hours = 1200.0;
  const auto models = fit_spec(spec);
  const auto r = decompose_functional(models, 2000, 2010, Functional::quantile(0.5), default_earnings_grid(models));
  o.pass = o.pass && r.extensive >= -0.01;
  detail << "nested expansion extensive " << fmt(r.extensive, 3);
  o.detail = detail.str();
  return o;
}

Outcome control_function_validity(const Context&) {
  Outcome o;
  double worst_cell = 0.0;
  {
    auto spec = canonical_dgp(20000, 501);
    spec.years.resize(1);
    const auto basis = canonical_basis();
    const auto samples = simulate_samples(spec, basis);
    auto options = fit_options(basis);
    options.control_function = ControlFunctionMode::Point;
    const auto m = fit_year_model(samples[0], options);
    std::map<std::pair<int, int>, std::vector<double>> cells;
    const auto& obs = samples[0]->observations;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs[i].works()) cells[{int(obs[i].x[0]), int(obs[i].z[0])}].push_back(m.cf.v_hat[i]);
    for (const auto& [cell, v] : cells) {
      const double cut = spec.years[0].hours.participation_cutoff(cell.first, cell.second);
      worst_cell = std::max(worst_cell, ks_distance(v, [&](double t) {
                              return std::clamp((t - cut) / (1.0 - cut), 0.0, 1.0);
                            }));
    }
  }
  double worst_atom = 0.0;
  {
    auto spec = canonical_dgp(20000, 502);
    spec.years.resize(1);
    spec.years[0].bunching = BunchingRule{2080.0, 0.40};
    const auto basis = canonical_basis();
    const auto samples = simulate_samples(spec, basis);
    const auto m = fit_year_model(samples[0], fit_options(basis, 503));
    std::map<std::pair<int, int>, std::vector<double>> atoms;
    const auto& obs = samples[0]->observations;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs[i].hours == 2080.0)
        atoms[{int(obs[i].x[0]), int(obs[i].z[0])}].push_back((m.cf.v_hat[i] - m.cf.v_lower[i]) /
                                                              (m.cf.v_upper[i] - m.cf.v_lower[i]));
    for (const auto& [cell, v] : atoms)
      worst_atom = std::max(worst_atom, ks_distance(v, [](double t) { return std::clamp(t, 0.0, 1.0); }));
  }
  o.pass = worst_cell < 0.05 && worst_atom < 0.05;
  o.detail = "per-cell KS " + fmt(worst_cell) + ", atom uniformity KS " + fmt(worst_atom) + " (limit 0.05)";
  return o;
}

double loglik(const std::vector<double>& x, const std::vector<double>& s, double a, double b) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = a + b * x[i];
    ll += s[i] * eta - log1p_exp(eta);
  }
  return ll;
}

Outcome distribution_regression(const Context&) {
  Outcome o;
  // Intercept only.
  double worst_logit = 0.0;
  {
    Stream st(601);
    std::vector<double> y;
    for (int i = 0; i < 2000; ++i) y.push_back(std::round(100.0 * st.uniform()));
    const auto grid = threshold_grid(y, 400, false);
    const auto fit = fit_dr(Eigen::MatrixXd::Ones(Eigen::Index(y.size()), 1), y, std::vector<double>(y.size(), 1.0),
                            grid, {}, OutcomeKind::Hours);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (fit.status[k] != ColumnStatus::Interior) continue;
      const double p = double(std::count_if(y.begin(), y.end(), [&](double v) { return v <= grid[k]; })) / y.size();
      worst_logit = std::max(worst_logit, std::abs(fit.coefficients(0, Eigen::Index(k)) - std::log(p / (1.0 - p))));
    }
  }
  // Small samples against a likelihood grid search.
  double worst_grid = 0.0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    Stream st(stream_id({602, rep}));
    const std::size_t n = 40;
    std::vector<double> x, y, s;
    Eigen::MatrixXd design(Eigen::Index(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(st.uniform() < 0.5 ? 0.0 : 1.0);
      y.push_back(std::floor(10.0 * st.uniform() + 2.0 * x.back()));
      design.row(Eigen::Index(i)) << 1.0, x.back();
    }
    const double h = 5.0;
    for (double v : y) s.push_back(v <= h ? 1.0 : 0.0);
    const auto fit = fit_dr(design, y, std::vector<double>(n, 1.0), {h}, {}, OutcomeKind::Hours);
    if (fit.status[0] != ColumnStatus::Interior) continue;
    double best = -HUGE_VAL, ba = 0.0, bb = 0.0;
    for (int i = -200; i <= 200; ++i)
      for (int j = -200; j <= 200; ++j)
        if (const double ll = loglik(x, s, 0.05 * i, 0.05 * j); ll > best) best = ll, ba = 0.05 * i, bb = 0.05 * j;
    const double ca = ba, cb = bb;
    for (int i = -100; i <= 100; ++i)
      for (int j = -100; j <= 100; ++j)
        if (const double ll = loglik(x, s, ca + 1e-3 * i, cb + 1e-3 * j); ll > best)
          best = ll, ba = ca + 1e-3 * i, bb = cb + 1e-3 * j;
    worst_grid = std::max({worst_grid, std::abs(fit.coefficients(0, 0) - ba), std::abs(fit.coefficients(1, 0) - bb)});
  }
  // Rearranged hours and wage fits on simulated data.
  std::size_t violations = 0, before = 0;
  {
    auto spec = canonical_dgp(20000, 603);
    spec.years.resize(1);
    const auto basis = BasisSpec::linear(1, 1);
    const auto samples = simulate_samples(spec, basis);
    const auto& sm = *samples[0];
    const auto h = sm.hours();
    const auto w = sm.weights();
    auto fit = fit_dr(sm.basis_p, h, w, default_hours_grid(h), {}, OutcomeKind::Hours);
    fit = rearrange(std::move(fit), sm.basis_p, &before);
    violations += count_monotonicity_violations(fit, sm.basis_p);
    const auto m = fit_year_model(samples[0], fit_options(basis));
    violations += count_monotonicity_violations(m.hours, sm.basis_p);
  }
  o.pass = worst_logit < 1e-8 && worst_grid < 1e-2 && violations == 0;
  o.detail = "logit gap " + fmt(worst_logit) + ", grid search gap " + fmt(worst_grid) + ", violations after " +
             std::to_string(violations) + " (before " + std::to_string(before) + ")";
  return o;
}

Outcome bootstrap_coverage(const Context&) {
  Outcome o;
  const int datasets = 100;
  const auto truth_spec = canonical_dgp(5000, 700);
  const auto chain = decomposition_chain(2000, 2010);
  const double q_tttt = empirical_quantile(oracle_earnings_draws(truth_spec, chain[0], 2000000, 701), 0.5);
  const double q_tttb = empirical_quantile(oracle_earnings_draws(truth_spec, chain[1], 2000000, 702), 0.5);
  const double q_bbbb = empirical_quantile(oracle_earnings_draws(truth_spec, chain[4], 2000000, 703), 0.5);
  const double truth = (q_tttt - q_tttb) / q_bbbb;

  const auto start = std::chrono::steady_clock::now();
  int covered = 0;
  for (int d = 0; d < datasets; ++d) {
    const auto spec = canonical_dgp(5000, stream_id({710, std::uint64_t(d)}));
    const auto basis = canonical_basis();
    const auto samples = simulate_samples(spec, basis);
    const auto options = fit_options(basis, stream_id({711, std::uint64_t(d)}));
    const auto grid = default_earnings_grid(fit_models(samples, options));
    BootstrapPlan plan;
    plan.replications = 200;
    plan.seed = stream_id({712, std::uint64_t(d)});
    const auto result = bootstrap_decomposition(samples, options, plan, 2000, Functional::quantile(0.5), grid);
    for (const auto& rec : result.records)
      if (rec.year == 2010 && rec.defined && rec.bands[1].lower <= truth && truth <= rec.bands[1].upper) ++covered;
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "  coverage dataset " << d + 1 << "/" << datasets << ": covered " << covered << ", "
              << fmt(elapsed, 5) << " s\n";
  }
  o.pass = covered >= 85 && covered <= 100;
  o.detail = "covered " + std::to_string(covered) + "/100 (truth " + fmt(truth) + ", range 85-100)";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const Context& ctx) {
  Outcome o;
  if (ctx.cli.empty()) return {false, "no --cli given"};
  const auto dir = ctx.workdir / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << nlohmann::json{{"dgp", {{"canonical", true}, {"n", 5000}}},
                                       {"base_year", 2000},
                                       {"seed", 801},
                                       {"bootstrap", {{"replications", 10}}}}
                            .dump(2);
  std::size_t compared = 0, differing = 0;
  for (const char* command : {"simulate", "fit", "decompose", "hours-decompose", "bootstrap", "diagnostics"}) {
    std::array<fs::path, 2> out;
    const std::array<int, 2> jobs = {1, 8};
    for (std::size_t k = 0; k < 2; ++k) {
      out[k] = dir / (std::string(command) + "_j" + std::to_string(jobs[k]));
      const std::string cmd = ctx.cli + " --config " + cfg.string() + " --jobs " + std::to_string(jobs[k]) +
                              " --output " + out[k].string() + " " + command + " 2> " + (out[k].string() + ".log");
      if (std::system(cmd.c_str()) != 0) return {false, std::string(command) + " failed at jobs " + std::to_string(jobs[k])};
    }
    for (const auto& e : fs::recursive_directory_iterator(out[0])) {
      if (!e.is_regular_file()) continue;
      const auto other = out[1] / fs::relative(e.path(), out[0]);
      ++compared;
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        ++differing;
        o.detail += "differs: " + fs::relative(e.path(), dir).string() + "; ";
      }
    }
  }
  o.pass = differing == 0 && compared > 0;
  o.detail += std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ";
  return o;
}

Outcome variance_identity(const Context&) {
  Outcome o;
  double worst = 0.0;
  std::size_t inputs = 0;
  for (std::uint64_t seed = 900; seed < 905; ++seed) {
    const auto data = simulate(canonical_dgp(5000, seed));
    for (const auto& obs : data) {
      const auto s = make_year_sample(2000, obs, BasisSpec::linear(1, 1));
      const auto v = variance_log_hours_decomposition(s);
      worst = std::max(worst, std::abs(v.var_log_hours - (v.var_log_weekly_hours + v.var_log_weeks + 2.0 * v.covariance)));
      ++inputs;
    }
  }
  // Arbitrary positive components with unequal weights.
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    Stream st(stream_id({910, rep}));
    std::vector<Observation> obs;
    for (int i = 0; i < 500; ++i) {
      const double hw = 1.0 + 79.0 * st.uniform(), wk = 1.0 + 51.0 * st.uniform();
      obs.push_back(make_observation(15.0 * hw * wk, hw * wk, {0.0}, {0.0}, 0.1 + st.uniform(), hw, wk));
    }
    const auto s = make_year_sample(2000, obs, BasisSpec::linear(1, 1));
    const auto v = variance_log_hours_decomposition(s);
    worst = std::max(worst, std::abs(v.var_log_hours - (v.var_log_weekly_hours + v.var_log_weeks + 2.0 * v.covariance)));
    ++inputs;
  }
  o.pass = worst < 1e-10;
  o.detail = "max gap " + fmt(worst) + " over " + std::to_string(inputs) + " inputs";
  return o;
}

struct Criterion {
  Outcome (*run)(const Context&);
  double limit_seconds;  // 0 = no stated limit
};

const std::map<int, Criterion>& criteria() {
  static const std::map<int, Criterion> c = {
      {1, {telescoping, 60.0}},
      {2, {observed_consistency, 120.0}},
      {3, {oracle_equivalence, 600.0}},
      {4, {single_channel, 0.0}},
      {5, {control_function_validity, 0.0}},
      {6, {distribution_regression, 0.0}},
      {7, {bootstrap_coverage, 3600.0}},
      {8, {determinism, 0.0}},
      {9, {variance_identity, 0.0}},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx;
  std::string workdir = (fs::temp_directory_path() / "cfdecomp_acceptance").string();
  std::vector<int> selected;
  int jobs = 1;
  app.add_option("--cli", ctx.cli, "Path to the cfdecomp executable");
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("criteria", selected, "Criterion numbers (default: all)");
  CLI11_PARSE(app, argc, argv);
  ctx.workdir = workdir;
  fs::create_directories(ctx.workdir);
  set_jobs(jobs);
  if (selected.empty())
    for (const auto& [k, c] : criteria()) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    const auto it = criteria().find(k);
    if (it == criteria().end()) {
      std::cout << "criterion " << k << ": FAIL unknown criterion\n";
      ++failures;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double limit = it->second.limit_seconds;
    std::string timing = "runtime " + fmt(seconds, 4) + " s";
    if (limit > 0.0) {
      timing += " (limit " + fmt(limit, 4) + " s)";
      if (seconds >= limit) o.pass = false;
    }
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "; " << timing
              << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
