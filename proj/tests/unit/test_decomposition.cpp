#include "cfdecomp/decomposition.hpp"
#include "cfdecomp/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace cfdecomp;
using namespace cfdecomp::testing;

namespace {

const ModelSet& canonical_models() {
  static const ModelSet models = fit_spec(canonical_dgp(10000, 202));
  return models;
}

const std::vector<Functional>& all_functionals() {
  static const std::vector<Functional> f = {Functional::quantile(0.25), Functional::quantile(0.5),
                                            Functional::quantile(0.75), Functional::quantile(0.9),
                                            Functional::mean(), Functional::ratio(0.9, 0.5)};
  return f;
}

struct ChannelRun {
  ModelSet models;
  std::vector<double> grid;
};

ChannelRun run_channel(Channel ch) {
  ChannelRun r;
  r.models = fit_spec(single_channel_dgp(ch, 20000, 7));
  r.grid = default_earnings_grid(r.models);
  return r;
}

YearSample weeks_sample(const std::vector<std::array<double, 3>>& rows) {
  // rows: weekly hours, weeks, weight
  std::vector<Observation> obs;
  for (const auto& [hw, wk, w] : rows) {
    const double h = hw * wk;
    obs.push_back(make_observation(h > 0.0 ? 10.0 * h : 0.0, h, {0.0}, {0.0}, w, hw, wk));
  }
  BasisSpec spec;
  spec.p_terms = {Term{}};
  spec.m_terms = BasisSpec::default_m_terms(spec.p_terms);
  return make_year_sample(1990, std::move(obs), spec, 1e9);
}

}  // namespace

TEST_SUITE("decomposition") {

TEST_CASE("functional labels round trip") {
  for (const auto& f : all_functionals()) CHECK(Functional::parse(f.label()).label() == f.label());
  CHECK(Functional::parse("ratio0.9/0.5").label() == "ratio0.9_0.5");
  CHECK_THROWS_AS(Functional::parse("q1.5"), Error);
}

TEST_CASE("chain order") {
  const auto c = decomposition_chain(1976, 2010);
  CHECK(c[0] == CounterfactualConfig{2010, 2010, 2010, 2010});
  CHECK(c[1] == CounterfactualConfig{2010, 2010, 2010, 1976});
  CHECK(c[2] == CounterfactualConfig{2010, 2010, 1976, 1976});
  CHECK(c[3] == CounterfactualConfig{2010, 1976, 1976, 1976});
  CHECK(c[4] == CounterfactualConfig{1976, 1976, 1976, 1976});
}

TEST_CASE("base year decomposes to zeros") {
  const auto& models = canonical_models();
  const auto grid = default_earnings_grid(models);
  for (const auto& f : all_functionals()) {
    const auto r = f.kind == Functional::Kind::Ratio ? decompose_ratio(models, 2000, 2000, f.tau, f.tau_lo, grid)
                                                     : decompose_functional(models, 2000, 2000, f, grid);
    for (double t : r.terms()) CHECK(t == 0.0);
  }
}

TEST_CASE("terms telescope for every functional") {
  const auto& models = canonical_models();
  const auto grid = default_earnings_grid(models);
  const auto series = decompose_series(models, 2000, all_functionals(), grid);
  REQUIRE(series.size() == all_functionals().size());
  for (const auto& s : series)
    for (const auto& r : s.records) {
      REQUIRE(r.defined);
      CHECK(std::abs(r.structural + r.composition + r.intensive + r.extensive - r.total) < 1e-10);
      CHECK(std::abs(r.chain_values[0] / r.normalization - 1.0 - r.total) < 1e-10);
    }
  // The batch path agrees with one functional at a time.
  for (std::size_t f = 0; f < series.size(); ++f) {
    const auto single = decompose_series(models, 2000, all_functionals()[f], grid);
    for (std::size_t k = 0; k < single.records.size(); ++k)
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(std::abs(single.records[k].terms()[j] - series[f].records[k].terms()[j]) < 1e-12);
  }
}

TEST_CASE("wage-only change is structural") {
  const auto run = run_channel(Channel::Wage);
  const auto r = decompose_functional(run.models, 2000, 2010, Functional::quantile(0.5), run.grid);
  CHECK(r.total > 0.1);
  CHECK(std::abs(r.structural - r.total) < 0.02);
  CHECK(std::abs(r.composition) < 0.02);
  CHECK(std::abs(r.intensive) < 0.02);
  CHECK(std::abs(r.extensive) < 0.02);
}

TEST_CASE("participation contraction is extensive") {
  const auto run = run_channel(Channel::Participation);
  const auto r = decompose_functional(run.models, 2000, 2010, Functional::quantile(0.5), run.grid);
  CHECK(r.total < -0.05);
  CHECK(r.extensive / r.total >= 0.9);
  CHECK(std::abs(r.structural) < 0.02);
  CHECK(std::abs(r.composition) < 0.02);
  CHECK(std::abs(r.intensive) < 0.02);
}

TEST_CASE("extensive term is not negative under nested expansion") {
  // 2010 participation contains 2000's: the base year has the higher minimum.
  auto spec = single_channel_dgp(Channel::Participation, 20000, 9, 0.0);
  spec.years[0].hours.min_hours = 1200.0;
  const auto models = fit_spec(spec);
  const auto grid = default_earnings_grid(models);
  for (double tau : {0.5, 0.75, 0.9}) {
    const auto r = decompose_functional(models, 2000, 2010, Functional::quantile(tau), grid);
    CHECK(r.extensive >= -0.01);
  }
}

TEST_CASE("quantile inside the zero atom is undefined at base") {
  auto spec = canonical_dgp(6000, 3);
  for (auto& y : spec.years) y.hours.c = -200.0;  // participation about 0.4
  const auto models = fit_spec(spec);
  const auto grid = default_earnings_grid(models);
  try {
    decompose_functional(models, 2000, 2010, Functional::quantile(0.25), grid);
    FAIL("expected UndefinedFunctional");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedFunctional);
    CHECK(std::string(e.what()).find("undefined at base") != std::string::npos);
  }
  const auto series = decompose_series(models, 2000, Functional::quantile(0.25), grid);
  for (const auto& r : series.records) CHECK_FALSE(r.defined);
  const auto fine = decompose_series(models, 2000, Functional::quantile(0.9), grid);
  for (const auto& r : fine.records) CHECK(r.defined);
}

TEST_CASE("top-end wage growth raises the decile ratio through wages") {
  auto spec = canonical_dgp(20000, 12);
  spec.years[1] = spec.years[0];
  spec.years[1].year = 2010;
  spec.years[1].wage.sigma = 0.65;
  const auto models = fit_spec(spec);
  const auto grid = default_earnings_grid(models);
  const auto r = decompose_ratio(models, 2000, 2010, 0.9, 0.5, grid);
  CHECK(r.structural > 0.05);
  CHECK(std::abs(r.structural) > 2.0 * std::abs(r.composition));
  CHECK(std::abs(r.structural) > 2.0 * std::abs(r.intensive));
  CHECK(std::abs(r.structural) > 2.0 * std::abs(r.extensive));
  CHECK(std::abs(r.structural + r.composition + r.intensive + r.extensive - r.total) < 1e-10);
}

TEST_CASE("hours decomposition") {
  SUBCASE("identical years") {
    const auto& models = canonical_models();
    const auto r = decompose_hours(models, 2000, 2000, Functional::mean());
    CHECK(r.total == 0.0);
    CHECK(r.structure == 0.0);
    CHECK(r.composition == 0.0);
  }
  SUBCASE("covariate shift is composition") {
    const auto run = run_channel(Channel::Covariates);
    const auto r = decompose_hours(run.models, 2000, 2010, Functional::mean());
    CHECK(std::abs(r.composition - r.total) < 0.02);
    CHECK(std::abs(r.structure + r.composition - r.total) < 1e-12);
    const auto q = decompose_hours(run.models, 2000, 2010, Functional::quantile(0.5));
    CHECK(std::abs(q.structure + q.composition - q.total) < 1e-12);
  }
  SUBCASE("counterfactual hours cdf is proper") {
    const auto cdf = counterfactual_hours_cdf(canonical_models(), 2010, 2000);
    CHECK(std::is_sorted(cdf.values.begin(), cdf.values.end()));
    CHECK(cdf.values.front() >= 0.0);
    CHECK(cdf.values.back() <= 1.0);
  }
}

TEST_CASE("employment rate") {
  const auto s = weeks_sample({{{40, 52, 1}, {0, 0, 3}, {20, 26, 2}, {0, 0, 2}}});
  CHECK(employment_rate(s) == doctest::Approx(3.0 / 8.0).epsilon(1e-15));
}

TEST_CASE("log hours variance decomposition") {
  SUBCASE("constant weeks") {
    const auto s = weeks_sample({{{40, 52, 1}, {35, 52, 1}, {20, 52, 2}, {0, 0, 1}}});
    const auto v = variance_log_hours_decomposition(s);
    CHECK(v.var_log_weeks == 0.0);
    CHECK(v.covariance == 0.0);
    CHECK(std::abs(v.var_log_hours - v.var_log_weekly_hours) < 1e-15);
  }
  SUBCASE("hand computed moments") {
    // Four workers with unit weights.
    const auto s = weeks_sample({{{40, 52, 1}, {35, 50, 1}, {20, 26, 1}, {45, 52, 1}}});
    const auto v = variance_log_hours_decomposition(s);
    const double a[4] = {std::log(40.0), std::log(35.0), std::log(20.0), std::log(45.0)};
    const double b[4] = {std::log(52.0), std::log(50.0), std::log(26.0), std::log(52.0)};
    const double ma = (a[0] + a[1] + a[2] + a[3]) / 4.0, mb = (b[0] + b[1] + b[2] + b[3]) / 4.0;
    double va = 0.0, vb = 0.0, c = 0.0, vh = 0.0;
    for (int i = 0; i < 4; ++i) {
      va += (a[i] - ma) * (a[i] - ma) / 4.0;
      vb += (b[i] - mb) * (b[i] - mb) / 4.0;
      c += (a[i] - ma) * (b[i] - mb) / 4.0;
      const double h = std::log(std::exp(a[i]) * std::exp(b[i]));
      vh += (h - ma - mb) * (h - ma - mb) / 4.0;
    }
    CHECK(v.var_log_weekly_hours == doctest::Approx(va).epsilon(1e-12));
    CHECK(v.var_log_weeks == doctest::Approx(vb).epsilon(1e-12));
    CHECK(v.covariance == doctest::Approx(c).epsilon(1e-12));
    CHECK(v.var_log_hours == doctest::Approx(vh).epsilon(1e-12));
    CHECK(std::abs(v.var_log_hours - v.var_log_weekly_hours - v.var_log_weeks - 2.0 * v.covariance) < 1e-10);
  }
  SUBCASE("missing columns") {
    std::vector<Observation> obs = {make_observation(100.0, 10.0, {0.0}, {0.0})};
    BasisSpec spec;
    spec.p_terms = {Term{}};
    spec.m_terms = BasisSpec::default_m_terms(spec.p_terms);
    const auto s = make_year_sample(1990, obs, spec, 1e9);
    try {
      variance_log_hours_decomposition(s);
      FAIL("expected MissingColumn");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingColumn);
    }
  }
}

}  // TEST_SUITE
