#include "cfdecomp/error.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/stats.hpp"
#include "cfdecomp/synthetic.hpp"

#include "support.hpp"

#include <doctest.h>

#include <map>

using namespace cfdecomp;
using namespace cfdecomp::testing;

namespace {

YearDgp one_year(std::size_t n) {
  auto spec = canonical_dgp(n, 1);
  return spec.years[0];
}

double oracle_median(const DgpSpec& spec, const CounterfactualConfig& cfg) {
  return empirical_quantile(oracle_earnings_draws(spec, cfg, 1000000, 19), 0.5);
}

}  // namespace

TEST_SUITE("synthetic_dgp") {

TEST_CASE("validation") {
  DgpSpec spec = canonical_dgp(100, 1);
  CHECK_NOTHROW(spec.validate());
  auto flat = spec;
  flat.years[0].hours.s = 0.0;  // k constant in u
  CHECK_THROWS_AS(flat.validate(), Error);
  auto decreasing = spec;
  decreasing.years[0].hours.s = -100.0;
  CHECK_THROWS_AS(decreasing.validate(), Error);
  auto dup = spec;
  dup.years[1].year = dup.years[0].year;
  CHECK_THROWS_AS(dup.validate(), Error);
  auto probs = spec;
  probs.years[0].covariates.x_probs = {0.5, 0.4, 0.2};
  CHECK_THROWS_AS(probs.validate(), Error);
  CHECK_THROWS_AS(spec.year(1999), Error);
}

TEST_CASE("hours below zero everywhere censor everyone") {
  DgpSpec spec;
  spec.seed = 3;
  auto y = one_year(2000);
  y.hours.c = -1e7;
  spec.years = {y};
  const auto data = simulate(spec);
  for (const auto& o : data[0]) {
    CHECK(o.hours == 0.0);
    CHECK(o.earnings == 0.0);
  }
}

TEST_CASE("simulation is deterministic and respects the observation contract") {
  const auto spec = canonical_dgp(3000, 8);
  const auto a = simulate(spec);
  const auto b = simulate(spec);
  REQUIRE(a.size() == 2);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      CHECK(a[k][i].earnings == b[k][i].earnings);
      CHECK(a[k][i].x == b[k][i].x);
      if (a[k][i].works()) {
        CHECK(*a[k][i].weeks <= 52.0);
        CHECK(*a[k][i].weeks >= 1.0);
        CHECK(std::abs(*a[k][i].weekly_hours * *a[k][i].weeks / a[k][i].hours - 1.0) < 1e-12);
      }
    }
  auto other = spec;
  other.seed = 9;
  CHECK(simulate(other)[0][0].earnings != a[0][0].earnings);
}

TEST_CASE("without selection worker wages follow the population law") {
  auto y = one_year(20000);
  y.rho = 0.0;
  y.hours.c = 300.0;  // sizeable nonparticipation
  const auto rows = simulate_rows(y, 5);
  for (int x = 0; x < 3; ++x) {
    std::vector<double> workers, population;
    for (const auto& r : rows)
      if (r.obs.x[0] == x && r.obs.works()) workers.push_back(*r.obs.wage);
    Stream st(stream_id({77, std::uint64_t(x)}));
    for (std::size_t j = 0; j < workers.size(); ++j) population.push_back(y.wage(x, st.normal()));
    CHECK(ks_distance_two_sample(workers, population) < 0.03);
  }
}

TEST_CASE("bunching puts the configured share at the atom") {
  auto y = one_year(20000);
  y.bunching = BunchingRule{2080.0, 0.40};
  const auto rows = simulate_rows(y, 6);
  double workers = 0.0, atom = 0.0;
  for (const auto& r : rows)
    if (r.obs.works()) {
      workers += 1.0;
      if (r.obs.hours == 2080.0) atom += 1.0;
    }
  CHECK(std::abs(atom / workers - 0.40) < 0.02);
}

TEST_CASE("oracle for the observed configuration matches the simulated year") {
  const auto spec = canonical_dgp(20000, 10);
  const auto data = simulate(spec);
  std::vector<double> y;
  for (const auto& o : data[1]) y.push_back(o.earnings);
  const auto grid = quantile_grid(y, 200);
  const auto oracle = oracle_counterfactual_cdf(spec, CounterfactualConfig::observed(2010), grid, 200000);
  const auto emp = empirical_cdf(y, {}, grid);
  // Two-sample KS scale: 1.36 * sqrt(1/2e5 + 1/2e4) is about 0.01.
  CHECK(sup_distance(oracle.values, emp) < 0.02);
}

TEST_CASE("wage-only change has no oracle hours terms") {
  const auto spec = single_channel_dgp(Channel::Wage, 1000, 1);
  const double base = oracle_median(spec, CounterfactualConfig::observed(2000));
  const double intensive = oracle_median(spec, {2010, 2010, 2000, 2000}) - oracle_median(spec, {2010, 2000, 2000, 2000});
  const double extensive = oracle_median(spec, {2010, 2000, 2000, 2000}) - base;
  CHECK(std::abs(intensive / base) < 0.01);
  CHECK(std::abs(extensive / base) < 0.01);
}

TEST_CASE("oracle lasf") {
  auto y = one_year(10);
  SUBCASE("no dependence gives the unconditional mean") {
    y.rho = 0.0;
    const double mu = std::exp(y.wage.a + y.wage.b * 1.0 + 0.5 * y.wage.sigma * y.wage.sigma);
    CHECK(std::abs(oracle_lasf(y, 1.0, 0.3, 1000000) / mu - 1.0) < 0.005);
  }
  SUBCASE("linear gaussian closed form") {
    y.rho = 0.5;
    y.wage = WageLaw{WageLaw::Form::Linear, 0.0, 1.0, 1.0};
    const double draws = 200000;
    const double se = std::sqrt(1.0 - 0.25) / std::sqrt(draws);
    for (double v : {0.1, 0.5, 0.8})
      for (double x : {0.0, 2.0})
        CHECK(std::abs(oracle_lasf(y, x, v, std::size_t(draws)) - (x + 0.5 * normal_quantile(v))) < 3.0 * se);
  }
  SUBCASE("flipping rho mirrors v") {
    y.wage = WageLaw{WageLaw::Form::Linear, 0.0, 0.0, 1.0};
    auto flipped = y;
    flipped.rho = -y.rho;
    for (double v : {0.1, 0.3})
      CHECK(std::abs(oracle_lasf(y, 0.0, v, 10000) - oracle_lasf(flipped, 0.0, 1.0 - v, 10000)) < 1e-9);
  }
}

TEST_CASE("closed-form ldsf agrees with simulation") {
  const auto y = one_year(10);
  Stream st(4);
  const double v = 0.7, x = 2.0;
  const double shift = y.rho * normal_quantile(v), tail = std::sqrt(1.0 - y.rho * y.rho);
  std::vector<double> w;
  for (int j = 0; j < 200000; ++j) w.push_back(y.wage(x, shift + tail * st.normal()));
  for (double q : {0.1, 0.5, 0.9}) {
    const double wq = empirical_quantile(w, q);
    CHECK(std::abs(true_ldsf(y, wq, x, v) - q) < 0.005);
  }
}

TEST_CASE("rank is a control function for the wage shock") {
  // Among workers, E is independent of (X, Z) within bins of V = U.
  const auto y = one_year(40000);
  const auto rows = simulate_rows(y, 12);
  std::map<std::pair<int, int>, std::vector<double>> groups[2];
  for (const auto& r : rows) {
    if (!r.obs.works()) continue;
    const int bin = std::min(9, int(r.u * 10.0));
    groups[int(r.obs.z[0])][{int(r.obs.x[0]), bin}].push_back(r.e);
  }
  std::vector<double> pvalues;
  for (const auto& [cell, e0] : groups[0]) {
    const auto it = groups[1].find(cell);
    if (it == groups[1].end() || e0.size() < 200 || it->second.size() < 200) continue;
    const double n = double(e0.size()) * double(it->second.size()) / double(e0.size() + it->second.size());
    pvalues.push_back(ks_pvalue(ks_distance_two_sample(e0, it->second), n));
  }
  REQUIRE(pvalues.size() >= 20);
  // Cell p-values look uniform.
  const double d = ks_distance(pvalues, [](double p) { return std::clamp(p, 0.0, 1.0); });
  CHECK(ks_pvalue(d, double(pvalues.size())) > 0.01);
}

}  // TEST_SUITE
