#pragma once

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace cfdecomp {

/// Wage function g(x, e) of the scalar covariate x = x_0.
struct WageLaw {
  enum class Form { LogLinear, Linear };
  Form form = Form::LogLinear;  // exp(a + b x + sigma e) or a + b x + sigma e
  double a = 2.5;
  double b = 0.3;
  double sigma = 0.5;

  double operator()(double x, double e) const;
};

/// Latent hours L(x, z, u) = c + d x + f z + s Phi^{-1}(u). Annual hours
/// k(x, z, u) = L when L > min_hours, else L - min_hours: workers are exactly
/// those with L > min_hours and their hours do not depend on min_hours.
struct HoursLaw {
  double c = 1500.0;
  double d = 150.0;
  double f = 600.0;
  double s = 800.0;
  double min_hours = 0.0;

  double latent(double x, double z, double u) const;
  double operator()(double x, double z, double u) const;
  /// Smallest rank that works: P(k(x, z, U) <= 0).
  double participation_cutoff(double x, double z) const;
};

/// Discrete covariates: x_0 in {0, .., K-1} with probabilities x_probs, and
/// z_0 in {0, 1} with P(z_0 = 1 | x_0 = k) = z_given_x[k].
struct CovariateLaw {
  std::vector<double> x_probs = {0.4, 0.35, 0.25};
  std::vector<double> z_given_x = {0.5, 0.5, 0.5};
};

/// Reported hours equal `atom` for every latent worker hours value in the
/// interval whose worker-population share is `share`, centered on the atom.
struct BunchingRule {
  double atom = 2080.0;
  double share = 0.40;
};

struct YearDgp {
  int year = 0;
  std::size_t n = 20000;
  CovariateLaw covariates;
  WageLaw wage;
  HoursLaw hours;
  /// Correlation of E and Phi^{-1}(U) (Gaussian copula, E ~ N(0, 1)).
  double rho = 0.4;
  std::optional<BunchingRule> bunching;
};

struct DgpSpec {
  std::vector<YearDgp> years;
  std::uint64_t seed = 1;

  const YearDgp& year(int label) const;
  /// Throws Error(Config) for an invalid law or when k is not strictly
  /// increasing in u on a probe grid.
  void validate() const;
};

/// Draws from one year's law, with the true rank U retained.
struct SimulatedRow {
  Observation obs;
  double u = 0.0;
  double e = 0.0;
};

/// Bunching interval (lo, hi] of latent hours for a year, when bunched.
std::optional<std::pair<double, double>> bunching_interval(const YearDgp& year);

/// Reported hours for latent rank u, after censoring and bunching.
double reported_hours(const YearDgp& year, double x, double z, double u,
                      const std::optional<std::pair<double, double>>& interval);

std::vector<SimulatedRow> simulate_rows(const YearDgp& year, std::uint64_t seed);

/// H = max{k(X, Z, U), 0}, W = g(X, E) for workers, Y = W H; weekly hours and
/// weeks are split as Wk = min(52, max(1, H / 40)), HW = H / Wk.
/// Deterministic in spec.seed.
std::vector<std::vector<Observation>> simulate(const DgpSpec& spec);

/// Canonical two-year test design: x in {0,1,2}, z in {0,1}, rho = 0.4.
DgpSpec canonical_dgp(std::size_t n, std::uint64_t seed);

/// Monte Carlo earnings draws under configuration <q,r,s,p>: (X, Z, U) from
/// year s, participation by year q's k > 0, hours from year r's k (with its
/// bunching), wage from year p's g with E | U = V under year p's copula.
std::vector<double> oracle_earnings_draws(const DgpSpec& spec, const CounterfactualConfig& cfg,
                                          std::size_t draws, std::uint64_t seed);

CounterfactualCdf oracle_counterfactual_cdf(const DgpSpec& spec, const CounterfactualConfig& cfg,
                                            std::span<const double> y_grid, std::size_t draws,
                                            std::uint64_t seed = 7);

/// Monte Carlo E[g(x, E) | U = v].
double oracle_lasf(const YearDgp& year, double x, double v, std::size_t draws,
                   std::uint64_t seed = 11);

/// Closed-form P(g(x, E) <= w | U = v).
double true_ldsf(const YearDgp& year, double w, double x, double v);

}  // namespace cfdecomp
