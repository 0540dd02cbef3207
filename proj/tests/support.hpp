#pragma once

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/synthetic.hpp"

#include <memory>
#include <vector>

namespace cfdecomp::testing {

/// Saturated design for the canonical covariates x in {0,1,2}, z in {0,1}.
inline BasisSpec canonical_basis(int x_levels = 3) {
  std::vector<double> xs;
  for (int k = 0; k < x_levels; ++k) xs.push_back(k);
  return BasisSpec::saturated({xs}, {{0.0, 1.0}});
}

inline std::vector<std::shared_ptr<const YearSample>> simulate_samples(const DgpSpec& spec,
                                                                       const BasisSpec& basis) {
  const auto data = simulate(spec);
  std::vector<std::shared_ptr<const YearSample>> out;
  for (std::size_t k = 0; k < data.size(); ++k)
    out.push_back(std::make_shared<const YearSample>(make_year_sample(spec.years[k].year, data[k], basis)));
  return out;
}

inline FitOptions fit_options(const BasisSpec& basis, std::uint64_t seed = 5) {
  FitOptions o;
  o.basis = basis;
  o.seed = seed;
  return o;
}

/// Simulates and fits every year of `spec` with the saturated design.
inline ModelSet fit_spec(const DgpSpec& spec, std::uint64_t seed = 5) {
  const auto basis = canonical_basis(static_cast<int>(spec.years.front().covariates.x_probs.size()));
  return fit_models(simulate_samples(spec, basis), fit_options(basis, seed));
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace cfdecomp::testing

namespace cfdecomp::testing {

enum class Channel { Wage, Covariates, Hours, Participation };

/// Two-year design where exactly one channel differs between 2000 and 2010.
/// The hours variant rescales the latent hours index, which keeps every
/// participation cutoff fixed; the participation variant raises the minimum
/// hours in 2010, which keeps continuing workers' hours fixed.
inline DgpSpec single_channel_dgp(Channel channel, std::size_t n, std::uint64_t seed, double min_hours = 1600.0) {
  DgpSpec spec = canonical_dgp(n, seed);
  spec.years[1] = spec.years[0];
  spec.years[1].year = 2010;
  auto& t = spec.years[1];
  switch (channel) {
    case Channel::Wage:
      t.wage.a += 0.2;
      t.wage.b += 0.05;
      break;
    case Channel::Covariates:
      t.covariates.x_probs = {0.15, 0.35, 0.5};
      t.covariates.z_given_x = {0.3, 0.5, 0.7};
      break;
    case Channel::Hours:
      t.hours.c *= 1.2;
      t.hours.d *= 1.2;
      t.hours.f *= 1.2;
      t.hours.s *= 1.2;
      break;
    case Channel::Participation:
      t.hours.min_hours = min_hours;
      break;
  }
  return spec;
}

}  // namespace cfdecomp::testing
