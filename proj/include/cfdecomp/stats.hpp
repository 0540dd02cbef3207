#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace cfdecomp {

double normal_cdf(double x);
double normal_quantile(double p);

inline double logistic(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

/// log(1 + e^u) without overflow.
inline double log1p_exp(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double weighted_mean(std::span<const double> values, std::span<const double> weights);

/// Left-inverse empirical quantile inf{x : F_n(x) >= p}; weights optional.
double empirical_quantile(std::span<const double> values, double p,
                          std::span<const double> weights = {});

/// Order statistics at levels k/count, k = 1..count (distinct values only).
std::vector<double> quantile_grid(std::vector<double> values, std::size_t count);

/// Weighted empirical CDF of `values` evaluated at each point of `at`.
std::vector<double> empirical_cdf(std::span<const double> values,
                                  std::span<const double> weights,
                                  std::span<const double> at);

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance_two_sample(std::vector<double> a, std::vector<double> b);

/// Asymptotic Kolmogorov p-value for statistic d with effective size n.
double ks_pvalue(double d, double n);

}  // namespace cfdecomp
