#include "cfdecomp/stats.hpp"

#include "cfdecomp/error.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfdecomp {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -INFINITY;
    if (p == 1.0) return INFINITY;
    throw Error(ErrorKind::InvalidInput, "normal_quantile: probability outside [0,1]");
  }
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    num += w * values[i];
    den += w;
  }
  return num / den;
}

double empirical_quantile(std::span<const double> values, double p,
                          std::span<const double> weights) {
  if (values.empty()) throw Error(ErrorKind::InvalidInput, "empirical_quantile: empty sample");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  if (weights.empty()) {
    const auto n = static_cast<double>(values.size());
    auto k = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, values.size());
    return values[order[k - 1]];
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = p * total - 1e-12 * total;
  double cum = 0.0;
  for (auto i : order) {
    cum += weights[i];
    if (cum >= target) return values[i];
  }
  return values[order.back()];
}

std::vector<double> quantile_grid(std::vector<double> values, std::size_t count) {
  std::vector<double> grid;
  if (values.empty() || count == 0) return grid;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  grid.reserve(count);
  for (std::size_t k = 1; k <= count; ++k) {
    // ceil(k n / count) with integer arithmetic
    const std::size_t idx = (k * n + count - 1) / count;
    grid.push_back(values[std::clamp<std::size_t>(idx, 1, n) - 1]);
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<double> empirical_cdf(std::span<const double> values,
                                  std::span<const double> weights,
                                  std::span<const double> at) {
  std::vector<std::pair<double, double>> pts(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    pts[i] = {values[i], weights.empty() ? 1.0 : weights[i]};
  std::sort(pts.begin(), pts.end());
  std::vector<double> cum(pts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) cum[i] = (total += pts[i].second);
  std::vector<double> out(at.size());
  for (std::size_t k = 0; k < at.size(); ++k) {
    auto it = std::upper_bound(pts.begin(), pts.end(), at[k],
                               [](double y, const auto& pt) { return y < pt.first; });
    const auto idx = static_cast<std::size_t>(it - pts.begin());
    out[k] = idx == 0 ? 0.0 : cum[idx - 1] / total;
  }
  return out;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_distance_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_pvalue(double d, double n) {
  const double sq = std::sqrt(n);
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace cfdecomp
