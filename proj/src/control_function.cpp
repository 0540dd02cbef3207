#include "cfdecomp/control_function.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/text.hpp"

#include <algorithm>
#include <ostream>

namespace cfdecomp {

namespace {

/// CDF value at `value` from a threshold profile (left clamp 0, right clamp 1).
double cdf_from_profile(const std::vector<double>& thresholds, std::span<const double> prof,
                        double value) {
  if (value < thresholds.front()) return 0.0;
  if (value > thresholds.back()) return 1.0;
  const auto k = static_cast<std::size_t>(
      std::upper_bound(thresholds.begin(), thresholds.end(), value) - thresholds.begin() - 1);
  return prof[k];
}

double row_uniform(std::uint64_t seed, int year, std::size_t row) {
  Stream stream(stream_id({seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(year)),
                           static_cast<std::uint64_t>(row)}));
  return stream.uniform();
}

ControlFunctionSet allocate(std::size_t n, std::uint64_t seed) {
  ControlFunctionSet cf;
  cf.seed = seed;
  cf.v_hat.resize(n);
  cf.v_lower.resize(n);
  cf.v_upper.resize(n);
  cf.participation_threshold.resize(n);
  return cf;
}

void fill_nonworker(ControlFunctionSet& cf, std::size_t i, double f0, double u) {
  cf.v_lower[i] = 0.0;
  cf.v_upper[i] = f0;
  cf.v_hat[i] = u * f0;
}

}  // namespace

ControlFunctionSet point_control_function(const DrFit& hours_fit, const YearSample& sample,
                                          std::uint64_t seed) {
  const ProfileTable profiles(hours_fit, sample.basis_p);
  auto cf = allocate(sample.size(), seed);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto prof = profiles[i];
    const double f0 = cdf_from_profile(hours_fit.thresholds, prof, 0.0);
    cf.participation_threshold[i] = f0;
    const double h = sample.observations[i].hours;
    if (h > 0.0) {
      const double v = cdf_from_profile(hours_fit.thresholds, prof, h);
      cf.v_hat[i] = cf.v_lower[i] = cf.v_upper[i] = v;
    } else {
      fill_nonworker(cf, i, f0, row_uniform(seed, sample.year, i));
    }
  }
  return cf;
}

ControlFunctionSet interval_sample_control_function(const DrFit& hours_fit, const YearSample& sample,
                                                    std::uint64_t seed) {
  const ProfileTable profiles(hours_fit, sample.basis_p);
  const auto& t = hours_fit.thresholds;
  auto cf = allocate(sample.size(), seed);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto prof = profiles[i];
    const double f0 = cdf_from_profile(t, prof, 0.0);
    cf.participation_threshold[i] = f0;
    const double u = row_uniform(seed, sample.year, i);
    const double h = sample.observations[i].hours;
    if (!(h > 0.0)) {
      fill_nonworker(cf, i, f0, u);
      continue;
    }
    const auto k = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), h) - t.begin());
    double upper = 1.0;
    double lower = 0.0;
    if (k < t.size()) {
      upper = prof[k];
      lower = k == 0 ? 0.0 : prof[k - 1];
    } else {
      lower = prof.back();
    }
    // F(t_{k-1}) >= F(0) since t_{k-1} >= 0 whenever the grid starts at 0.
    lower = std::max(lower, f0);
    if (upper < lower)
      throw Error(ErrorKind::InvalidInput,
                  "control function interval inverted at row " + std::to_string(i) +
                      " (hours fit not rearranged?)");
    cf.v_lower[i] = lower;
    cf.v_upper[i] = upper;
    cf.v_hat[i] = lower + u * (upper - lower);
  }
  return cf;
}

void write_control_function(std::ostream& out, const ControlFunctionSet& cf) {
  out << "row,v_lower,v_hat,v_upper\n";
  for (std::size_t i = 0; i < cf.size(); ++i)
    out << i << ',' << format_double(cf.v_lower[i]) << ',' << format_double(cf.v_hat[i]) << ','
        << format_double(cf.v_upper[i]) << '\n';
}

}  // namespace cfdecomp
