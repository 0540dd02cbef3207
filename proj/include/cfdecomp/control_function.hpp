#pragma once

#include "cfdecomp/dist_reg.hpp"
#include "cfdecomp/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cfdecomp {

/// Estimated control function V for every observation of one year.
///
/// Workers carry an interval (v_lower, v_upper] of admissible ranks; the
/// sampled or point value v_hat lies inside it. Nonworkers have
/// v_upper = participation_threshold = F(0 | x, z).
struct ControlFunctionSet {
  std::vector<double> v_hat;
  std::vector<double> v_lower;
  std::vector<double> v_upper;
  std::vector<double> participation_threshold;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return v_hat.size(); }
};

/// V_i = F(H_i | x_i, z_i) for workers with degenerate intervals. Nonworkers
/// get the interval (0, F(0 | x_i, z_i)] and a uniform draw inside it.
ControlFunctionSet point_control_function(const DrFit& hours_fit, const YearSample& sample,
                                          std::uint64_t seed = 0);

/// Interval-sampled control function. A worker with hours H falls between the
/// grid thresholds t_{k-1} < H <= t_k; its rank is drawn uniformly on
/// (F(t_{k-1}), F(t_k)]. When the grid holds every observed hours value this is
/// the interval between the CDF at H and at the next value below it. Draws use
/// a per-observation stream keyed on (seed, year, row).
ControlFunctionSet interval_sample_control_function(const DrFit& hours_fit,
                                                    const YearSample& sample,
                                                    std::uint64_t seed);

/// Diagnostic dump: row, v_lower, v_hat, v_upper.
void write_control_function(std::ostream& out, const ControlFunctionSet& cf);

}  // namespace cfdecomp
