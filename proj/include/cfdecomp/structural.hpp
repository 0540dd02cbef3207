#pragma once

#include "cfdecomp/basis.hpp"
#include "cfdecomp/control_function.hpp"
#include "cfdecomp/dist_reg.hpp"

#include <span>
#include <vector>

namespace cfdecomp {

/// Local distribution structural function G(w, x, v) of hourly wages.
struct LdsfFit {
  DrFit dr;
  std::vector<Term> m_terms;
};

/// Local average structural function mu(x, v) = m(x, v)' beta.
struct LasfFit {
  Eigen::VectorXd beta;
  std::vector<Term> m_terms;
};

struct StructuralOptions {
  std::size_t wage_grid_points = 300;
  DrOptions dr;
};

/// 1{0 < H_i <= trimming cap}.
std::vector<std::uint8_t> trimming_mask(const YearSample& sample);

/// Wage threshold grid: `count` order statistics of the trimmed wages.
std::vector<double> wage_grid(const YearSample& sample, std::size_t count);

/// Distribution regression of wages on m(x, v_hat) over the trimmed workers,
/// rearranged. Requires at least d_m + 10 trimmed workers.
LdsfFit fit_ldsf(const YearSample& sample, const ControlFunctionSet& cf,
                 const std::vector<Term>& m_terms, std::span<const double> weights,
                 const StructuralOptions& options = {});

/// Weighted least squares of wages on m(x, v_hat) over the trimmed workers.
/// Throws Error(RankDeficient) naming the collinear columns.
LasfFit fit_lasf(const YearSample& sample, const ControlFunctionSet& cf,
                 const std::vector<Term>& m_terms, std::span<const double> weights);

double eval_ldsf(const LdsfFit& fit, double w, std::span<const double> x, double v);
double eval_lasf(const LasfFit& fit, std::span<const double> x, double v);

}  // namespace cfdecomp
