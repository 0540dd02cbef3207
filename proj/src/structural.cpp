#include "cfdecomp/structural.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/stats.hpp"

#include <cmath>
#include <sstream>

namespace cfdecomp {

namespace {

std::vector<std::string> labels(const std::vector<Term>& terms) {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.label());
  return out;
}

std::vector<double> wages_or_zero(const YearSample& sample) {
  std::vector<double> w(sample.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = sample.observations[i].wage.value_or(0.0);
  return w;
}

std::size_t count_trimmed(const std::vector<std::uint8_t>& mask, std::span<const double> weights) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && weights[i] > 0.0) ++n;
  return n;
}

}  // namespace

std::vector<std::uint8_t> trimming_mask(const YearSample& sample) {
  std::vector<std::uint8_t> mask(sample.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double h = sample.observations[i].hours;
    mask[i] = h > 0.0 && h <= sample.trimming_cap ? 1 : 0;
  }
  return mask;
}

std::vector<double> wage_grid(const YearSample& sample, std::size_t count) {
  const auto mask = trimming_mask(sample);
  std::vector<double> wages;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) wages.push_back(*sample.observations[i].wage);
  return quantile_grid(std::move(wages), count);
}

LdsfFit fit_ldsf(const YearSample& sample, const ControlFunctionSet& cf,
                 const std::vector<Term>& m_terms, std::span<const double> weights,
                 const StructuralOptions& options) {
  const auto mask = trimming_mask(sample);
  if (count_trimmed(mask, weights) < m_terms.size() + 10)
    throw Error(ErrorKind::InvalidInput, "year " + std::to_string(sample.year) +
                                             ": too few trimmed workers for the wage equations");
  const auto design = build_wage_design(sample.observations, cf.v_hat, m_terms);
  const auto wages = wages_or_zero(sample);
  auto dr_options = options.dr;
  dr_options.column_labels = labels(m_terms);
  LdsfFit fit;
  fit.m_terms = m_terms;
  fit.dr = fit_dr(design, wages, weights, wage_grid(sample, options.wage_grid_points), mask,
                  OutcomeKind::Wage, dr_options);
  fit.dr.rearranged = true;
  return fit;
}

LasfFit fit_lasf(const YearSample& sample, const ControlFunctionSet& cf,
                 const std::vector<Term>& m_terms, std::span<const double> weights) {
  const auto mask = trimming_mask(sample);
  const std::size_t n_trim = count_trimmed(mask, weights);
  if (n_trim < m_terms.size() + 10)
    throw Error(ErrorKind::InvalidInput, "year " + std::to_string(sample.year) +
                                             ": too few trimmed workers for the wage equations");
  const auto d = static_cast<Eigen::Index>(m_terms.size());
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n_trim), d);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n_trim));
  std::vector<double> row(m_terms.size());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!mask[i] || !(weights[i] > 0.0)) continue;
    const auto& o = sample.observations[i];
    eval_terms(m_terms, o.x, o.z, cf.v_hat[i], row);
    const double sw = std::sqrt(weights[i]);
    for (Eigen::Index j = 0; j < d; ++j) a(r, j) = sw * row[static_cast<std::size_t>(j)];
    b(r) = sw * *o.wage;
    ++r;
  }
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    scale(j) = a.col(j).norm();
    if (scale(j) > 0.0) a.col(j) /= scale(j);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < d) {
    std::ostringstream os;
    os << "wage design is rank deficient (rank " << qr.rank() << " of " << d << "); collinear columns:";
    for (Eigen::Index k = qr.rank(); k < d; ++k)
      os << ' ' << m_terms[static_cast<std::size_t>(qr.colsPermutation().indices()(k))].label();
    throw Error(ErrorKind::RankDeficient, os.str());
  }
  LasfFit fit;
  fit.m_terms = m_terms;
  fit.beta = qr.solve(b);
  for (Eigen::Index j = 0; j < d; ++j)
    if (scale(j) > 0.0) fit.beta(j) /= scale(j);
  if (!fit.beta.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite LASF coefficients");
  return fit;
}

double eval_ldsf(const LdsfFit& fit, double w, std::span<const double> x, double v) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(fit.m_terms.size()));
  eval_terms(fit.m_terms, x, {}, v, std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
  return predict_cdf(fit.dr, m, w);
}

double eval_lasf(const LasfFit& fit, std::span<const double> x, double v) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(fit.m_terms.size()));
  eval_terms(fit.m_terms, x, {}, v, std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
  return m.dot(fit.beta);
}

}  // namespace cfdecomp
