#include "cfdecomp/model.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/stats.hpp"

#include <cmath>
#include <sstream>

namespace cfdecomp {

namespace {

bool close_rel(double a, double b) {
  return std::abs(a - b) <= kIdentityTolerance * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

void validate(const Observation& obs) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidInput, what); };
  if (!std::isfinite(obs.earnings) || obs.earnings < 0.0) fail("negative or non-finite earnings");
  if (!std::isfinite(obs.hours) || obs.hours < 0.0) fail("negative or non-finite hours");
  if (!(obs.weight > 0.0) || !std::isfinite(obs.weight)) fail("weight must be strictly positive");
  if (obs.hours == 0.0) {
    if (obs.wage) fail("wage present for a zero-hours record");
    if (obs.earnings != 0.0) fail("positive earnings with zero hours");
  } else {
    if (!obs.wage) fail("wage missing for a positive-hours record");
    if (!(*obs.wage > 0.0)) fail("wage must be positive");
    if (!close_rel(*obs.wage, obs.earnings / obs.hours)) fail("wage differs from earnings / hours");
  }
  if (obs.weekly_hours && obs.weeks) {
    if (*obs.weekly_hours < 0.0 || *obs.weeks < 0.0) fail("negative weekly hours or weeks");
    if (!close_rel(obs.hours, *obs.weekly_hours * *obs.weeks))
      fail("hours differ from weekly_hours * weeks");
  }
  for (double v : obs.x)
    if (!std::isfinite(v)) fail("non-finite x covariate");
  for (double v : obs.z)
    if (!std::isfinite(v)) fail("non-finite z covariate");
}

Observation make_observation(double earnings, double hours, std::vector<double> x,
                             std::vector<double> z, double weight,
                             std::optional<double> weekly_hours, std::optional<double> weeks) {
  Observation obs;
  obs.earnings = earnings;
  obs.hours = hours;
  if (hours > 0.0) obs.wage = earnings / hours;
  obs.weekly_hours = weekly_hours;
  obs.weeks = weeks;
  obs.x = std::move(x);
  obs.z = std::move(z);
  obs.weight = weight;
  validate(obs);
  return obs;
}

std::vector<double> YearSample::hours() const {
  std::vector<double> h(observations.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = observations[i].hours;
  return h;
}

std::vector<double> YearSample::weights() const {
  std::vector<double> w(observations.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = observations[i].weight;
  return w;
}

double default_trimming_cap(const std::vector<Observation>& observations, double level) {
  std::vector<double> positive;
  for (const auto& o : observations)
    if (o.hours > 0.0) positive.push_back(o.hours);
  if (positive.empty())
    throw Error(ErrorKind::InvalidInput, "no observation with positive hours");
  return empirical_quantile(positive, level);
}

std::string CounterfactualConfig::label() const {
  std::ostringstream os;
  os << q << '_' << r << '_' << s << '_' << p;
  return os.str();
}

}  // namespace cfdecomp
