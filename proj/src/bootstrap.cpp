#include "cfdecomp/bootstrap.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/stats.hpp"
#include "cfdecomp/text.hpp"

#include <optional>
#include <ostream>

namespace cfdecomp {

void BootstrapPlan::validate() const {
  if (replications < 2) throw Error(ErrorKind::Config, "bootstrap needs at least 2 replications");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Config, "bootstrap level must lie in (0, 1)");
}

std::vector<double> bootstrap_weights(const YearSample& sample, WeightLaw law, std::uint64_t replication_seed) {
  std::vector<double> w(sample.size());
  const auto year = static_cast<std::uint64_t>(static_cast<std::int64_t>(sample.year));
  for (std::size_t i = 0; i < w.size(); ++i) {
    double xi = 1.0;
    if (law == WeightLaw::Exponential) {
      Stream st(stream_id({replication_seed, year, i}));
      xi = st.exponential();
    }
    w[i] = sample.observations[i].weight * xi;
  }
  return w;
}

std::uint64_t replication_seed(std::uint64_t master, int replication) {
  return stream_id({master, 0x626f6f74ULL, static_cast<std::uint64_t>(replication)});
}

std::vector<BootstrapResult> bootstrap_decomposition(
    const std::vector<std::shared_ptr<const YearSample>>& samples, const FitOptions& options,
    const BootstrapPlan& plan, int base, const std::vector<Functional>& functionals,
    std::span<const double> y_grid) {
  plan.validate();
  const auto models = fit_models(samples, options);
  const auto point = decompose_series(models, base, functionals, y_grid);

  const auto reps = static_cast<std::size_t>(plan.replications);
  std::vector<std::optional<std::vector<DecompositionSeries>>> draws(reps);
  parallel_for(reps, [&](std::size_t b) {
    const auto seed = replication_seed(plan.seed, static_cast<int>(b));
    std::vector<std::vector<double>> weights;
    for (const auto& s : samples) weights.push_back(bootstrap_weights(*s, plan.law, seed));
    auto rep_options = options;
    rep_options.seed = mix64(seed);
    try {
      const auto rep_models = fit_models(samples, rep_options, weights);
      draws[b] = decompose_series(rep_models, base, functionals, y_grid);
    } catch (const Error&) {
      draws[b].reset();
    }
  });

  int dropped = 0;
  for (const auto& d : draws)
    if (!d) ++dropped;
  const double alpha = 1.0 - plan.level;

  std::vector<BootstrapResult> results;
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    BootstrapResult r;
    r.functional = functionals[f];
    r.base_year = base;
    r.point = point[f];
    r.requested = plan.replications;
    r.dropped = dropped;
    r.warning = dropped > 0.05 * plan.replications;
    for (const auto& d : draws)
      if (d) r.draws.push_back((*d)[f].records);
    const auto& records = r.point.records;
    for (std::size_t k = 0; k < records.size(); ++k) {
      BootstrapRecord rec;
      rec.year = records[k].year;
      rec.defined = records[k].defined;
      const auto point_terms = records[k].terms();
      for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> values;
        for (const auto& draw : r.draws)
          if (draw[k].defined) values.push_back(draw[k].terms()[j]);
        auto& band = rec.bands[j];
        band.point = point_terms[j];
        if (values.empty() || !rec.defined) {
          rec.defined = false;
          continue;
        }
        band.lower = empirical_quantile(values, alpha / 2.0);
        band.upper = empirical_quantile(values, 1.0 - alpha / 2.0);
      }
      r.records.push_back(rec);
    }
    results.push_back(std::move(r));
  }
  return results;
}

BootstrapResult bootstrap_decomposition(const std::vector<std::shared_ptr<const YearSample>>& samples,
                                        const FitOptions& options, const BootstrapPlan& plan, int base,
                                        const Functional& functional, std::span<const double> y_grid) {
  return std::move(
      bootstrap_decomposition(samples, options, plan, base, std::vector<Functional>{functional}, y_grid).front());
}

void write_bootstrap(std::ostream& out, const BootstrapResult& result) {
  out << "year,functional,defined";
  for (const char* t : kTermNames) out << ',' << t << "_lower," << t << ',' << t << "_upper";
  out << ",replications,dropped\n";
  const auto label = result.functional.label();
  for (const auto& r : result.records) {
    out << r.year << ',' << label << ',' << (r.defined ? 1 : 0);
    for (const auto& b : r.bands) {
      if (r.defined)
        out << ',' << format_double(b.lower) << ',' << format_double(b.point) << ',' << format_double(b.upper);
      else
        out << ",NA,NA,NA";
    }
    out << ',' << result.requested << ',' << result.dropped << '\n';
  }
}

}  // namespace cfdecomp
