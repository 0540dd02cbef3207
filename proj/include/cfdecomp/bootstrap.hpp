#pragma once

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/decomposition.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

namespace cfdecomp {

enum class WeightLaw { Exponential, Unit };

struct BootstrapPlan {
  int replications = 500;
  WeightLaw law = WeightLaw::Exponential;
  std::uint64_t seed = 0;
  double level = 0.95;

  /// Throws Error(Config) unless replications >= 2 and 0 < level < 1.
  void validate() const;
};

/// Multiplier weights for one replication of one year: w_i * xi_i with xi_i
/// drawn from the weight law on the stream (replication seed, year, row).
std::vector<double> bootstrap_weights(const YearSample& sample, WeightLaw law,
                                      std::uint64_t replication_seed);

/// Seed of replication b under a master seed.
std::uint64_t replication_seed(std::uint64_t master, int replication);

struct TermBand {
  double lower = 0.0;
  double point = 0.0;
  double upper = 0.0;
};

struct BootstrapRecord {
  int year = 0;
  bool defined = true;
  /// Bands for total, structural, composition, intensive, extensive.
  std::array<TermBand, 5> bands{};
};

struct BootstrapResult {
  Functional functional;
  int base_year = 0;
  DecompositionSeries point;
  std::vector<BootstrapRecord> records;
  /// draws[b][k]: replication b, year index k (same order as records).
  std::vector<std::vector<DecompositionRecord>> draws;
  int requested = 0;
  int dropped = 0;
  bool warning = false;  // more than 5% of replications dropped
};

/// Weighted bootstrap of a decomposition series. Every replication refits
/// Steps 1-3 on multiplier weights with a replication-specific
/// control-function seed, then decomposes every year. Replications that
/// throw are dropped and counted. Bands are the left-inverse empirical
/// (alpha/2, 1 - alpha/2) quantiles of the draws.
BootstrapResult bootstrap_decomposition(const std::vector<std::shared_ptr<const YearSample>>& samples,
                                        const FitOptions& options, const BootstrapPlan& plan,
                                        int base, const Functional& functional,
                                        std::span<const double> y_grid);

/// Several functionals from the same replications.
std::vector<BootstrapResult> bootstrap_decomposition(
    const std::vector<std::shared_ptr<const YearSample>>& samples, const FitOptions& options,
    const BootstrapPlan& plan, int base, const std::vector<Functional>& functionals,
    std::span<const double> y_grid);

void write_bootstrap(std::ostream& out, const BootstrapResult& result);

}  // namespace cfdecomp
