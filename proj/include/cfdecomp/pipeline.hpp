#pragma once

#include "cfdecomp/bootstrap.hpp"
#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/decomposition.hpp"
#include "cfdecomp/ingest.hpp"
#include "cfdecomp/synthetic.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cfdecomp {

/// Everything a run needs. Read from a JSON file; every field has a default
/// (see `default_config_json`).
struct RunConfig {
  std::optional<std::string> input_path;
  CsvSchema schema;
  std::optional<DgpSpec> dgp;
  std::string group_label = "all";
  int base_year = 0;
  std::vector<std::string> p_terms;  // empty = linear in x and z
  std::vector<std::string> m_terms;  // empty = default wage design
  std::size_t hours_grid_points = 400;
  std::size_t wage_grid_points = 300;
  std::size_t earnings_grid_points = 500;
  std::optional<double> trimming_cap;
  double trimming_quantile = 0.99;
  ControlFunctionMode control_function = ControlFunctionMode::Interval;
  BootstrapPlan bootstrap;
  std::vector<Functional> functionals;
  bool emit_cdfs = true;
  std::string output_dir = "out";
  std::uint64_t seed = 20240101;
  bool strict_support = false;
  int jobs = 1;

  /// Throws Error(Config) for invalid settings.
  void validate() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const DgpSpec& spec);
DgpSpec dgp_from_json(const nlohmann::json& j);

/// Fully defaulted configuration, as printed by --print-config.
nlohmann::json default_config_json();

/// FNV-1a hash of the canonical config text plus input file bytes, hex.
std::string config_hash(const RunConfig& config);

/// Loaded data for a run.
struct RunData {
  std::vector<std::shared_ptr<const YearSample>> samples;
  FitOptions fit_options;
  std::vector<std::string> warnings;
};

RunData load_data(const RunConfig& config);

/// Subcommands. Each writes its artifacts into config.output_dir and a
/// manifest.json run record; `log` receives progress lines.
void run_simulate(const RunConfig& config, std::ostream& log);
void run_fit(const RunConfig& config, std::ostream& log);
void run_decompose(const RunConfig& config, std::ostream& log);
void run_hours_decompose(const RunConfig& config, std::ostream& log);
void run_bootstrap(const RunConfig& config, std::ostream& log);
void run_diagnostics(const RunConfig& config, std::ostream& log);

/// Dispatches by subcommand name; returns the process exit status. Errors are
/// written to `err` as a one-line JSON record.
int run(const std::string& command, const RunConfig& config, std::ostream& log,
        std::ostream& err);

// Fit cache (used by fit / decompose / hours-decompose).
void save_models(const std::string& dir, const ModelSet& models);
/// Restores fitted components onto the given samples; nullopt when absent.
std::optional<ModelSet> load_models(const std::string& dir,
                                    const std::vector<std::shared_ptr<const YearSample>>& samples,
                                    const FitOptions& options);

}  // namespace cfdecomp
