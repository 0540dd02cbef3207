#include "cfdecomp/pipeline.hpp"

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/text.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cfdecomp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kDefaultFunctionals = {"q0.25", "q0.5", "q0.75", "q0.9", "mean", "ratio0.9_0.5"};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) config_error("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T value{};
  read(j, key, value);
  out = value;
}

json optional_json(const auto& value) { return value ? json(*value) : json(nullptr); }

std::string wage_form_name(WageLaw::Form f) { return f == WageLaw::Form::LogLinear ? "loglinear" : "linear"; }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t bootstrap_seed(const RunConfig& c) { return stream_id({c.seed, 0x626f6f74ULL}); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
  return in;
}

/// Records the run: flat JSON object, keys sorted, no timestamps.
void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<std::string>& outputs, const std::vector<std::string>& warnings) {
  json m = json::object();
  m["command"] = command;
  m["config_hash"] = config_hash(config);
  m["seed"] = config.seed;
  m["control_function_seed"] = config.seed;
  m["bootstrap_seed"] = bootstrap_seed(config);
  m["dgp_seed"] = config.dgp ? json(config.dgp->seed) : json(nullptr);
  m["group"] = config.group_label;
  m["base_year"] = config.base_year;
  m["outputs"] = [&] {
    std::string s;
    for (const auto& o : outputs) s += (s.empty() ? "" : ";") + o;
    return s;
  }();
  m["warnings"] = static_cast<std::uint64_t>(warnings.size());
  auto out = open_out(fs::path(config.output_dir) / "manifest.json");
  out << m.dump(2) << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (!input_path && !dgp) config_error("either input.path or dgp must be given");
  if (input_path && dgp) config_error("input.path and dgp are mutually exclusive");
  if (dgp) {
    dgp->validate();
    bool found = false;
    for (const auto& y : dgp->years) found |= y.year == base_year;
    if (!found) config_error("base year " + std::to_string(base_year) + " not among the DGP years");
  }
  if (hours_grid_points < 2 || wage_grid_points < 2 || earnings_grid_points < 2)
    config_error("grid sizes must be at least 2");
  if (trimming_cap && !(*trimming_cap > 0.0)) config_error("trimming cap must be positive");
  if (!(trimming_quantile > 0.0 && trimming_quantile <= 1.0)) config_error("trimming quantile must lie in (0, 1]");
  bootstrap.validate();
  if (functionals.empty()) config_error("at least one functional is required");
  if (jobs < 1) config_error("jobs must be at least 1");
  if (output_dir.empty()) config_error("output_dir must not be empty");
}

DgpSpec dgp_from_json(const json& j) {
  DgpSpec spec;
  if (j.contains("canonical")) {
    reject_unknown(j, {"canonical", "n", "seed"}, "dgp");
    std::size_t n = 20000;
    read(j, "n", n);
    spec = canonical_dgp(n, 1);
    read(j, "seed", spec.seed);
    return spec;
  }
  reject_unknown(j, {"seed", "years"}, "dgp");
  read(j, "seed", spec.seed);
  if (!j.contains("years") || !j.at("years").is_array()) config_error("dgp.years must be an array");
  for (const auto& jy : j.at("years")) {
    reject_unknown(jy, {"year", "n", "x_probs", "z_given_x", "wage", "hours", "rho", "bunching"}, "dgp year");
    YearDgp y;
    read(jy, "year", y.year);
    read(jy, "n", y.n);
    read(jy, "x_probs", y.covariates.x_probs);
    read(jy, "z_given_x", y.covariates.z_given_x);
    read(jy, "rho", y.rho);
    if (jy.contains("wage")) {
      const auto& w = jy.at("wage");
      reject_unknown(w, {"form", "a", "b", "sigma"}, "dgp wage");
      std::string form = wage_form_name(y.wage.form);
      read(w, "form", form);
      if (form == "loglinear") y.wage.form = WageLaw::Form::LogLinear;
      else if (form == "linear") y.wage.form = WageLaw::Form::Linear;
      else config_error("wage form must be 'loglinear' or 'linear'");
      read(w, "a", y.wage.a);
      read(w, "b", y.wage.b);
      read(w, "sigma", y.wage.sigma);
    }
    if (jy.contains("hours")) {
      const auto& h = jy.at("hours");
      reject_unknown(h, {"c", "d", "f", "s", "min_hours"}, "dgp hours");
      read(h, "c", y.hours.c);
      read(h, "d", y.hours.d);
      read(h, "f", y.hours.f);
      read(h, "s", y.hours.s);
      read(h, "min_hours", y.hours.min_hours);
    }
    if (jy.contains("bunching") && !jy.at("bunching").is_null()) {
      const auto& b = jy.at("bunching");
      reject_unknown(b, {"atom", "share"}, "dgp bunching");
      BunchingRule rule;
      read(b, "atom", rule.atom);
      read(b, "share", rule.share);
      y.bunching = rule;
    }
    spec.years.push_back(y);
  }
  return spec;
}

json to_json(const DgpSpec& spec) {
  json years = json::array();
  for (const auto& y : spec.years) {
    json jy;
    jy["year"] = y.year;
    jy["n"] = y.n;
    jy["x_probs"] = y.covariates.x_probs;
    jy["z_given_x"] = y.covariates.z_given_x;
    jy["rho"] = y.rho;
    jy["wage"] = {{"form", wage_form_name(y.wage.form)}, {"a", y.wage.a}, {"b", y.wage.b}, {"sigma", y.wage.sigma}};
    jy["hours"] = {{"c", y.hours.c}, {"d", y.hours.d}, {"f", y.hours.f}, {"s", y.hours.s},
                   {"min_hours", y.hours.min_hours}};
    jy["bunching"] = y.bunching ? json{{"atom", y.bunching->atom}, {"share", y.bunching->share}} : json(nullptr);
    years.push_back(jy);
  }
  return {{"seed", spec.seed}, {"years", years}};
}

RunConfig parse_config(const json& j) {
  reject_unknown(j, {"input", "dgp", "group_label", "base_year", "basis", "grids", "trimming",
                     "control_function", "bootstrap", "functionals", "emit_cdfs", "output_dir", "seed",
                     "strict_support", "jobs"},
                 "config");
  RunConfig c;
  if (j.contains("input") && !j.at("input").is_null()) {
    const auto& in = j.at("input");
    reject_unknown(in, {"path", "year_column", "earnings_column", "hours_column", "weekly_hours_column",
                        "weeks_column", "weight_column", "x_columns", "z_columns", "group_column", "group_value"},
                   "input");
    read_optional(in, "path", c.input_path);
    read(in, "year_column", c.schema.year_column);
    read(in, "earnings_column", c.schema.earnings_column);
    read(in, "hours_column", c.schema.hours_column);
    read_optional(in, "weekly_hours_column", c.schema.weekly_hours_column);
    read_optional(in, "weeks_column", c.schema.weeks_column);
    read_optional(in, "weight_column", c.schema.weight_column);
    read(in, "x_columns", c.schema.x_columns);
    read(in, "z_columns", c.schema.z_columns);
    read_optional(in, "group_column", c.schema.group_column);
    read_optional(in, "group_value", c.schema.group_value);
  }
  if (j.contains("dgp") && !j.at("dgp").is_null()) c.dgp = dgp_from_json(j.at("dgp"));
  read(j, "group_label", c.group_label);
  read(j, "base_year", c.base_year);
  if (j.contains("basis")) {
    const auto& b = j.at("basis");
    reject_unknown(b, {"p_terms", "m_terms"}, "basis");
    read(b, "p_terms", c.p_terms);
    read(b, "m_terms", c.m_terms);
  }
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    reject_unknown(g, {"hours_points", "wage_points", "earnings_points"}, "grids");
    read(g, "hours_points", c.hours_grid_points);
    read(g, "wage_points", c.wage_grid_points);
    read(g, "earnings_points", c.earnings_grid_points);
  }
  if (j.contains("trimming")) {
    const auto& t = j.at("trimming");
    reject_unknown(t, {"cap", "quantile"}, "trimming");
    read_optional(t, "cap", c.trimming_cap);
    read(t, "quantile", c.trimming_quantile);
  }
  std::string cf = "interval";
  read(j, "control_function", cf);
  if (cf == "interval") c.control_function = ControlFunctionMode::Interval;
  else if (cf == "point") c.control_function = ControlFunctionMode::Point;
  else config_error("control_function must be 'interval' or 'point'");
  if (j.contains("bootstrap")) {
    const auto& b = j.at("bootstrap");
    reject_unknown(b, {"replications", "weight_law", "level"}, "bootstrap");
    read(b, "replications", c.bootstrap.replications);
    read(b, "level", c.bootstrap.level);
    std::string law = "exponential";
    read(b, "weight_law", law);
    if (law == "exponential") c.bootstrap.law = WeightLaw::Exponential;
    else if (law == "unit") c.bootstrap.law = WeightLaw::Unit;
    else config_error("bootstrap.weight_law must be 'exponential' or 'unit'");
  }
  std::vector<std::string> functionals = kDefaultFunctionals;
  read(j, "functionals", functionals);
  for (const auto& f : functionals) c.functionals.push_back(Functional::parse(f));
  read(j, "emit_cdfs", c.emit_cdfs);
  read(j, "output_dir", c.output_dir);
  read(j, "seed", c.seed);
  read(j, "strict_support", c.strict_support);
  read(j, "jobs", c.jobs);
  if (c.dgp && !j.at("dgp").contains("seed")) c.dgp->seed = c.seed;
  c.bootstrap.seed = bootstrap_seed(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error("cannot parse '" + path + "': " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json j;
  j["input"] = {{"path", optional_json(c.input_path)},
                {"year_column", c.schema.year_column},
                {"earnings_column", c.schema.earnings_column},
                {"hours_column", c.schema.hours_column},
                {"weekly_hours_column", optional_json(c.schema.weekly_hours_column)},
                {"weeks_column", optional_json(c.schema.weeks_column)},
                {"weight_column", optional_json(c.schema.weight_column)},
                {"x_columns", c.schema.x_columns},
                {"z_columns", c.schema.z_columns},
                {"group_column", optional_json(c.schema.group_column)},
                {"group_value", optional_json(c.schema.group_value)}};
  j["dgp"] = c.dgp ? to_json(*c.dgp) : json(nullptr);
  j["group_label"] = c.group_label;
  j["base_year"] = c.base_year;
  j["basis"] = {{"p_terms", c.p_terms}, {"m_terms", c.m_terms}};
  j["grids"] = {{"hours_points", c.hours_grid_points},
                {"wage_points", c.wage_grid_points},
                {"earnings_points", c.earnings_grid_points}};
  j["trimming"] = {{"cap", optional_json(c.trimming_cap)}, {"quantile", c.trimming_quantile}};
  j["control_function"] = c.control_function == ControlFunctionMode::Interval ? "interval" : "point";
  j["bootstrap"] = {{"replications", c.bootstrap.replications},
                    {"weight_law", c.bootstrap.law == WeightLaw::Exponential ? "exponential" : "unit"},
                    {"level", c.bootstrap.level}};
  std::vector<std::string> functionals;
  for (const auto& f : c.functionals) functionals.push_back(f.label());
  j["functionals"] = functionals;
  j["emit_cdfs"] = c.emit_cdfs;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["strict_support"] = c.strict_support;
  j["jobs"] = c.jobs;
  return j;
}

json default_config_json() {
  RunConfig c = parse_config(json::object());
  c.dgp = canonical_dgp(20000, c.seed);
  c.base_year = c.dgp->years.front().year;
  return to_json(c);
}

std::string config_hash(const RunConfig& config) {
  // Thread count and output location do not affect results.
  json j = to_json(config);
  j.erase("jobs");
  j.erase("output_dir");
  std::uint64_t h = fnv1a(j.dump());
  if (config.input_path) {
    auto in = open_in(*config.input_path);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    h = fnv1a(bytes.str(), h);
  }
  return hex(h);
}

// ---------------------------------------------------------------------------
// Data

namespace {

BasisSpec resolve_basis(const RunConfig& config, const YearObservations& data, std::vector<std::string>& warnings) {
  const auto& first = data.begin()->second.front();
  const int nx = static_cast<int>(first.x.size());
  const int nz = static_cast<int>(first.z.size());
  std::vector<std::string> x_names = config.schema.x_columns, z_names = config.schema.z_columns;
  BasisSpec spec;
  if (!config.p_terms.empty()) {
    for (const auto& t : config.p_terms) spec.p_terms.push_back(parse_term(t, x_names, z_names));
  } else {
    // Saturate when every covariate is discrete with few levels.
    auto levels = [&](bool is_x, int k) {
      std::set<double> s;
      for (const auto& [year, obs] : data)
        for (const auto& o : obs) s.insert(is_x ? o.x[static_cast<std::size_t>(k)] : o.z[static_cast<std::size_t>(k)]);
      return std::vector<double>(s.begin(), s.end());
    };
    std::vector<std::vector<double>> xl, zl;
    bool discrete = true;
    for (int k = 0; k < nx; ++k) {
      xl.push_back(levels(true, k));
      discrete &= xl.back().size() <= 10;
    }
    for (int k = 0; k < nz; ++k) {
      zl.push_back(levels(false, k));
      discrete &= zl.back().size() <= 10;
    }
    spec = discrete ? BasisSpec::saturated(xl, zl) : BasisSpec::linear(nx, nz);
    if (!discrete) warnings.push_back("continuous covariates: using the linear basis");
  }
  if (!config.m_terms.empty()) {
    spec.m_terms.clear();
    for (const auto& t : config.m_terms) spec.m_terms.push_back(parse_term(t, x_names, z_names));
  } else if (spec.m_terms.empty()) {
    spec.m_terms = BasisSpec::default_m_terms(spec.p_terms);
  }
  spec.validate(nx, nz);
  return spec;
}

YearObservations observations_of(const RunConfig& config) {
  YearObservations data;
  if (config.input_path) {
    data = read_csv_file(*config.input_path, config.schema);
  } else {
    auto years = simulate(*config.dgp);
    for (std::size_t k = 0; k < years.size(); ++k) data[config.dgp->years[k].year] = std::move(years[k]);
  }
  if (data.empty()) throw Error(ErrorKind::InvalidInput, "no observations");
  if (!data.count(config.base_year))
    throw Error(ErrorKind::Config, "base year " + std::to_string(config.base_year) + " not among the input years");
  return data;
}

CsvSchema simulation_schema(const RunConfig& config, std::size_t nx, std::size_t nz) {
  CsvSchema s;
  s.weekly_hours_column = "weekly_hours";
  s.weeks_column = "weeks";
  for (std::size_t k = 0; k < nx; ++k) s.x_columns.push_back("x" + std::to_string(k));
  for (std::size_t k = 0; k < nz; ++k) s.z_columns.push_back("z" + std::to_string(k));
  (void)config;
  return s;
}

}  // namespace

RunData load_data(const RunConfig& config) {
  config.validate();
  auto data = observations_of(config);
  RunData run;
  const auto basis = resolve_basis(config, data, run.warnings);
  for (auto& [year, obs] : data) {
    const double cap = config.trimming_cap ? *config.trimming_cap : default_trimming_cap(obs, config.trimming_quantile);
    run.samples.push_back(
        std::make_shared<const YearSample>(make_year_sample(year, std::move(obs), basis, cap, &run.warnings)));
  }
  run.fit_options.basis = basis;
  run.fit_options.hours_grid_points = config.hours_grid_points;
  run.fit_options.structural.wage_grid_points = config.wage_grid_points;
  run.fit_options.control_function = config.control_function;
  run.fit_options.seed = config.seed;
  return run;
}

// ---------------------------------------------------------------------------
// Fit cache

namespace {

void write_cf_cache(std::ostream& out, const ControlFunctionSet& cf) {
  out << "seed," << cf.seed << '\n';
  for (std::size_t i = 0; i < cf.size(); ++i)
    out << format_double(cf.v_lower[i]) << ',' << format_double(cf.v_hat[i]) << ','
        << format_double(cf.v_upper[i]) << ',' << format_double(cf.participation_threshold[i]) << '\n';
}

ControlFunctionSet read_cf_cache(std::istream& in, std::size_t n) {
  ControlFunctionSet cf;
  std::string line;
  if (!std::getline(in, line) || line.rfind("seed,", 0) != 0) throw Error(ErrorKind::Io, "bad control function cache");
  cf.seed = std::stoull(line.substr(5));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorKind::Io, "truncated control function cache");
    const auto f = split_csv_line(line);
    double v[4];
    if (f.size() != 4) throw Error(ErrorKind::Io, "bad control function cache row");
    for (int k = 0; k < 4; ++k)
      if (!parse_double(f[static_cast<std::size_t>(k)], v[k])) throw Error(ErrorKind::Io, "bad control function cache value");
    cf.v_lower.push_back(v[0]);
    cf.v_hat.push_back(v[1]);
    cf.v_upper.push_back(v[2]);
    cf.participation_threshold.push_back(v[3]);
  }
  return cf;
}

fs::path cache_file(const std::string& dir, const char* what, int year) {
  return fs::path(dir) / (std::string(what) + "_" + std::to_string(year) + ".csv");
}

}  // namespace

void save_models(const std::string& dir, const ModelSet& models) {
  ensure_dir(dir);
  for (const auto& [year, m] : models) {
    {
      auto out = open_out(cache_file(dir, "hours", year));
      write_fit(out, m.hours);
    }
    {
      auto out = open_out(cache_file(dir, "ldsf", year));
      write_fit(out, m.ldsf.dr);
    }
    {
      auto out = open_out(cache_file(dir, "lasf", year));
      for (Eigen::Index j = 0; j < m.lasf.beta.size(); ++j) out << format_double(m.lasf.beta(j)) << '\n';
    }
    {
      auto out = open_out(cache_file(dir, "cf", year));
      write_cf_cache(out, m.cf);
    }
  }
  auto done = open_out(fs::path(dir) / "complete");
  done << "ok\n";
}

std::optional<ModelSet> load_models(const std::string& dir,
                                    const std::vector<std::shared_ptr<const YearSample>>& samples,
                                    const FitOptions& options) {
  if (!fs::exists(fs::path(dir) / "complete")) return std::nullopt;
  const auto m_terms = canonical_order(options.basis.m_terms.empty()
                                           ? BasisSpec::default_m_terms(options.basis.p_terms)
                                           : options.basis.m_terms);
  ModelSet models;
  for (const auto& s : samples) {
    YearModel m;
    m.year = s->year;
    m.sample = s;
    m.weights = s->weights();
    {
      auto in = open_in(cache_file(dir, "hours", s->year));
      m.hours = read_fit(in);
    }
    {
      auto in = open_in(cache_file(dir, "ldsf", s->year));
      m.ldsf.dr = read_fit(in);
      m.ldsf.m_terms = m_terms;
    }
    {
      auto in = open_in(cache_file(dir, "lasf", s->year));
      std::vector<double> beta;
      std::string line;
      while (std::getline(in, line)) {
        double v = 0.0;
        if (!parse_double(line, v)) throw Error(ErrorKind::Io, "bad LASF cache value");
        beta.push_back(v);
      }
      m.lasf.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
      m.lasf.m_terms = m_terms;
    }
    {
      auto in = open_in(cache_file(dir, "cf", s->year));
      m.cf = read_cf_cache(in, s->size());
    }
    if (m.hours.dimension() != static_cast<std::size_t>(s->basis_p.cols()) || m.ldsf.dr.dimension() != m_terms.size() ||
        static_cast<std::size_t>(m.lasf.beta.size()) != m_terms.size())
      throw Error(ErrorKind::Io, "fit cache does not match the configuration");
    m.hours_values = sorted_positive_values(s->hours());
    models.emplace(s->year, std::move(m));
  }
  return models;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

std::string functional_file(const char* prefix, const RunConfig& c, const Functional& f) {
  return std::string(prefix) + "_" + c.group_label + "_" + f.label() + ".csv";
}

void log_warnings(std::ostream& log, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) log << "warning: " << w << '\n';
}

ModelSet obtain_models(const RunConfig& config, RunData& data, std::ostream& log) {
  const std::string dir = (fs::path(config.output_dir) / "cache" / config_hash(config)).string();
  if (auto cached = load_models(dir, data.samples, data.fit_options)) {
    log << "cache hit: " << dir << '\n';
    return std::move(*cached);
  }
  log << "fitting " << data.samples.size() << " years\n";
  auto models = fit_models(data.samples, data.fit_options);
  for (const auto& [year, m] : models) {
    if (const auto nc = m.hours.nonconverged_count())
      data.warnings.push_back("year " + std::to_string(year) + ": " + std::to_string(nc) + " hours thresholds did not converge");
    if (const auto nc = m.ldsf.dr.nonconverged_count())
      data.warnings.push_back("year " + std::to_string(year) + ": " + std::to_string(nc) + " wage thresholds did not converge");
  }
  save_models(dir, models);
  log << "cache stored: " << dir << '\n';
  return models;
}

std::vector<CounterfactualConfig> chain_configs(const ModelSet& models, int base) {
  std::vector<CounterfactualConfig> out;
  std::set<std::string> seen;
  for (const auto& [t, m] : models)
    for (const auto& cfg : decomposition_chain(base, t))
      if (seen.insert(cfg.label()).second) out.push_back(cfg);
  return out;
}

void support_checks(const RunConfig& config, const ModelSet& models, RunData& data) {
  SupportOptions opts;
  opts.strict = config.strict_support;
  for (const auto& cfg : chain_configs(models, config.base_year)) {
    const auto report = check_support(models, cfg, opts);
    for (const auto& v : report.violations)
      data.warnings.push_back("support " + cfg.label() + " " + v.condition + " cell {" + v.cell +
                              "} mass " + format_double(v.mass));
  }
}

}  // namespace

void run_simulate(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (!config.dgp) config_error("simulate needs a dgp section");
  ensure_dir(config.output_dir);
  const auto years = simulate(*config.dgp);
  YearObservations data;
  for (std::size_t k = 0; k < years.size(); ++k) data[config.dgp->years[k].year] = years[k];
  const auto& first = years.front().front();
  const auto schema = simulation_schema(config, first.x.size(), first.z.size());
  const std::string name = "data_" + config.group_label + ".csv";
  auto out = open_out(fs::path(config.output_dir) / name);
  write_csv(out, data, schema);
  log << "wrote " << name << '\n';
  write_manifest(config, "simulate", {name}, {});
}

void run_fit(const RunConfig& config, std::ostream& log) {
  auto data = load_data(config);
  ensure_dir(config.output_dir);
  const auto models = obtain_models(config, data, log);
  const std::string name = "fit_" + config.group_label + ".csv";
  auto out = open_out(fs::path(config.output_dir) / name);
  out << "year,n,workers,trimming_cap,hours_thresholds,hours_nonconverged,wage_thresholds,wage_nonconverged\n";
  for (const auto& [year, m] : models) {
    std::size_t workers = 0;
    for (const auto& o : m.sample->observations) workers += o.works();
    out << year << ',' << m.sample->size() << ',' << workers << ',' << format_double(m.sample->trimming_cap) << ','
        << m.hours.size() << ',' << m.hours.nonconverged_count() << ',' << m.ldsf.dr.size() << ','
        << m.ldsf.dr.nonconverged_count() << '\n';
  }
  log_warnings(log, data.warnings);
  write_manifest(config, "fit", {name}, data.warnings);
}

void run_decompose(const RunConfig& config, std::ostream& log) {
  auto data = load_data(config);
  ensure_dir(config.output_dir);
  const auto models = obtain_models(config, data, log);
  support_checks(config, models, data);
  const auto grid = default_earnings_grid(models, config.earnings_grid_points);
  const auto series = decompose_series(models, config.base_year, config.functionals, grid);
  std::vector<std::string> outputs;
  for (const auto& s : series) {
    const auto name = functional_file("series", config, s.functional);
    auto out = open_out(fs::path(config.output_dir) / name);
    write_series(out, s);
    outputs.push_back(name);
    for (const auto& r : s.records)
      if (!r.defined) data.warnings.push_back(s.functional.label() + " year " + std::to_string(r.year) + ": " + r.reason);
  }
  if (config.emit_cdfs) {
    for (const auto& cfg : chain_configs(models, config.base_year)) {
      const auto name = "cdf_" + config.group_label + "_" + cfg.label() + ".csv";
      auto out = open_out(fs::path(config.output_dir) / name);
      write_cdf(out, counterfactual_cdf(models, cfg, grid));
      outputs.push_back(name);
    }
  }
  log_warnings(log, data.warnings);
  log << "wrote " << outputs.size() << " files\n";
  write_manifest(config, "decompose", outputs, data.warnings);
}

void run_hours_decompose(const RunConfig& config, std::ostream& log) {
  auto data = load_data(config);
  ensure_dir(config.output_dir);
  const auto models = obtain_models(config, data, log);
  std::vector<std::string> outputs;
  for (const auto& f : config.functionals) {
    const auto name = functional_file("hours_series", config, f);
    auto out = open_out(fs::path(config.output_dir) / name);
    out << "year,functional,defined,total,structure,composition,normalization\n";
    for (const auto& [t, m] : models) {
      out << t << ',' << f.label() << ',';
      try {
        const auto d = decompose_hours(models, config.base_year, t, f);
        out << "1," << format_double(d.total) << ',' << format_double(d.structure) << ','
            << format_double(d.composition) << ',' << format_double(d.normalization) << '\n';
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedFunctional && e.kind() != ErrorKind::GridTooShort) throw;
        out << "0,NA,NA,NA,NA\n";
        data.warnings.push_back("hours " + f.label() + " year " + std::to_string(t) + ": " + e.what());
      }
    }
    outputs.push_back(name);
  }
  log_warnings(log, data.warnings);
  write_manifest(config, "hours-decompose", outputs, data.warnings);
}

void run_bootstrap(const RunConfig& config, std::ostream& log) {
  auto data = load_data(config);
  ensure_dir(config.output_dir);
  std::vector<std::string> outputs;
  const auto point_models = obtain_models(config, data, log);
  const auto grid = default_earnings_grid(point_models, config.earnings_grid_points);
  log << "bootstrap: " << config.bootstrap.replications << " replications\n";
  const auto results =
      bootstrap_decomposition(data.samples, data.fit_options, config.bootstrap, config.base_year, config.functionals, grid);
  for (const auto& r : results) {
    const auto name = functional_file("bootstrap", config, r.functional);
    auto out = open_out(fs::path(config.output_dir) / name);
    write_bootstrap(out, r);
    outputs.push_back(name);
  }
  if (!results.empty() && results.front().warning)
    data.warnings.push_back(std::to_string(results.front().dropped) + " of " +
                            std::to_string(results.front().requested) + " replications dropped");
  log_warnings(log, data.warnings);
  write_manifest(config, "bootstrap", outputs, data.warnings);
}

void run_diagnostics(const RunConfig& config, std::ostream& log) {
  auto data = load_data(config);
  ensure_dir(config.output_dir);
  std::vector<std::string> outputs;
  {
    const std::string name = "diagnostics_" + config.group_label + ".csv";
    auto out = open_out(fs::path(config.output_dir) / name);
    out << "year,n,employment_rate,var_log_hours,var_log_weekly_hours,var_log_weeks,covariance\n";
    for (const auto& s : data.samples) {
      out << s->year << ',' << s->size() << ',' << format_double(employment_rate(*s));
      try {
        const auto v = variance_log_hours_decomposition(*s);
        out << ',' << format_double(v.var_log_hours) << ',' << format_double(v.var_log_weekly_hours) << ','
            << format_double(v.var_log_weeks) << ',' << format_double(v.covariance) << '\n';
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::MissingColumn && e.kind() != ErrorKind::InvalidInput) throw;
        out << ",NA,NA,NA,NA\n";
        data.warnings.push_back("year " + std::to_string(s->year) + ": " + e.what());
      }
    }
    outputs.push_back(name);
  }
  {
    const auto models = obtain_models(config, data, log);
    const std::string name = "support_" + config.group_label + ".csv";
    auto out = open_out(fs::path(config.output_dir) / name);
    out << "config,condition,cell,mass\n";
    SupportOptions opts;
    opts.strict = config.strict_support;
    for (const auto& cfg : chain_configs(models, config.base_year)) {
      const auto report = check_support(models, cfg, opts);
      for (const auto& v : report.violations)
        out << cfg.label() << ',' << v.condition << ",\"" << v.cell << "\"," << format_double(v.mass) << '\n';
    }
    outputs.push_back(name);
  }
  log_warnings(log, data.warnings);
  write_manifest(config, "diagnostics", outputs, data.warnings);
}

int run(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err) {
  try {
    set_jobs(config.jobs);
    if (command == "simulate") run_simulate(config, log);
    else if (command == "fit") run_fit(config, log);
    else if (command == "decompose") run_decompose(config, log);
    else if (command == "hours-decompose") run_hours_decompose(config, log);
    else if (command == "bootstrap") run_bootstrap(config, log);
    else if (command == "diagnostics") run_diagnostics(config, log);
    else throw Error(ErrorKind::Config, "unknown command '" + command + "'");
    return 0;
  } catch (const Error& e) {
    err << json{{"error", to_string(e.kind())}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return e.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"command", command}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
}

}  // namespace cfdecomp
