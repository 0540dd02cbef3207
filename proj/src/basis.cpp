#include "cfdecomp/basis.hpp"

#include "cfdecomp/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace cfdecomp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view s, std::string_view context) {
  double value = 0.0;
  const auto t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw Error(ErrorKind::Config, "basis term '" + std::string(context) + "': bad number '" + t + "'");
  return value;
}

/// Resolves "x3", "z0", "v" or a declared covariate name.
std::pair<Source, int> resolve_variable(const std::string& name, std::span<const std::string> x_names,
                                        std::span<const std::string> z_names,
                                        std::string_view context) {
  if (name == "v") return {Source::V, 0};
  for (std::size_t k = 0; k < x_names.size(); ++k)
    if (x_names[k] == name) return {Source::X, static_cast<int>(k)};
  for (std::size_t k = 0; k < z_names.size(); ++k)
    if (z_names[k] == name) return {Source::Z, static_cast<int>(k)};
  if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'z') &&
      std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    int idx = 0;
    std::from_chars(name.data() + 1, name.data() + name.size(), idx);
    return {name[0] == 'x' ? Source::X : Source::Z, idx};
  }
  throw Error(ErrorKind::Config,
              "basis term '" + std::string(context) + "': unknown variable '" + name + "'");
}

char source_char(Source s) {
  switch (s) {
    case Source::X: return 'x';
    case Source::Z: return 'z';
    case Source::V: return 'v';
  }
  return '?';
}

int category(const Term& t) {
  if (t.is_constant()) return 0;
  if (t.factors.size() > 1) return 5;
  const auto& f = t.factors.front();
  if (f.power > 1 && !f.level) return 4;
  switch (f.source) {
    case Source::X: return 1;
    case Source::Z: return 2;
    case Source::V: return 3;
  }
  return 5;
}

}  // namespace

double Factor::eval(std::span<const double> x, std::span<const double> z, double v) const {
  double base = 0.0;
  switch (source) {
    case Source::X: base = x[static_cast<std::size_t>(index)]; break;
    case Source::Z: base = z[static_cast<std::size_t>(index)]; break;
    case Source::V: base = v; break;
  }
  if (level) return base == *level ? 1.0 : 0.0;
  double out = base;
  for (int k = 1; k < power; ++k) out *= base;
  return out;
}

bool Term::uses_v() const noexcept {
  return std::any_of(factors.begin(), factors.end(),
                     [](const Factor& f) { return f.source == Source::V; });
}

double Term::eval(std::span<const double> x, std::span<const double> z, double v) const {
  double out = 1.0;
  for (const auto& f : factors) out *= f.eval(x, z, v);
  return out;
}

std::string Term::label() const {
  if (factors.empty()) return "1";
  std::ostringstream os;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& f = factors[i];
    if (i) os << '*';
    std::string var = f.source == Source::V ? "v" : std::string(1, source_char(f.source)) + std::to_string(f.index);
    if (f.level) {
      os << '[' << var << '=' << *f.level << ']';
    } else {
      os << var;
      if (f.power != 1) os << '^' << f.power;
    }
  }
  return os.str();
}

Term parse_term(std::string_view text, std::span<const std::string> x_names,
                std::span<const std::string> z_names) {
  Term term;
  const auto whole = trim(text);
  if (whole.empty()) throw Error(ErrorKind::Config, "empty basis term");
  if (whole == "1") return term;
  std::size_t start = 0;
  while (start <= whole.size()) {
    auto stop = whole.find('*', start);
    if (stop == std::string::npos) stop = whole.size();
    const auto piece = trim(std::string_view(whole).substr(start, stop - start));
    if (piece.empty()) throw Error(ErrorKind::Config, "basis term '" + whole + "': empty factor");
    Factor f;
    if (piece.front() == '[') {
      const auto eq = piece.find('=');
      if (piece.back() != ']' || eq == std::string::npos)
        throw Error(ErrorKind::Config, "basis term '" + whole + "': malformed indicator '" + piece + "'");
      const auto name = trim(std::string_view(piece).substr(1, eq - 1));
      std::tie(f.source, f.index) = resolve_variable(name, x_names, z_names, whole);
      f.level = parse_number(std::string_view(piece).substr(eq + 1, piece.size() - eq - 2), whole);
    } else {
      const auto caret = piece.find('^');
      const auto name = trim(std::string_view(piece).substr(0, caret));
      std::tie(f.source, f.index) = resolve_variable(name, x_names, z_names, whole);
      if (caret != std::string::npos) {
        const double p = parse_number(std::string_view(piece).substr(caret + 1), whole);
        if (p < 1 || p != std::floor(p))
          throw Error(ErrorKind::Config, "basis term '" + whole + "': power must be a positive integer");
        f.power = static_cast<int>(p);
      }
    }
    term.factors.push_back(f);
    if (stop == whole.size()) break;
    start = stop + 1;
  }
  return term;
}

BasisSpec BasisSpec::linear(int nx, int nz) {
  BasisSpec spec;
  spec.p_terms.push_back(Term{});
  for (int k = 0; k < nx; ++k) spec.p_terms.push_back(Term{{Factor{Source::X, k, 1, {}}}});
  for (int k = 0; k < nz; ++k) spec.p_terms.push_back(Term{{Factor{Source::Z, k, 1, {}}}});
  spec.m_terms = default_m_terms(spec.p_terms);
  return spec;
}

std::vector<Term> BasisSpec::default_m_terms(const std::vector<Term>& p_terms) {
  const Factor v{Source::V, 0, 1, {}};
  std::vector<Term> x_terms;
  for (const auto& t : p_terms) {
    if (t.is_constant()) continue;
    const bool x_only = std::all_of(t.factors.begin(), t.factors.end(),
                                    [](const Factor& f) { return f.source == Source::X; });
    if (x_only) x_terms.push_back(t);
  }
  std::vector<Term> m{Term{}};
  m.insert(m.end(), x_terms.begin(), x_terms.end());
  m.push_back(Term{{v}});
  m.push_back(Term{{Factor{Source::V, 0, 2, {}}}});
  for (const auto& t : x_terms) {
    Term vx{{v}};
    vx.factors.insert(vx.factors.end(), t.factors.begin(), t.factors.end());
    m.push_back(vx);
  }
  return canonical_order(std::move(m));
}

BasisSpec BasisSpec::saturated(const std::vector<std::vector<double>>& x_levels,
                               const std::vector<std::vector<double>>& z_levels) {
  // Every combination of (reference or one non-reference level) per variable.
  auto cells = [](const std::vector<std::pair<Source, std::vector<double>>>& vars) {
    std::vector<Term> out{Term{}};
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const auto& [source, levels] = vars[k];
      const int index = static_cast<int>(k);
      std::vector<Term> next;
      for (const auto& t : out) {
        next.push_back(t);
        for (std::size_t l = 1; l < levels.size(); ++l) {
          Term ext = t;
          ext.factors.push_back(Factor{source, index, 1, levels[l]});
          next.push_back(ext);
        }
      }
      out = std::move(next);
    }
    return out;
  };
  std::vector<std::pair<Source, std::vector<double>>> xvars;
  for (const auto& lv : x_levels) xvars.emplace_back(Source::X, lv);
  std::vector<std::pair<Source, std::vector<double>>> zvars;
  for (const auto& lv : z_levels) zvars.emplace_back(Source::Z, lv);

  const auto x_cells = cells(xvars);
  const auto z_cells = cells(zvars);

  BasisSpec spec;
  for (const auto& xc : x_cells) {
    for (const auto& zc : z_cells) {
      Term t = xc;
      t.factors.insert(t.factors.end(), zc.factors.begin(), zc.factors.end());
      spec.p_terms.push_back(t);
    }
  }
  spec.p_terms = canonical_order(std::move(spec.p_terms));

  const Factor v{Source::V, 0, 1, {}};
  spec.m_terms = x_cells;
  spec.m_terms.push_back(Term{{v}});
  spec.m_terms.push_back(Term{{Factor{Source::V, 0, 2, {}}}});
  for (const auto& xc : x_cells) {
    if (xc.is_constant()) continue;
    Term vx{{v}};
    vx.factors.insert(vx.factors.end(), xc.factors.begin(), xc.factors.end());
    spec.m_terms.push_back(vx);
  }
  spec.m_terms = canonical_order(std::move(spec.m_terms));
  return spec;
}

void BasisSpec::validate(int nx, int nz) const {
  auto check_indices = [&](const Term& t) {
    for (const auto& f : t.factors) {
      if (f.source == Source::X && (f.index < 0 || f.index >= nx))
        throw Error(ErrorKind::Config, "basis term '" + t.label() + "' references a missing x covariate");
      if (f.source == Source::Z && (f.index < 0 || f.index >= nz))
        throw Error(ErrorKind::Config, "basis term '" + t.label() + "' references a missing z covariate");
    }
  };
  if (std::none_of(p_terms.begin(), p_terms.end(), [](const Term& t) { return t.is_constant(); }))
    throw Error(ErrorKind::Config, "hours basis must contain the constant");
  for (const auto& t : p_terms) {
    check_indices(t);
    if (t.uses_v()) throw Error(ErrorKind::Config, "hours basis term '" + t.label() + "' uses v");
  }
  for (const auto& t : m_terms) {
    check_indices(t);
    for (const auto& f : t.factors)
      if (f.source == Source::Z)
        throw Error(ErrorKind::Config, "wage basis term '" + t.label() + "' uses an excluded z");
  }
  const Term v{{Factor{Source::V, 0, 1, {}}}};
  const Term v2{{Factor{Source::V, 0, 2, {}}}};
  auto has = [&](const Term& x) { return std::find(m_terms.begin(), m_terms.end(), x) != m_terms.end(); };
  if (!has(Term{}) || !has(v) || !has(v2))
    throw Error(ErrorKind::Config, "wage basis must contain 1, v and v^2");
}

std::vector<Term> canonical_order(std::vector<Term> terms) {
  std::stable_sort(terms.begin(), terms.end(),
                   [](const Term& a, const Term& b) { return category(a) < category(b); });
  return terms;
}

void eval_terms(const std::vector<Term>& terms, std::span<const double> x,
                std::span<const double> z, double v, std::span<double> out) {
  for (std::size_t j = 0; j < terms.size(); ++j) out[j] = terms[j].eval(x, z, v);
}

BasisResult build_basis(const std::vector<Observation>& observations,
                        const std::vector<Term>& p_terms) {
  const auto terms = canonical_order(p_terms);
  BasisResult result;
  const auto n = static_cast<Eigen::Index>(observations.size());
  const auto d = static_cast<Eigen::Index>(terms.size());
  result.matrix.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = observations[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      result.matrix(i, j) = terms[static_cast<std::size_t>(j)].eval(o.x, o.z, 0.0);
  }
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a + 1; b < d; ++b) {
      if (result.matrix.col(a) == result.matrix.col(b))
        result.warnings.push_back("basis column '" + terms[static_cast<std::size_t>(b)].label() +
                                  "' duplicates '" + terms[static_cast<std::size_t>(a)].label() +
                                  "' (rank deficient)");
    }
  }
  return result;
}

Eigen::MatrixXd build_wage_design(const std::vector<Observation>& observations,
                                  std::span<const double> v, const std::vector<Term>& m_terms) {
  const auto n = static_cast<Eigen::Index>(observations.size());
  const auto d = static_cast<Eigen::Index>(m_terms.size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = observations[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      m(i, j) = m_terms[static_cast<std::size_t>(j)].eval(o.x, o.z, v[static_cast<std::size_t>(i)]);
  }
  return m;
}

YearSample make_year_sample(int year, std::vector<Observation> observations,
                            const BasisSpec& spec, std::optional<double> cap,
                            std::vector<std::string>* warnings) {
  if (observations.empty())
    throw Error(ErrorKind::InvalidInput, "year " + std::to_string(year) + ": no observations");
  const auto nx = observations.front().x.size();
  const auto nz = observations.front().z.size();
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    try {
      validate(o);
    } catch (const Error& e) {
      throw Error(e.kind(), "year " + std::to_string(year) + " row " + std::to_string(i) + ": " + e.what());
    }
    if (o.x.size() != nx || o.z.size() != nz)
      throw Error(ErrorKind::InvalidInput, "year " + std::to_string(year) + " row " +
                                               std::to_string(i) + ": covariate dimension mismatch");
  }
  spec.validate(static_cast<int>(nx), static_cast<int>(nz));

  YearSample sample;
  sample.year = year;
  auto basis = build_basis(observations, spec.p_terms);
  if (warnings)
    for (auto& w : basis.warnings) warnings->push_back("year " + std::to_string(year) + ": " + w);
  sample.basis_p = std::move(basis.matrix);
  sample.trimming_cap = cap ? *cap : default_trimming_cap(observations);
  if (!(sample.trimming_cap > 0.0))
    throw Error(ErrorKind::InvalidInput, "trimming cap must be positive");
  const bool any_trimmed = std::any_of(observations.begin(), observations.end(), [&](const auto& o) {
    return o.hours > 0.0 && o.hours <= sample.trimming_cap;
  });
  if (!any_trimmed)
    throw Error(ErrorKind::InvalidInput,
                "year " + std::to_string(year) + ": no worker at or below the trimming cap");
  sample.observations = std::move(observations);
  return sample;
}

}  // namespace cfdecomp
