#pragma once

// Metric definition files: UTF-8, one `key = value` per line, `#` comments.
//
//   dimension = 2
//   kind = expression | riemannian_diagonal | randers | builtin
//   expression = "sqrt(y1^2 + y2^2)"              kind=expression
//   diagonal = [1 + x1^2, 1]                      kind=riemannian_diagonal
//   alpha_expression = "..." | alpha_builtin = euclidean|sphere_chart
//   b = [0.3, 0] | [0.2*x1^2, 0]                  kind=randers
//   builtin = euclidean|klein|funk|minkowski_quartic|sphere_chart
//   radius = 1                                    builtin parameter
//   domain = "ball:<r>" | "all"
//   name = <label>

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/metric_expr.hpp"
#include "finsler/structure.hpp"

namespace finsler {

struct MetricEntry {
  std::string value;
  int line = 0;
  int column = 0;  // first character of the value (inside quotes when quoted)
};

struct MetricSpec {
  std::string source;  // file name, for messages
  std::map<std::string, MetricEntry> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  const MetricEntry& at(const std::string& key) const { return entries.at(key); }
};

namespace detail {

inline const std::vector<std::string>& metric_keys() {
  static const std::vector<std::string> keys = {"dimension", "kind",          "expression", "diagonal",
                                                "alpha_expression", "alpha_builtin", "b", "builtin",
                                                "radius",    "domain",        "name"};
  return keys;
}

inline std::string_view trim(std::string_view s, int* lead = nullptr) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  if (lead) *lead = static_cast<int>(a);
  return s.substr(a, b - a);
}

/// Strips a trailing comment that is not inside quotes.
inline std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == '#' && !quoted) return line.substr(0, k);
  }
  return line;
}

/// Splits "[a, b(c, d)]" into top-level elements with their columns.
inline std::vector<MetricEntry> split_list(const MetricEntry& e) {
  std::string_view v = e.value;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw ParseError("expected a list like [v1, v2]", e.line, e.column);
  std::vector<MetricEntry> out;
  int depth = 0;
  std::size_t start = 1;
  for (std::size_t k = 1; k < v.size(); ++k) {
    const char c = v[k];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if ((c == ',' && depth == 0) || k + 1 == v.size()) {
      int lead = 0;
      const auto item = trim(v.substr(start, k - start), &lead);
      if (item.empty()) throw ParseError("empty list element", e.line, e.column + static_cast<int>(start));
      out.push_back({std::string(item), e.line, e.column + static_cast<int>(start) + lead});
      start = k + 1;
    }
  }
  return out;
}

inline MetricExpr parse_entry(const MetricEntry& e, int n) { return MetricExpr::parse(e.value, n, e.line, e.column); }

/// Expressions of x only, as a field.
inline XField x_field(std::vector<MetricExpr> exprs, int n) {
  auto g = [exprs, n](auto x) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    const std::vector<T> zero(static_cast<std::size_t>(n), T(0.0));
    std::vector<T> out;
    out.reserve(exprs.size());
    for (const auto& e : exprs) out.push_back(e.template evaluate<T>(x, std::span<const T>(zero)));
    return out;
  };
  return XField::from_generic(g);
}

inline std::vector<MetricExpr> x_expressions(const MetricEntry& e, int n) {
  const auto items = split_list(e);
  if (static_cast<int>(items.size()) != n)
    throw ParseError("expected " + std::to_string(n) + " components, got " + std::to_string(items.size()), e.line,
                     e.column);
  std::vector<MetricExpr> out;
  for (const auto& item : items) {
    auto expr = parse_entry(item, n);
    if (expr.uses_y()) throw ParseError("component may depend on x only", item.line, item.column);
    out.push_back(std::move(expr));
  }
  return out;
}

inline double parse_number(const MetricEntry& e) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("expected a number", e.line, e.column);
  return v;
}

inline Domain parse_domain(const MetricEntry& e) {
  if (e.value == "all") return Domain::all();
  if (e.value.rfind("ball:", 0) == 0) {
    MetricEntry r{e.value.substr(5), e.line, e.column + 5};
    const double radius = parse_number(r);
    if (!(radius > 0.0)) throw ParseError("ball radius must be positive", r.line, r.column);
    return Domain::ball(radius);
  }
  throw ParseError("domain must be \"all\" or \"ball:<r>\"", e.line, e.column);
}

}  // namespace detail

/// Splits the file into entries; rejects unknown and duplicate keys.
inline MetricSpec parse_metric_spec(std::string_view text, std::string source = "<input>") {
  MetricSpec spec;
  spec.source = std::move(source);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const auto body = detail::strip_comment(raw);
    if (detail::trim(body).empty()) {
      if (nl == text.size()) break;
      continue;
    }
    const std::size_t eq = body.find('=');
    int lead = 0;
    if (eq == std::string_view::npos) {
      detail::trim(body, &lead);
      throw ParseError("expected 'key = value'", line_no, lead + 1);
    }
    const auto key = detail::trim(body.substr(0, eq), &lead);
    const int key_col = lead + 1;
    if (key.empty()) throw ParseError("missing key", line_no, key_col);
    const std::string k(key);
    if (std::find(detail::metric_keys().begin(), detail::metric_keys().end(), k) == detail::metric_keys().end())
      throw ParseError("unknown key '" + k + "'", line_no, key_col);
    if (spec.has(k)) throw ParseError("duplicate key '" + k + "'", line_no, key_col);
    auto value = detail::trim(body.substr(eq + 1), &lead);
    int col = static_cast<int>(eq) + 2 + lead;
    if (value.empty()) throw ParseError("missing value for '" + k + "'", line_no, col);
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') throw ParseError("unterminated string", line_no, col);
      value = value.substr(1, value.size() - 2);
      ++col;
    }
    spec.entries[k] = {std::string(value), line_no, col};
    if (nl == text.size()) break;
  }
  return spec;
}

/// Builds the structure a spec describes.
inline FinslerStructure build_metric(const MetricSpec& spec, std::string label = {}) {
  auto require = [&](const std::string& key) -> const MetricEntry& {
    if (!spec.has(key)) throw ParseError("missing key '" + key + "'", 1, 1);
    return spec.at(key);
  };
  auto forbid = [&](std::initializer_list<const char*> keys, const std::string& kind) {
    for (const char* k : keys)
      if (spec.has(k)) {
        const auto& e = spec.at(k);
        throw ParseError(std::string("key '") + k + "' does not apply to kind " + kind, e.line, 1);
      }
  };

  const auto& dim_e = require("dimension");
  const double dim_v = detail::parse_number(dim_e);
  if (dim_v != std::floor(dim_v) || dim_v < 2 || dim_v > 16)
    throw ParseError("dimension must be an integer in [2, 16]", dim_e.line, dim_e.column);
  const int n = static_cast<int>(dim_v);
  const auto& kind_e = require("kind");
  const std::string& kind = kind_e.value;
  if (label.empty()) label = spec.has("name") ? spec.at("name").value : kind;
  const std::optional<Domain> domain =
      spec.has("domain") ? std::optional<Domain>(detail::parse_domain(spec.at("domain"))) : std::nullopt;

  try {
    if (kind == "expression") {
      forbid({"diagonal", "alpha_expression", "alpha_builtin", "b", "builtin", "radius"}, kind);
      const auto expr = detail::parse_entry(require("expression"), n);
      return make_expression(expr, domain.value_or(Domain::all()), label);
    }
    if (kind == "riemannian_diagonal") {
      forbid({"expression", "alpha_expression", "alpha_builtin", "b", "builtin", "radius"}, kind);
      const auto diag = detail::x_field(detail::x_expressions(require("diagonal"), n), n);
      auto a = [diag, n](auto x) {
        using T = std::remove_const_t<typename decltype(x)::value_type>;
        const std::vector<T> d = diag.template at<T>(x);
        std::vector<T> m(static_cast<std::size_t>(n * n), T(0.0));
        for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i * n + i)] = d[static_cast<std::size_t>(i)];
        return m;
      };
      return make_riemannian(n, XField::from_generic(a), label, domain.value_or(Domain::all()));
    }
    if (kind == "randers") {
      forbid({"expression", "diagonal", "builtin", "radius"}, kind);
      if (spec.has("alpha_expression") == spec.has("alpha_builtin"))
        throw ParseError("randers needs exactly one of alpha_expression, alpha_builtin", kind_e.line, 1);
      std::optional<FinslerStructure> alpha;
      if (spec.has("alpha_expression")) {
        alpha = make_expression(detail::parse_entry(spec.at("alpha_expression"), n), domain.value_or(Domain::all()),
                                "alpha");
      } else {
        const auto& e = spec.at("alpha_builtin");
        if (e.value != "euclidean" && e.value != "sphere_chart")
          throw ParseError("alpha_builtin must be euclidean or sphere_chart", e.line, e.column);
        const auto base = make_builtin(e.value, n);
        alpha = FinslerStructure(base.label(), n, domain.value_or(base.domain()), base.function());
      }
      const auto b = detail::x_field(detail::x_expressions(require("b"), n), n);
      return make_randers(*alpha, b, label);
    }
    if (kind == "builtin") {
      forbid({"expression", "diagonal", "alpha_expression", "alpha_builtin", "b"}, kind);
      if (domain) throw ParseError("domain is fixed by the builtin; use radius", spec.at("domain").line, 1);
      const auto& name_e = require("builtin");
      static const std::vector<std::string> names = {"euclidean", "klein", "funk", "minkowski_quartic",
                                                     "sphere_chart"};
      if (std::find(names.begin(), names.end(), name_e.value) == names.end())
        throw ParseError("unknown builtin '" + name_e.value + "'", name_e.line, name_e.column);
      BuiltinParams params;
      if (spec.has("radius")) params["radius"] = detail::parse_number(spec.at("radius"));
      const auto base = make_builtin(name_e.value, n, params);
      return spec.has("name") ? FinslerStructure(label, n, base.domain(), base.function()) : base;
    }
  } catch (const ConstructionError& e) {
    throw ConstructionError(spec.source + ": " + e.what());
  }
  throw ParseError("unknown kind '" + kind + "'", kind_e.line, kind_e.column);
}

inline FinslerStructure parse_metric_file_text(std::string_view text, std::string source = "<input>") {
  auto spec = parse_metric_spec(text, source);
  return build_metric(spec);
}

/// Loads a metric file; the label defaults to `name`, else the file stem.
inline FinslerStructure load_metric_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open metric file '" + path.string() + "'", 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto spec = parse_metric_spec(ss.str(), path.string());
  return build_metric(spec, spec.has("name") ? spec.at("name").value : path.stem().string());
}

}  // namespace finsler
