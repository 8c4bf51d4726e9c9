#pragma once

// Verification reports: JSON (stable schema), CSV and Markdown renderings of
// a suite run, written atomically.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/error.hpp"
#include "finsler/laws.hpp"

namespace finsler {

inline constexpr const char* kToolName = "finsler";
inline constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
  std::string command = "verify";
  std::string metric_a, metric_b;
  std::string label_a, label_b;
  std::string suite = "all";
  int samples = 100;
  std::uint64_t seed = 0;
  std::map<std::string, double> tolerances;
  int workers = 1;
  std::string format = "json";
};

struct Report {
  RunConfig config;
  std::vector<CheckResult> records;
  double elapsed_seconds = 0.0;
};

/// Limits of what a finite run can establish, listed in every report.
inline std::vector<std::string> scope_notes() {
  return {
      "T4.3 and T4.4-conjugate: B(V,V) = 0 is measured along the integrated geodesics only (up to 3 per "
      "structure), not along every geodesic",
      "T4.4-conjugate: only conjugate-point locations and multiplicities are compared; Morse indices are not computed",
      "P3.3-identity: the pointwise differential identity is checked; the field-level equivalence N = 0 <=> N0 = 0 is not",
      "T4.2: same-parameter (affine) geodesic equivalence; reparametrized geodesics count as different",
      "classification verdicts (Berwald, Landsberg, locally Minkowskian) hold at the sampled points only",
  };
}

namespace detail {

/// Non-finite residuals are written as the string "inf" so the JSON stays valid.
inline nlohmann::ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(6) << std::scientific << v;
  return os.str();
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Report& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  const auto& c = r.config;
  ordered_json cfg;
  cfg["command"] = c.command;
  cfg["metric_a"] = c.metric_a;
  cfg["metric_b"] = c.metric_b;
  cfg["structure_a"] = c.label_a;
  cfg["structure_b"] = c.label_b;
  cfg["suite"] = c.suite;
  cfg["samples"] = c.samples;
  cfg["seed"] = c.seed;
  ordered_json tol = ordered_json::object();
  for (const auto& [id, v] : c.tolerances) tol[id] = v;
  cfg["tolerance_overrides"] = tol;
  cfg["workers"] = c.workers;
  j["config"] = cfg;
  j["scope"] = scope_notes();
  ordered_json records = ordered_json::array();
  for (const auto& rec : r.records) {
    ordered_json e;
    e["id"] = rec.id;
    e["statement"] = rec.statement;
    e["suite"] = rec.suite;
    e["tier"] = rec.tier;
    e["samples"] = rec.samples;
    e["max_residual"] = rec.verdict == Verdict::Skipped ? ordered_json(nullptr) : detail::number(rec.max_residual);
    e["tolerance"] = detail::number(rec.tolerance);
    e["verdict"] = to_string(rec.verdict);
    e["reason"] = rec.reason.empty() ? ordered_json(nullptr) : ordered_json(rec.reason);
    ordered_json d = ordered_json::object();
    for (const auto& [k, v] : rec.details) d[k] = detail::number(v);
    e["details"] = d;
    records.push_back(std::move(e));
  }
  j["records"] = records;
  const auto s = summarize(r.records);
  j["summary"] = {{"total", r.records.size()}, {"passed", s.passed}, {"failed", s.failed}, {"skipped", s.skipped}};
  j["elapsed_seconds"] = r.elapsed_seconds;
  return j;
}

inline std::string render_json(const Report& r) { return to_json(r).dump(2) + "\n"; }

inline std::string render_csv(const Report& r) {
  std::ostringstream os;
  os << "id,suite,tier,verdict,max_residual,tolerance,samples,reason,statement\n";
  for (const auto& rec : r.records)
    os << detail::csv_quote(rec.id) << ',' << rec.suite << ',' << rec.tier << ',' << to_string(rec.verdict) << ','
       << (rec.verdict == Verdict::Skipped ? "" : detail::fmt(rec.max_residual)) << ',' << detail::fmt(rec.tolerance)
       << ',' << rec.samples << ',' << detail::csv_quote(rec.reason) << ',' << detail::csv_quote(rec.statement)
       << '\n';
  return os.str();
}

inline std::string render_md(const Report& r) {
  std::ostringstream os;
  const auto& c = r.config;
  const auto s = summarize(r.records);
  os << "# " << kToolName << " " << kToolVersion << " verify\n\n";
  os << "- structures: `" << c.label_a << "` (" << c.metric_a << ") vs `" << c.label_b << "` (" << c.metric_b
     << ")\n";
  os << "- suite: " << c.suite << ", samples: " << c.samples << ", seed: " << c.seed << "\n";
  os << "- passed " << s.passed << ", failed " << s.failed << ", skipped " << s.skipped << "\n";
  os << "- elapsed: " << std::fixed << std::setprecision(3) << r.elapsed_seconds << " s\n\n";
  os << "| id | verdict | max residual | tolerance | samples | note |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& rec : r.records) {
    std::string note = rec.reason;
    for (const auto& [k, v] : rec.details) note += (note.empty() ? "" : "; ") + k + "=" + detail::fmt(v);
    os << "| " << rec.id << " | " << to_string(rec.verdict) << " | "
       << (rec.verdict == Verdict::Skipped ? "-" : detail::fmt(rec.max_residual)) << " | "
       << detail::fmt(rec.tolerance) << " | " << rec.samples << " | " << detail::md_escape(note) << " |\n";
  }
  os << "\n## Scope\n\n";
  for (const auto& n : scope_notes()) os << "- " << n << "\n";
  return os.str();
}

inline std::string render(const Report& r, const std::string& format) {
  if (format == "json") return render_json(r);
  if (format == "csv") return render_csv(r);
  if (format == "md") return render_md(r);
  throw ConstructionError("unknown report format '" + format + "'");
}

/// Writes through a temporary file in the same directory, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename report into '" + path.string() + "'");
  }
}

}  // namespace finsler
