// finsler: describe a metric, verify a structure pair, export trajectories.
//
// Exit codes: 0 ok, 1 a check failed (or an I/O error), 2 parse/usage error,
// 3 domain or convexity error at a requested point.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "finsler/finsler.hpp"

namespace {

using namespace finsler;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;

struct UsageError : Error {
  using Error::Error;
};

struct FileParseError : Error {
  using Error::Error;
};

FinslerStructure load(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError("cannot open metric file '" + path + "'");
  try {
    return load_metric_file(path);
  } catch (const ParseError& e) {
    throw FileParseError(path + ": " + e.what());
  }
}

std::vector<double> parse_vector(std::string text, const std::string& what) {
  if (!text.empty() && text.front() == '(' && text.back() == ')') text = text.substr(1, text.size() - 2);
  if (!text.empty() && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(start, end - start);
    const auto a = item.find_first_not_of(' '), b = item.find_last_not_of(' ');
    item = a == std::string::npos ? "" : item.substr(a, b - a + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw UsageError(what + ": cannot read '" + item + "' as a number");
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v, int n, const std::string& what) {
  if (static_cast<int>(v.size()) != n)
    throw UsageError(what + " needs " + std::to_string(n) + " components, got " + std::to_string(v.size()));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

/// "x=0,0;y=1,0"
SlitPoint parse_at(const std::string& at, int n) {
  const auto semi = at.find(';');
  if (semi == std::string::npos || at.rfind("x=", 0) != 0 || at.compare(semi + 1, 2, "y=") != 0)
    throw UsageError("--at expects \"x=<v>;y=<v>\"");
  SlitPoint p{parse_vector(at.substr(2, semi - 2), "--at x"), parse_vector(at.substr(semi + 3), "--at y")};
  to_eigen(p.x, n, "--at x");
  to_eigen(p.y, n, "--at y");
  return p;
}

std::map<std::string, double> parse_tolerances(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.rfind('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--tol expects <id>=<value>, got '" + item + "'");
    const std::string id = item.substr(0, eq);
    const auto v = parse_vector(item.substr(eq + 1), "--tol " + id);
    if (v.size() != 1 || !(v[0] >= 0.0)) throw UsageError("--tol " + id + " needs one non-negative value");
    try {
      check_info(id);
    } catch (const ConstructionError&) {
      throw UsageError("--tol: unknown check id '" + id + "'");
    }
    out[id] = v[0];
  }
  return out;
}

void print_matrix(std::ostream& os, const std::string& name, const Eigen::MatrixXd& m) {
  os << name << " =\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(14) << m(i, j);
    os << "\n";
  }
}

void print_rank3(std::ostream& os, const std::string& name, const Tensor& t) {
  const int n = t.n();
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd m(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) m(a, b) = t(i, a, b);
    print_matrix(os, name + "[" + std::to_string(i + 1) + "]", m);
  }
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    write_atomic(out, content);
  }
}

int cmd_describe(const std::string& metric, const std::string& at) {
  const auto L = load(metric);
  const SlitPoint p = parse_at(at, L.dim());
  const auto [f, cf] = full_frame(L, p);
  const auto cls = classify_point(L, p);
  const ClassifyTolerances tol;
  std::ostringstream os;
  os << std::setprecision(8);
  os << "structure: " << L.label() << " (dimension " << L.dim() << ", domain " << L.domain().to_string() << ")\n";
  os << "point: x = " << to_eigen(p.x, L.dim(), "x").transpose() << ", y = " << to_eigen(p.y, L.dim(), "y").transpose()
     << "\n";
  os << "F = " << f.F << "\n";
  print_matrix(os, "g", f.g);
  print_matrix(os, "g_inv", f.g_inv);
  os << "G = " << f.G.transpose() << "\n";
  print_matrix(os, "N", f.N);
  print_rank3(os, "Gamma", f.Gamma);
  print_rank3(os, "C", f.C);
  os << "max|R| = " << cf.R.max_abs() << ", max|P| = " << cf.P.max_abs() << ", max|Q| = " << cf.Q.max_abs() << "\n";
  const bool berwald = cls.berwald_residual <= tol.berwald;
  const bool landsberg = cls.landsberg_residual <= tol.landsberg;
  const bool minkowski = berwald && cls.curvature_residual <= tol.curvature;
  os << "berwald: " << (berwald ? "yes" : "no") << " (residual " << cls.berwald_residual << ")\n";
  os << "landsberg: " << (landsberg ? "yes" : "no") << " (residual " << cls.landsberg_residual << ")\n";
  os << "locally_minkowskian: " << (minkowski ? "yes" : "no") << " (curvature residual " << cls.curvature_residual
     << ")\n";
  os << "(verdicts at this point only)\n";
  std::cout << os.str();
  return kExitOk;
}

int cmd_verify(RunConfig cfg, const std::vector<std::string>& tol_items, const std::string& out) {
  cfg.tolerances = parse_tolerances(tol_items);
  if (cfg.samples < 1) throw UsageError("--samples must be at least 1");
  if (cfg.workers < 1) throw UsageError("--workers must be at least 1");
  const auto a = load(cfg.metric_a);
  const auto b = load(cfg.metric_b);
  if (a.dim() != b.dim()) throw UsageError("metrics have different dimensions");
  const StructurePair pair(a, b);
  cfg.label_a = a.label();
  cfg.label_b = b.label();
  render(Report{cfg, {}, 0.0}, cfg.format);  // reject a bad format before the run

  const auto t0 = std::chrono::steady_clock::now();
  Report report{cfg, run_suite(pair, cfg.suite, cfg.samples, cfg.seed, cfg.tolerances, cfg.workers), 0.0};
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  emit(out, render(report, cfg.format));
  const auto s = summarize(report.records);
  std::cerr << "verify " << pair.label() << " [" << cfg.suite << "]: " << s.passed << " passed, " << s.failed
            << " failed, " << s.skipped << " skipped\n";
  return s.failed == 0 ? kExitOk : kExitFail;
}

struct TrajectoryArgs {
  std::string metric, x0, y0, J0, J0dot, out;
  double t1 = 1.0;
  int steps = 100;
};

int cmd_trajectory(const TrajectoryArgs& args, bool jacobi) {
  const auto L = load(args.metric);
  const int n = L.dim();
  const Eigen::VectorXd x0 = to_eigen(parse_vector(args.x0, "--x0"), n, "--x0");
  const Eigen::VectorXd y0 = to_eigen(parse_vector(args.y0, "--y0"), n, "--y0");
  if (!(args.t1 > 0.0)) throw UsageError("--t1 must be positive");
  if (args.steps < 2) throw UsageError("--steps must be at least 2");
  Trajectory tr = integrate_geodesic(L, x0, y0, args.t1, args.steps);
  std::vector<std::string> names;
  if (jacobi) {
    const Eigen::VectorXd J0 = to_eigen(parse_vector(args.J0, "--J0"), n, "--J0");
    const Eigen::VectorXd W0 = to_eigen(parse_vector(args.J0dot, "--J0dot"), n, "--J0dot");
    if (tr.size() < 3) throw DomainError("geodesic leaves the domain before the second step");
    tr = integrate_jacobi(L, tr, J0, W0);
    names = {"J", "DJ"};
  }
  if (tr.halted) std::cerr << "note: integration stopped at t = " << tr.t_end() << ": " << tr.halt_reason << "\n";
  std::ostringstream os;
  write_csv(os, tr, names);
  emit(args.out, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finsler structure comparison toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string metric, at;
  auto* describe = app.add_subcommand("describe", "Print the Cartan data and classification at a point");
  describe->add_option("--metric", metric, "Metric definition file")->required();
  describe->add_option("--at", at, "Point as \"x=<v>;y=<v>\"")->required();

  RunConfig cfg;
  cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::string> tol_items;
  std::string report_out;
  auto* verify = app.add_subcommand("verify", "Run the check catalogue on a pair (L = metric-a, L* = metric-b)");
  verify->add_option("--metric-a", cfg.metric_a, "Metric file for L")->required();
  verify->add_option("--metric-b", cfg.metric_b, "Metric file for L*")->required();
  verify->add_option("--suite", cfg.suite, "all|connection|curvature|geodesic|special")
      ->check(CLI::IsMember(suite_names()));
  verify->add_option("--samples", cfg.samples, "Shared sample points");
  verify->add_option("--seed", cfg.seed, "Sampling seed")->required();
  verify->add_option("--tol", tol_items, "Tolerance override <id>=<value>");
  verify->add_option("--out", report_out, "Report path (stdout if omitted)");
  verify->add_option("--format", cfg.format, "json|csv|md")->check(CLI::IsMember({"json", "csv", "md"}));
  verify->add_option("--workers", cfg.workers, "Worker threads");

  TrajectoryArgs targs;
  auto add_traj = [&](CLI::App* sub) {
    sub->add_option("--metric", targs.metric, "Metric definition file")->required();
    sub->add_option("--x0", targs.x0, "Initial point")->required();
    sub->add_option("--y0", targs.y0, "Initial velocity")->required();
    sub->add_option("--t1", targs.t1, "End time");
    sub->add_option("--steps", targs.steps, "RK4 steps");
    sub->add_option("--out", targs.out, "CSV path (stdout if omitted)");
  };
  auto* geodesic = app.add_subcommand("geodesic", "Integrate a geodesic and write CSV");
  add_traj(geodesic);
  auto* jacobi = app.add_subcommand("jacobi", "Integrate a Jacobi field along a geodesic and write CSV");
  add_traj(jacobi);
  jacobi->add_option("--J0", targs.J0, "J(0)")->required();
  jacobi->add_option("--J0dot", targs.J0dot, "DJ/dt(0)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*describe) return cmd_describe(metric, at);
    if (*verify) {
      cfg.command = "verify";
      return cmd_verify(cfg, tol_items, report_out);
    }
    if (*geodesic) return cmd_trajectory(targs, false);
    if (*jacobi) return cmd_trajectory(targs, true);
  } catch (const FileParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConstructionError& e) {
    std::cerr << "invalid metric: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const ConvexityError& e) {
    std::cerr << "convexity error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitUsage;
}
