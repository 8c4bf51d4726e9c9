#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"

using namespace finsler;
using namespace fixtures;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("finsler_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string metric(const std::string& name) { return std::string(FINSLER_METRICS_DIR) + "/" + name + ".metric"; }

Run cli(const std::string& args) {
  static int counter = 0;
  const auto out = scratch() / ("out" + std::to_string(counter) + ".txt");
  const auto err = scratch() / ("err" + std::to_string(counter++) + ".txt");
  const std::string cmd =
      std::string(FINSLER_CLI_PATH) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::vector<double>> csv_rows(const std::string& text, std::vector<std::string>& header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  header.clear();
  std::istringstream h(line);
  for (std::string cell; std::getline(h, cell, ',');) header.push_back(cell);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream r(line);
    for (std::string cell; std::getline(r, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<int>(k);
  return -1;
}

const nlohmann::json& record(const nlohmann::json& report, const std::string& id) {
  for (const auto& r : report["records"])
    if (r["id"] == id) return r;
  throw std::runtime_error("no record " + id);
}

nlohmann::json without_elapsed(nlohmann::json j) {
  j.erase("elapsed_seconds");
  return j;
}

}  // namespace

// --- metric files -----------------------------------------------------------

TEST(MetricFile, ShippedFilesLoad) {
  for (const char* name :
       {"euclidean", "euclidean_ball", "flat_randers", "curved_randers", "klein", "funk", "quartic", "sphere", "conformal"}) {
    EXPECT_NO_THROW(load_metric_file(metric(name))) << name;
  }
  EXPECT_THROW(load_metric_file(metric("malformed")), ParseError);
}

TEST(MetricFile, MatchesLibraryConstructions) {
  const auto cases = std::vector<std::pair<std::string, FinslerStructure>>{
      {"curved_randers", curved_randers()},
      {"flat_randers", flat_randers()},
      {"quartic", make_builtin("minkowski_quartic", 2)},
      {"klein", make_builtin("klein", 2)},
      {"euclidean_ball", euclidean_ball(2)}};
  for (const auto& [name, ref] : cases) {
    const auto L = load_metric_file(metric(name));
    EXPECT_EQ(L.domain().to_string(), ref.domain().to_string()) << name;
    for (const auto& p : sample_points(ref.domain(), 2, 50, 3)) EXPECT_NEAR(L.value(p), ref.value(p), 1e-12) << name;
  }
}

TEST(MetricFile, Labels) {
  EXPECT_EQ(load_metric_file(metric("quartic")).label(), "quartic");
  EXPECT_EQ(load_metric_file(metric("klein")).label(), "klein(2)");
  EXPECT_EQ(parse_metric_file_text("name = mine\ndimension = 2\nkind = builtin\nbuiltin = funk\n").label(), "mine");
}

TEST(MetricFile, RiemannianDiagonal) {
  const auto L = parse_metric_file_text("dimension = 2\nkind = riemannian_diagonal\ndiagonal = [1 + x2^2, exp(x1)]\n");
  const auto p = pt({0.5, 2.0}, {1.0, -1.0});
  EXPECT_NEAR(L.value(p), std::sqrt(5.0 + std::exp(0.5)), 1e-12);
  EXPECT_LT(max_abs(connection_frame(L, p).g - fd_metric(L, p)), 1e-6);
}

TEST(MetricFile, BuiltinRadius) {
  const auto L = parse_metric_file_text("dimension = 3\nkind = builtin\nbuiltin = klein\nradius = 2\n");
  EXPECT_EQ(L.dim(), 3);
  EXPECT_EQ(L.domain().to_string(), "ball:2");
}

TEST(MetricFile, CommentsAndWhitespace) {
  const auto L = parse_metric_file_text(
      "  # header\r\n\ndimension=2   # inline\r\nkind =expression\nexpression = \"sqrt(y1^2+y2^2) + 0.3*y1\" # c\n");
  EXPECT_NEAR(L.value(pt({0, 0}, {1, 0})), 1.3, 1e-15);
}

namespace {

void expect_parse_error(const std::string& text, int line, int col, const std::string& fragment) {
  try {
    parse_metric_file_text(text);
    ADD_FAILURE() << "no error for: " << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    if (col > 0) {
      EXPECT_EQ(e.column(), col) << e.what();
    }
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(MetricFile, ErrorsCarryPositions) {
  expect_parse_error("dimension = 2\nkind = expression\nexpression = \"sqrt(y1^2 + y2^2\"\n", 3, 0, "line 3");
  expect_parse_error("dimension = 2\ncolour = red\n", 2, 1, "unknown key");
  expect_parse_error("dimension = 2\ndimension = 3\n", 2, 1, "duplicate");
  expect_parse_error("dimension = 2\nkind\n", 2, 1, "key = value");
  expect_parse_error("dimension = two\n", 1, 13, "number");
  expect_parse_error("dimension = 2\nkind = expression\nexpression = \"sqrt(y1^2 + y3^2)\"\n", 3, 0, "");
  expect_parse_error("dimension = 2\nkind = randers\nalpha_builtin = euclidean\nb = [0.3*y1, 0]\n", 4, 6, "x only");
  expect_parse_error("dimension = 2\nkind = randers\nalpha_builtin = euclidean\nb = [0.3]\n", 4, 5, "components");
  expect_parse_error("dimension = 2\nkind = builtin\nbuiltin = hyperbolic\n", 3, 11, "unknown builtin");
  expect_parse_error("dimension = 2\nkind = magic\n", 2, 8, "unknown kind");
  expect_parse_error("dimension = 2\nkind = expression\nexpression = \"y1\"\ndomain = \"disc\"\n", 4, 11, "domain");
  expect_parse_error("dimension = 2\nkind = expression\n", 1, 1, "missing key 'expression'");
  expect_parse_error("dimension = 2\nkind = expression\nexpression = \"y1\nx\"\n", 3, 0, "");
}

TEST(MetricFile, ConstructionErrors) {
  EXPECT_THROW(parse_metric_file_text("dimension = 2\nkind = randers\nalpha_builtin = euclidean\nb = [1.5, 0]\n"),
               ConstructionError);
  EXPECT_THROW(parse_metric_file_text("dimension = 2\nkind = riemannian_diagonal\ndiagonal = [1, -1]\n"),
               ConstructionError);
}

// --- reports ----------------------------------------------------------------

TEST(Report, JsonSchema) {
  Report r;
  r.config.metric_a = "a";
  r.config.seed = 42;
  CheckResult pass;
  pass.id = "L2.1";
  pass.max_residual = 1e-17;
  CheckResult fail;
  fail.id = "L3.1";
  fail.verdict = Verdict::Fail;
  fail.max_residual = std::numeric_limits<double>::infinity();
  fail.reason = "error: boom";
  CheckResult skipped;
  skipped.id = "P3.2";
  skipped.verdict = Verdict::Skipped;
  skipped.reason = "hypothesis not satisfied";
  r.records = {pass, fail, skipped};
  const auto j = nlohmann::json::parse(render_json(r));
  for (const char* key : {"tool", "version", "config", "scope", "records", "summary", "elapsed_seconds"})
    EXPECT_TRUE(j.contains(key)) << key;
  for (const char* key :
       {"id", "statement", "suite", "tier", "samples", "max_residual", "tolerance", "verdict", "reason", "details"})
    EXPECT_TRUE(j["records"][0].contains(key)) << key;
  EXPECT_EQ(j["records"][1]["max_residual"], "inf");
  EXPECT_TRUE(j["records"][2]["max_residual"].is_null());
  EXPECT_EQ(j["summary"]["failed"], 1);
  EXPECT_EQ(j["summary"]["skipped"], 1);
  EXPECT_EQ(j["config"]["seed"], 42);
  EXPECT_THROW(render(r, "xml"), ConstructionError);
  EXPECT_NE(render_csv(r).find("id,suite,tier,verdict"), std::string::npos);
  EXPECT_NE(render_md(r).find("| L3.1 | fail | inf |"), std::string::npos);
}

TEST(Report, AtomicWrite) {
  const auto path = scratch() / "atomic.json";
  write_atomic(path, "first\n");
  write_atomic(path, "second\n");
  EXPECT_EQ(slurp(path), "second\n");
  for (const auto& e : fs::directory_iterator(scratch()))
    EXPECT_EQ(e.path().filename().string().find(".tmp"), std::string::npos) << e.path();
  EXPECT_THROW(write_atomic(scratch() / "missing_dir" / "x.json", "x"), Error);
}

// --- command line -----------------------------------------------------------

TEST(Cli, DescribeEuclidean) {
  const auto r = cli("describe --metric " + metric("euclidean") + " --at 'x=0,0;y=1,0'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("berwald: yes"), std::string::npos);
  EXPECT_NE(r.out.find("landsberg: yes"), std::string::npos);
  EXPECT_NE(r.out.find("locally_minkowskian: yes"), std::string::npos);
  EXPECT_NE(r.out.find("F = 1\n"), std::string::npos);
}

TEST(Cli, DescribeQuartic) {
  const auto r = cli("describe --metric " + metric("quartic") + " --at 'x=0.2,0.1;y=1,0.5'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("locally_minkowskian: yes"), std::string::npos);
  EXPECT_GT(connection_frame(load_metric_file(metric("quartic")), pt({0.2, 0.1}, {1, 0.5})).C.max_abs(), 0.01);
}

TEST(Cli, ExitCodes) {
  auto r = cli("describe --metric " + metric("malformed") + " --at 'x=0,0;y=1,0'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 4, column"), std::string::npos) << r.err;
  EXPECT_EQ(cli("describe --metric " + metric("klein") + " --at 'x=2,0;y=1,0'").code, 3);
  EXPECT_EQ(cli("describe --metric " + metric("euclidean") + " --at 'x=0,0;y=0,0'").code, 3);
  EXPECT_EQ(cli("describe --metric " + metric("euclidean") + " --at 'x=0,0'").code, 2);
  EXPECT_EQ(cli("describe --metric /nonexistent.metric --at 'x=0,0;y=1,0'").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  const std::string pair = " --metric-a " + metric("euclidean") + " --metric-b " + metric("flat_randers");
  EXPECT_EQ(cli("verify" + pair).code, 2);  // seed is required
  EXPECT_EQ(cli("verify" + pair + " --seed 1 --suite bogus").code, 2);
  EXPECT_EQ(cli("verify" + pair + " --seed 1 --samples 0").code, 2);
  EXPECT_EQ(cli("verify" + pair + " --seed 1 --tol nope=1").code, 2);
  EXPECT_EQ(cli("verify" + pair + " --seed 1 --tol L2.1").code, 2);
  EXPECT_EQ(cli("verify" + pair + " --seed 1 --format xml").code, 2);
  EXPECT_EQ(cli("verify --metric-a " + metric("euclidean") + " --metric-b " + metric("malformed") + " --seed 1").code,
            2);
  EXPECT_EQ(cli("geodesic --metric " + metric("klein") + " --x0 1.5,0 --y0 1,0").code, 3);
  EXPECT_EQ(cli("geodesic --metric " + metric("klein") + " --x0 0,0 --y0 1").code, 2);
  EXPECT_EQ(cli("--version").code, 0);
}

TEST(Cli, VerifyIdenticalFiles) {
  const auto path = scratch() / "identical.json";
  const auto r = cli("verify --metric-a " + metric("curved_randers") + " --metric-b " + metric("curved_randers") +
                     " --samples 5 --seed 3 --out " + path.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path));
  EXPECT_EQ(j["summary"]["failed"], 0);
  EXPECT_EQ(j["summary"]["total"], 30);
}

TEST(Cli, VerifyFlatRandersSpecial) {
  const auto r = cli("verify --metric-a " + metric("euclidean") + " --metric-b " + metric("flat_randers") +
                     " --suite special --samples 10 --seed 42");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  for (const char* id : {"T5.1", "T5.2", "T5.3"}) {
    const auto& rec = record(j, id);
    EXPECT_EQ(rec["verdict"], "pass") << id;
    EXPECT_LE(rec["details"]["hypothesis_max_B"].get<double>(), 1e-8) << id;
  }
}

TEST(Cli, VerifyKleinGeodesicBranches) {
  const auto r = cli("verify --metric-a " + metric("euclidean_ball") + " --metric-b " + metric("klein") +
                     " --suite geodesic --samples 5 --seed 42 --format json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  const auto& t42 = record(report, "T4.2");
  EXPECT_EQ(t42["verdict"], "pass");
  EXPECT_GT(t42["details"]["max_B_VV"].get<double>(), 1e-3);
  EXPECT_GT(t42["details"]["cross_equation"].get<double>(), 1e-3);
  EXPECT_EQ(t42["details"]["branches_hold"], 1.0);
}

TEST(Cli, FailureNeverExitsZero) {
  const auto r = cli("verify --metric-a " + metric("euclidean_ball") + " --metric-b " + metric("curved_randers") +
                     " --suite curvature --samples 3 --seed 1 --tol L3.1=0");
  EXPECT_EQ(r.code, 1);
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(record(report, "L3.1")["verdict"], "fail");
}

TEST(Cli, DeterministicReports) {
  const std::string base = "verify --metric-a " + metric("euclidean_ball") + " --metric-b " + metric("curved_randers") +
                           " --suite curvature --samples 6 --seed 42";
  const auto a = scratch() / "det_a.json", b = scratch() / "det_b.json", c = scratch() / "det_c.json";
  ASSERT_EQ(cli(base + " --workers 1 --out " + a.string()).code, 0);
  ASSERT_EQ(cli(base + " --workers 1 --out " + b.string()).code, 0);
  ASSERT_EQ(cli(base + " --workers 3 --out " + c.string()).code, 0);
  const auto ja = nlohmann::json::parse(slurp(a)), jb = nlohmann::json::parse(slurp(b));
  EXPECT_EQ(without_elapsed(ja).dump(), without_elapsed(jb).dump());
  EXPECT_EQ(ja["records"].dump(), nlohmann::json::parse(slurp(c))["records"].dump());
}

TEST(Cli, OtherFormats) {
  const std::string base = "verify --metric-a " + metric("euclidean") + " --metric-b " + metric("flat_randers") +
                           " --suite connection --samples 3 --seed 1";
  const auto csv = cli(base + " --format csv");
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.rfind("id,suite,tier,verdict,max_residual,tolerance,samples,reason,statement\n", 0), 0u);
  const auto md = cli(base + " --format md");
  ASSERT_EQ(md.code, 0);
  EXPECT_NE(md.out.find("| id | verdict |"), std::string::npos);
}

TEST(Cli, GeodesicEuclidean) {
  const auto r = cli("geodesic --metric " + metric("euclidean") + " --x0 0,0 --y0 1,0 --t1 1 --steps 10");
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = csv_rows(r.out, header);
  ASSERT_EQ(rows.size(), 11u);
  const int x1 = column(header, "x1");
  ASSERT_GE(x1, 0);
  for (std::size_t k = 0; k < rows.size(); ++k) EXPECT_NEAR(rows[k][static_cast<std::size_t>(x1)], 0.1 * k, 1e-12);
}

TEST(Cli, GeodesicKleinStaysInside) {
  const auto path = scratch() / "klein.csv";
  const auto r = cli("geodesic --metric " + metric("klein") + " --x0 0.3,-0.2 --y0 1,0.4 --t1 3 --steps 300 --out " +
                     path.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = csv_rows(slurp(path), header);
  ASSERT_GT(rows.size(), 10u);
  for (const auto& row : rows) EXPECT_LT(std::hypot(row[1], row[2]), 1.0);
}

TEST(Cli, JacobiEuclideanIsLinear) {
  const auto r = cli("jacobi --metric " + metric("euclidean") +
                     " --x0 0,0 --y0 1,0 --t1 1 --steps 10 --J0 0,0 --J0dot 0,1");
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = csv_rows(r.out, header);
  const int t = column(header, "t"), j2 = column(header, "J2"), j1 = column(header, "J1");
  ASSERT_GE(j2, 0);
  for (const auto& row : rows) {
    EXPECT_NEAR(row[static_cast<std::size_t>(j2)], row[static_cast<std::size_t>(t)], 1e-12);
    EXPECT_NEAR(row[static_cast<std::size_t>(j1)], 0.0, 1e-12);
  }
}
