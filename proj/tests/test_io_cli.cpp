#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "pcout/cli.hpp"
#include "test_support.hpp"

using namespace pcout;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("pcout_io_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_matrix_csv(const std::string& name, const Matrix& x, bool ids = false) {
  std::string text = ids ? "id" : "";
  for (Eigen::Index j = 0; j < x.cols(); ++j) text += (ids || j ? "," : "") + ("g" + std::to_string(j + 1));
  text += "\n";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (ids) text += "s" + std::to_string(i + 1);
    for (Eigen::Index j = 0; j < x.cols(); ++j) text += (ids || j ? "," : "") + format_number(x(i, j));
    text += "\n";
  }
  const fs::path p = scratch_dir() / name;
  write_text(p.string(), text);
  return p;
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pcout");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_body(const std::string& text) {
  auto recs = detail::split_csv(text);
  if (!recs.empty() && !recs.front().empty() && recs.front()[0].rfind("#", 0) == 0) recs.erase(recs.begin());
  return recs;
}

} // namespace

TEST_CASE("csv parsing", "[io][csv]") {
  const DataMatrix a = parse_csv("x,y\n1,2\n3,4\n5.5,-6e-1\n");
  CHECK(a.rows() == 3);
  CHECK(a.cols() == 2);
  CHECK(a.values(2, 1) == -0.6);
  CHECK(a.column_names == std::vector<std::string>{"x", "y"});
  CHECK(a.row_ids == std::vector<std::string>{"1", "2", "3"});

  const DataMatrix b = parse_csv("\xEF\xBB\xBFsample,a,b\r\nalpha,1,2\r\n\"be,ta\",3,4\r\n");
  CHECK(b.cols() == 2);
  CHECK(b.row_ids == std::vector<std::string>{"alpha", "be,ta"});
  CHECK(b.values(1, 0) == 3.0);

  const DataMatrix q = parse_csv("a,\"b \"\"q\"\"\"\n1,\"2\"\n");
  CHECK(q.column_names[1] == "b \"q\"");
  CHECK(q.values(0, 1) == 2.0);

  // numeric first column stays data
  const DataMatrix c = parse_csv("a,b\n1,2\n3,4\n");
  CHECK(c.cols() == 2);

  try {
    parse_csv("id,a,b\nr1,1,NA\nr2,2,3\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::input);
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("column 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n3\n"), Error);
  CHECK_THROWS_AS(parse_csv(""), Error);
  CHECK_THROWS_AS(parse_csv("a,b\n"), Error);
  CHECK_THROWS_AS(parse_csv("a,b\n1,inf\n"), Error);
  CHECK_THROWS_AS(load_csv((scratch_dir() / "missing.csv").string()), Error);
}

TEST_CASE("number formatting round-trips", "[io]") {
  const Vector v = testing::normal_vector(200, 3);
  for (double x : v) CHECK(std::strtod(format_number(x).c_str(), nullptr) == x);
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
}

TEST_CASE("detect is byte-identical across runs and formats agree", "[cli][detect]") {
  const auto spec = SimSpec::uniform_shift(100, 30, reference_outlier_indices(), 2.0, 1.0, 4);
  const fs::path in = write_matrix_csv("sim.csv", generate_contaminated(spec).data.values, true);

  const CliRun j1 = cli({"detect", "--input", in.string()});
  const CliRun j2 = cli({"detect", "--input", in.string()});
  REQUIRE(j1.code == 0);
  CHECK(j1.out == j2.out);
  CHECK(j1.err.find("prcmpout:") != std::string::npos);

  const CliRun c1 = cli({"detect", "--input", in.string(), "--format", "csv"});
  REQUIRE(c1.code == 0);
  CHECK(c1.out == cli({"detect", "--input", in.string(), "--format", "csv"}).out);

  const json doc = json::parse(j1.out);
  const auto& recs = doc.at("records");
  const auto rows = csv_body(c1.out);
  REQUIRE(rows.size() == 101);
  CHECK(rows[0] == std::vector<std::string>{"row_id", "w1", "w2", "w_final", "stage1_distance", "stage2_distance", "flag"});
  for (size_t i = 0; i < 100; ++i) {
    CHECK(rows[i + 1][0] == recs[i].at("row_id").get<std::string>());
    CHECK(std::strtod(rows[i + 1][3].c_str(), nullptr) == recs[i].at("w_final").get<double>());
    CHECK(std::strtod(rows[i + 1][4].c_str(), nullptr) == recs[i].at("stage1_distance").get<double>());
    CHECK((rows[i + 1][6] == "1") == recs[i].at("flag").get<bool>());
  }

  // the comment header of the CSV is the JSON header
  const std::string first = c1.out.substr(2, c1.out.find('\n') - 2);
  CHECK(json::parse(first) == doc.at("header"));
  CHECK_FALSE(doc.at("header").contains("elapsed_seconds"));

  const CliRun timed = cli({"detect", "--input", in.string(), "--include-timing"});
  CHECK(json::parse(timed.out).at("header").contains("elapsed_seconds"));
}

TEST_CASE("report header carries what is needed to re-run", "[cli][detect]") {
  const fs::path in = write_matrix_csv("rerun.csv", testing::normal_matrix(40, 8, 5));
  const CliRun a = cli({"detect", "--input", in.string(), "--variance-threshold", "0.9", "--outlier-cut", "0.3"});
  REQUIRE(a.code == 0);
  const json h = json::parse(a.out).at("header");
  CHECK(h.at("method") == "prcmpout");
  CHECK(h.at("input") == in.string());
  CHECK(h.at("config").at("variance_threshold") == 0.9);
  CHECK(h.at("config").at("outlier_cut") == 0.3);

  const DetectorConfig back = config_from_json(h.at("config"));
  RunConfig rc;
  rc.input_path = h.at("input").get<std::string>();
  rc.overrides.variance_threshold = back.variance_threshold;
  rc.overrides.outlier_cut = back.outlier_cut;
  std::ostringstream out, err;
  REQUIRE(run_detection(rc, out, err) == 0);
  CHECK(out.str() == a.out);

  const DetectionReport r = report_from_json(json::parse(a.out));
  CHECK(r.weights->w_final.size() == 40);
  CHECK(report_to_json(r).dump(2) + "\n" == a.out);
}

TEST_CASE("cutoff methods in the CLI", "[cli][detect]") {
  const fs::path in = write_matrix_csv("tall.csv", testing::normal_matrix(80, 6, 6));
  for (const char* m : {"classical", "ogk", "sign2"}) {
    const CliRun r = cli({"detect", "--input", in.string(), "--method", m, "--alpha", "0.025"});
    REQUIRE(r.code == 0);
    const json h = json::parse(r.out).at("header");
    CHECK(h.at("alpha") == 0.025);
    CHECK(h.at("method") == m);
  }
  const CliRun dflt = cli({"detect", "--input", in.string(), "--method", "classical"});
  CHECK(json::parse(dflt.out).at("header").at("alpha") == 0.05);
}

TEST_CASE("exit codes", "[cli][errors]") {
  const fs::path wide = write_matrix_csv("wide.csv", testing::normal_matrix(20, 50, 7));
  const CliRun cls = cli({"detect", "--input", wide.string(), "--method", "classical"});
  CHECK(cls.code == 3);
  CHECK(cls.err.find("prcmpout") != std::string::npos);
  CHECK(cls.out.empty());

  CHECK(cli({"detect", "--input", wide.string()}).code == 0);
  CHECK(cli({"detect", "--input", wide.string(), "--alpha", "0.05"}).code == 4);
  CHECK(cli({"detect", "--input", wide.string(), "--method", "ogk", "--outlier-cut", "0.3"}).code == 4);
  CHECK(cli({"detect", "--input", wide.string(), "--method", "nope"}).code == 4);
  CHECK(cli({"detect", "--input", wide.string(), "--stage2-m-quantile", "0.999"}).code == 4);
  CHECK(cli({"detect", "--input", (scratch_dir() / "absent.csv").string()}).code == 2);
  CHECK(cli({"detect"}).code == 4);
  CHECK(cli({}).code == 4);

  write_text((scratch_dir() / "bad.csv").string(), "a,b\n1,x\n2,3\n");
  const CliRun bad = cli({"detect", "--input", (scratch_dir() / "bad.csv").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line 2") != std::string::npos);

  write_text((scratch_dir() / "flat.csv").string(), "a,b\n1,2\n1,2\n1,2\n1,2\n");
  CHECK(cli({"detect", "--input", (scratch_dir() / "flat.csv").string()}).code == 3);
}

TEST_CASE("plot data schemas", "[cli][plot]") {
  const auto spec = SimSpec::uniform_shift(60, 12, {1, 2, 3}, 5.0, 1.0, 8);
  const fs::path in = write_matrix_csv("plot.csv", generate_contaminated(spec).data.values);
  const fs::path panels = scratch_dir() / "panels.csv";
  const CliRun r = cli({"detect", "--input", in.string(), "--plot-data", panels.string()});
  REQUIRE(r.code == 0);

  const auto rows = detail::split_csv(read_file(panels));
  REQUIRE(!rows.empty());
  CHECK(rows[0] == std::vector<std::string>{"panel", "x", "y", "flag"});
  std::map<std::string, int> numeric, boundary;
  for (size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 4);
    if (detail::parse_number(rows[i][1]))
      ++numeric[rows[i][0]];
    else {
      ++boundary[rows[i][0]];
      CHECK(rows[i][3].empty());
    }
    CHECK(detail::parse_number(rows[i][2]).has_value());
  }
  CHECK(numeric.size() == 6);
  for (const char* p : {"stage1_distance", "w1", "stage2_distance", "w2", "w_final", "flag"}) CHECK(numeric[p] == 60);
  CHECK(boundary["stage1_distance"] == 2);
  CHECK(boundary["stage2_distance"] == 2);
  CHECK(boundary["w_final"] == 1);

  // same panels from the saved JSON report
  const fs::path report = scratch_dir() / "report.json";
  REQUIRE(cli({"detect", "--input", in.string(), "--output", report.string()}).code == 0);
  const CliRun again = cli({"plotdata", "--kind", "weight_panels", "--report", report.string()});
  REQUIRE(again.code == 0);
  CHECK(again.out == read_file(panels));
  CHECK(cli({"plotdata", "--kind", "distance_index", "--report", report.string()}).code == 4);
  CHECK(cli({"plotdata", "--kind", "bogus", "--report", report.string()}).code == 4);

  const fs::path cls = scratch_dir() / "cls.csv";
  REQUIRE(cli({"detect", "--input", in.string(), "--method", "classical", "--plot-data", cls.string()}).code == 0);
  const auto drows = detail::split_csv(read_file(cls));
  CHECK(drows.size() == 1 + 60 + 1);
  CHECK(drows.back()[1] == "cutoff");
}

TEST_CASE("sweep and bench subcommands", "[cli][sweep]") {
  const fs::path curves = scratch_dir() / "curves.csv";
  const CliRun s = cli({"sweep", "--p", "10,20", "--replications", "2", "--plot-data", curves.string()});
  REQUIRE(s.code == 0);
  const auto rows = detail::split_csv(s.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"p", "alpha", "detector", "mean_fn", "mean_fp", "replications", "seed"});
  CHECK(rows[1][0] == "10");
  CHECK(rows[1][1].empty());
  CHECK(rows[1][6] == "20240101");

  const auto c = detail::split_csv(read_file(curves));
  CHECK(c.size() == 1 + 2 * 2);

  const CliRun sj = cli({"sweep", "--p", "10", "--replications", "2", "--format", "json", "--method", "classical"});
  REQUIRE(sj.code == 0);
  const SweepTable t = sweep_from_json(json::parse(sj.out));
  CHECK(t.rows.size() == 1);
  CHECK(*t.rows[0].alpha == 0.05);
  CHECK(sweep_to_json(t).dump(2) + "\n" == sj.out);

  const fs::path sweep_json = scratch_dir() / "sweep.json";
  write_text(sweep_json.string(), sj.out);
  const CliRun pc = cli({"plotdata", "--kind", "sweep_curves", "--report", sweep_json.string()});
  CHECK(pc.code == 0);
  CHECK(detail::split_csv(pc.out).size() == 3);

  CHECK(cli({"sweep", "--p", "10,x"}).code == 4);
  CHECK(cli({"sweep", "--outliers", "0"}).code == 4);

  const CliRun b = cli({"bench", "--methods", "prcmpout,classical", "--p", "20", "--repeats", "3"});
  REQUIRE(b.code == 0);
  CHECK(detail::split_csv(b.out).size() == 3);
  CHECK(cli({"bench", "--repeats", "2"}).code == 4);
}

#ifdef PCOUT_CLI_PATH
TEST_CASE("executable exit status", "[cli][process]") {
  const fs::path wide = write_matrix_csv("proc_wide.csv", testing::normal_matrix(20, 50, 9));
  auto status = [](const std::string& args) {
    const std::string cmd = std::string(PCOUT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("detect --input " + wide.string()) == 0);
  CHECK(status("detect --input " + wide.string() + " --method classical") == 3);
  CHECK(status("detect --input " + wide.string() + " --alpha 0.1") == 4);
  CHECK(status("detect --input /nonexistent/x.csv") == 2);
  CHECK(status("--help") == 0);
}
#endif
