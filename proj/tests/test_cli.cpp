#include <atomic>
#include <filesystem>
#include <set>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "helpers.hpp"
#include "pertlab/cli.hpp"
#include "pertlab/errors.hpp"
#include "pertlab/io.hpp"

namespace fs = std::filesystem;
using namespace pertlab;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() / ("pertlab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Invocation {
  int status;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "pertlab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int status = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::string write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  io::write_atomic(p, body);
  return p.string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate writes reports and a manifest") {
    TempDir tmp;
    const auto r = invoke({"validate", "--model", testing::model_path("two_lane_tasep.model"), "--out", tmp.path.string()});
    CHECK(r.status == 0);
    CHECK(fs::exists(tmp.path / "validation.json"));
    CHECK(fs::exists(tmp.path / "validation.txt"));
    const std::string manifest = io::read_text(tmp.path / "manifest.json");
    CHECK(manifest.find("\"version\": \"0.1.0\"") != std::string::npos);
    CHECK(manifest.find("fnv1a64") != std::string::npos);
  }

  TEST_CASE("beta outside its admissible range is a config error") {
    TempDir tmp;
    const auto r = invoke({"exact-entropy", "--model", testing::model_path("two_lane_tasep.model"), "--n", "3",
                           "--beta", "0.3", "--u0", "0.3", "--v0", "0.7", "--u-star", "cos:0.2", "--t-end", "0.1",
                           "--points", "3", "--out", tmp.path.string()});
    CHECK(r.status == 2);
    CHECK(r.err.find("(0, 1/5)") != std::string::npos);
  }

  TEST_CASE("missing model file is a config error") {
    TempDir tmp;
    const auto r = invoke({"validate", "--model", (tmp.path / "nope.model").string(), "--out", tmp.path.string()});
    CHECK(r.status == 2);
    CHECK(r.err.find("does not exist") != std::string::npos);
  }

  TEST_CASE("times past the shock are a domain error naming the guard") {
    TempDir tmp;
    const auto r = invoke({"waves-solve", "--model", testing::model_path("two_lane_tasep.model"), "--u0", "0.3",
                           "--v0", "0.7", "--u-star", "cos:0.3", "--v-star", "sin:0.3", "--times", "0.1,500",
                           "--out", tmp.path.string()});
    CHECK(r.status == 3);
    CHECK(r.err.find("shock-time") != std::string::npos);
  }

  TEST_CASE("waves-solve writes profiles and coefficients") {
    TempDir tmp;
    const auto r = invoke({"waves-solve", "--model", testing::model_path("coupled_two_lane.model"), "--u0", "0.3",
                           "--v0", "0.6", "--u-star", "cos:0.2", "--times", "0,0.1", "--cells", "128", "--out",
                           tmp.path.string()});
    CHECK(r.status == 0);
    const io::CsvDocument doc = io::CsvDocument::parse(io::read_text(tmp.path / "waves.csv"));
    CHECK(doc.meta_value("schema") == "pertlab.waves/1");
    CHECK(doc.rows.size() == 2 * 128);
    CHECK(fs::exists(tmp.path / "geo.json"));
  }

  TEST_CASE("unknown modes and malformed configs") {
    CHECK_THROWS_AS(cli::run_config(R"({"mode":"bogus"})", ".", {}), ConfigError);
    CHECK_THROWS_AS(cli::run_config("not json", ".", {}), ConfigError);
    CHECK_THROWS_AS(cli::run_config(R"({"params":{}})", ".", {}), ConfigError);
    TempDir tmp;
    const auto r = invoke({"run", "--config", write_config(tmp.path, R"({"mode":"bogus"})")});
    CHECK(r.status == 2);
    CHECK(invoke({"frobnicate"}).status == 2);
  }

  TEST_CASE("experiment reruns are byte-identical and plotdata reshapes them") {
    TempDir tmp;
    const std::string cfg = R"({"mode":"experiment","model":")" + testing::model_path("two_lane_tasep.model") +
                            R"(","seeds":{"start":7,"count":3},"params":{"n":[16,32],"beta":0.1,"u0":0.3,"v0":0.7,
      "u_star":{"shape":"cos","amplitude":0.3},"v_star":{"shape":"sin","amplitude":0.3},"times":[0.1,0.2],
      "test_functions":["one","cos"],"wave_cells":256}})";
    const std::string path = write_config(tmp.path, cfg);
    const fs::path a = tmp.path / "a", b = tmp.path / "b";
    REQUIRE(invoke({"run", "--config", path, "--out", a.string(), "--threads", "2"}).status == 0);
    REQUIRE(invoke({"run", "--config", path, "--out", b.string(), "--threads", "1"}).status == 0);
    for (const char* f : {"residuals.csv", "residual_summary.csv", "trend.csv"})
      CHECK(io::read_text(a / f) == io::read_text(b / f));

    const std::string summary = io::read_text(a / "residual_summary.csv");
    const io::CsvDocument plot = io::CsvDocument::parse(cli::emit_plotdata({summary}));
    // 2 sizes x 2 test functions x 2 times; per row 2 components x 2 stats + count.
    CHECK(plot.rows.size() == 2 * 2 * 2 * 5);
    std::set<std::string> series;
    for (const auto& row : plot.rows) series.insert(row[0]);
    CHECK(series.count("g=cos;n=32;component=v;stat=mean_abs") == 1);
    CHECK(series.size() == 2 * 2 * 5);

    const auto pr = invoke({"plotdata", "--input", (a / "trend.csv").string(), "--out", a.string()});
    CHECK(pr.status == 0);
    CHECK(fs::exists(a / "plotdata.csv"));
  }

  TEST_CASE("plotdata of empty and entropy reports") {
    const std::string empty = cli::emit_plotdata({});
    CHECK(empty == "# schema: pertlab.plotdata/1\nseries,x,y,stderr\n");
    TempDir tmp;
    const auto r = invoke({"exact-entropy", "--model", testing::model_path("two_lane_tasep.model"), "--n", "3",
                           "--beta", "0.1", "--u0", "0.3", "--v0", "0.7", "--u-star", "cos:0.2", "--t-end", "0.2",
                           "--points", "4", "--out", tmp.path.string()});
    REQUIRE(r.status == 0);
    const io::CsvDocument plot =
        io::CsvDocument::parse(cli::emit_plotdata({io::read_text(tmp.path / "entropy.csv")}));
    std::set<std::string> series;
    for (const auto& row : plot.rows) series.insert(row[0]);
    CHECK(series == std::set<std::string>{"H_nu", "H_nutilde", "H_pi"});
    CHECK(plot.rows.size() == 12);
    CHECK_THROWS_AS(cli::emit_plotdata({"# schema: other/1\na,b\n1,2\n"}), ConfigError);
  }

  TEST_CASE("synthesize recovers a valid model from a support listing") {
    TempDir tmp;
    const auto r = invoke({"synthesize", "--problem", testing::model_path("coupled_support.model"), "--out",
                           tmp.path.string()});
    REQUIRE(r.status == 0);
    const ModelSpec spec = load_model_spec((tmp.path / "synthesized.model").string());
    CHECK(max_cyclic_residual(spec) <= 1e-10);
    const auto v = invoke({"validate", "--model", (tmp.path / "synthesized.model").string(), "--out",
                           (tmp.path / "v").string()});
    CHECK(v.status == 0);
  }

  TEST_CASE("gap-scan on a small range") {
    TempDir tmp;
    const auto r = invoke({"gap-scan", "--model", testing::model_path("two_lane_tasep.model"), "--l-min", "2",
                           "--l-max", "4", "--out", tmp.path.string()});
    CHECK(r.status == 0);
    const io::CsvDocument doc = io::CsvDocument::parse(io::read_text(tmp.path / "gap_summary.csv"));
    CHECK(doc.rows.size() == 3);
  }
}
