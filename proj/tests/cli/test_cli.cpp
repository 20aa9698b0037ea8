#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "wsca/csv.hpp"
#include "wsca/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return WARPSCA_CLI_PATH; }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("warpsca-cli-" + std::to_string(uint64_t(::getpid())) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const { return (path / rel).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_capture(const std::string& args) {
  const std::string out = "/tmp/warpsca-cli-out-" + std::to_string(uint64_t(::getpid()));
  const std::string cmd = std::string(cli_path()) + " " + args + " > " + out + " 2>&1";
  (void)!std::system(cmd.c_str());
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  fs::remove(out);
  return ss.str();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("field-boundary prints the formula value") {
  const std::string out = run_capture("field-boundary --d-m 0.025 --lambda-m 0.12");
  CHECK(out.find("0.010417") != std::string::npos);
}

TEST_CASE("simulate is reproducible byte for byte") {
  TempDir dir;
  REQUIRE(run("simulate --kind imma --traces 1000 --seed 7 --out-dir " + dir.str("a")) == 0);
  REQUIRE(run("simulate --kind imma --traces 1000 --seed 7 --out-dir " + dir.str("b")) == 0);
  CHECK(slurp(dir.str("a/traces.krkn")) == slurp(dir.str("b/traces.krkn")));
  CHECK(slurp(dir.str("a/traces.krkn.meta.json")) == slurp(dir.str("b/traces.krkn.meta.json")));
  CHECK(slurp(dir.str("a/run.json")) == slurp(dir.str("b/run.json")));
  CHECK(!slurp(dir.str("a/run.json")).empty());

  REQUIRE(run("simulate --kind imma --traces 1000 --seed 8 --out-dir " + dir.str("c")) == 0);
  CHECK(slurp(dir.str("a/traces.krkn")) != slurp(dir.str("c/traces.krkn")));
}

TEST_CASE("demo attack reaches rank 0") {
  TempDir dir;
  // seed 3 plants a weight with a near-twin rival (2w aliasing), one of the
  // slow-converging cases; the budget covers it
  REQUIRE(run("simulate --kind imma --traces 20000 --seed 3 --out-dir " + dir.str()) == 0);
  REQUIRE(run("attack cpa --in " + dir.str("traces.krkn") + " --out-dir " + dir.str()) == 0);
  const json attack = json::parse(std::ifstream(dir.str("attack.json")));
  CHECK(attack.at("truth_rank") == 0);
  CHECK(attack.at("recovered") == true);

  REQUIRE(run("rank --in " + dir.str("traces.krkn") + " --step 2000 --out-dir " + dir.str()) == 0);
  const wsca::Csv rank = wsca::read_csv(dir.str("rank.csv"));
  CHECK(rank.rows.back()[rank.column("rank")] == 0.0);
}

TEST_CASE("preprocess pipeline composes") {
  TempDir dir;
  REQUIRE(run("simulate --kind imma --traces 200 --seed 5 --jitter 2 --input-groups 20 "
              "--out-dir " +
              dir.str()) == 0);
  REQUIRE(run("preprocess --in " + dir.str("traces.krkn") +
              " --moving-average 2 --average-by-input --out-dir " + dir.str() +
              " --out pre.krkn") == 0);
  const auto [ts, meta] = wsca::read_trace_file(dir.str("pre.krkn"));
  CHECK(ts.n_traces == 20);             // one trace per input group
  CHECK(ts.n_samples == 64 - 8 + 1);    // window = 2 cycles * 4 samples
  CHECK(meta.group_sizes.size() == 20);
}

TEST_CASE("tvla subcommand flags the leaky site") {
  TempDir dir;
  REQUIRE(run("simulate --kind imma --traces 2000 --seed 11 --noise-rel 1.0 --out-dir " +
              dir.str("a")) == 0);
  REQUIRE(run("simulate --kind imma --traces 2000 --seed 12 --noise-rel 1.0 "
              "--randomize-weight --out-dir " +
              dir.str("b")) == 0);
  REQUIRE(run("tvla --group-a " + dir.str("a/traces.krkn") + " --group-b " +
              dir.str("b/traces.krkn") + " --align-range 0 --out-dir " + dir.str()) == 0);
  const json rep = json::parse(std::ifstream(dir.str("tvla.json")));
  CHECK(rep.at("leaky") == true);
  // the imma demo site sits at sample 28
  CHECK(rep.at("argmax_sample") == 28);

  // default alignment aggregates over one clock cycle of shifts and can only
  // raise the envelope
  REQUIRE(run("tvla --group-a " + dir.str("a/traces.krkn") + " --group-b " +
              dir.str("b/traces.krkn") + " --out-dir " + dir.str("agg")) == 0);
  const json agg = json::parse(std::ifstream(dir.str("agg/tvla.json")));
  CHECK(agg.at("leaky") == true);
  CHECK(double(agg.at("max_abs_t")) >= double(rep.at("max_abs_t")));
}

TEST_CASE("quant subcommand reports pinned weights") {
  TempDir dir;
  {
    json w;
    w["weights"] = json::array();
    for (int i = 0; i < 256; ++i) w["weights"].push_back(0.001 * double(i - 128));
    std::ofstream(dir.str("w.json")) << w.dump();
  }
  REQUIRE(run("quant --weights " + dir.str("w.json") + " --bits 8 --block-size 64 --out-dir " +
              dir.str()) == 0);
  const json rep = json::parse(std::ifstream(dir.str("quant-report.json")));
  CHECK(rep.at("n_blocks") == 4);
  CHECK(rep.at("blocks").size() == 4);
}

TEST_CASE("plot subcommand") {
  TempDir dir;
  SUBCASE("renders a rank curve deterministically") {
    wsca::write_csv(dir.str("rank.csv"), {"n_traces", "rank"},
                    {{100, 12}, {200, 3}, {300, 0}, {400, 0}});
    REQUIRE(run("plot --csv " + dir.str("rank.csv") + " --kind rank --out " +
                dir.str("a.svg")) == 0);
    REQUIRE(run("plot --csv " + dir.str("rank.csv") + " --kind rank --out " +
                dir.str("b.svg")) == 0);
    const std::string svg = slurp(dir.str("a.svg"));
    CHECK(svg == slurp(dir.str("b.svg")));
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("key rank") != std::string::npos);
  }
  SUBCASE("empty CSV is an error and writes nothing") {
    std::ofstream(dir.str("empty.csv")) << "candidate,sample,rho\n";
    CHECK(run("plot --csv " + dir.str("empty.csv") + " --kind corr --out " +
              dir.str("no.svg")) == 1);
    CHECK(!fs::exists(dir.str("no.svg")));
  }
  SUBCASE("schema mismatch is an error") {
    wsca::write_csv(dir.str("odd.csv"), {"a", "b"}, {{1, 2}});
    CHECK(run("plot --csv " + dir.str("odd.csv") + " --kind rank --out " + dir.str("no.svg")) ==
          1);
  }
  SUBCASE("the corr peak marker matches the CSV argmax") {
    wsca::write_csv(dir.str("corr.csv"), {"candidate", "sample", "rho"},
                    {{5, 0, 0.1}, {5, 1, -0.2}, {9, 0, 0.85}, {9, 1, 0.3}});
    REQUIRE(run("plot --csv " + dir.str("corr.csv") + " --kind corr --out " +
                dir.str("corr.svg")) == 0);
    const std::string svg = slurp(dir.str("corr.svg"));
    CHECK(svg.find("data-peak-candidate=\"9\"") != std::string::npos);
    CHECK(svg.find("data-x=\"0\"") != std::string::npos);
    CHECK(svg.find("data-y=\"0.85\"") != std::string::npos);
  }
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(run("simulate --no-such-flag") == 2);
  CHECK(run("definitely-not-a-subcommand") == 2);
  CHECK(run("attack cpa --in " + dir.str("missing.krkn")) == 1);
  CHECK(run("--help") == 0);
  CHECK(run("simulate --help") == 0);
}

TEST_CASE("far-field simulate produces an envelope tokens can read") {
  TempDir dir;
  REQUIRE(run("simulate --kind imma --traces 4 --seed 9 --far-field --auto-dc "
              "--distance-m 0.25 --out-dir " +
              dir.str()) == 0);
  const auto [ts, meta] = wsca::read_trace_file(dir.str("traces.krkn"));
  CHECK(ts.n_samples == 64);
  CHECK(meta.extra.contains("far_field"));
  // envelope values are non-negative magnitudes
  for (float v : ts.samples) CHECK(v >= 0.0f);
  REQUIRE(run("tokens --in " + dir.str("traces.krkn") + " --threshold 1e9 --out-dir " +
              dir.str()) == 0);
  CHECK(fs::exists(dir.str("tokens.json")));
  CHECK(fs::exists(dir.str("envelope.csv")));
}
