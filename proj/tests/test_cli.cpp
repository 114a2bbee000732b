#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string command =
      std::string(DFUSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path make_temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("dfuse_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small but complete run: K = 4, coarse grid, every rule family.
const char* kTinyConfig = R"({
  "seed": 7,
  "trials": 300,
  "sensors": {"count": 4},
  "grid": {"position_cells": 4, "power_cells": 2},
  "rules": ["cr", "glrt", "bayes", "gb1", "gb2", "blod", "glod", "llr"]
})";

}  // namespace

TEST_CASE("cli exit codes") {
  const fs::path dir = make_temp_dir("exit_codes");

  SECTION("missing config file is an io error (3)") {
    CHECK(run_cli("roc --config " + (dir / "absent.json").string()) == 3);
  }
  SECTION("validation failure is exit 1") {
    write_file(dir / "bad.json", R"({"sensors": {"count": 63}})");
    CHECK(run_cli("roc --config " + (dir / "bad.json").string() +
                  " --out-dir " + dir.string()) == 1);
  }
  SECTION("degenerate statistic is exit 2") {
    write_file(dir / "degenerate.json",
               R"({"trials": 10, "sensors": {"count": 4, "bep": 0.5},
                   "grid": {"position_cells": 2, "power_cells": 2},
                   "rules": ["blod"]})");
    CHECK(run_cli("roc --config " + (dir / "degenerate.json").string() +
                  " --out-dir " + dir.string()) == 2);
  }
  SECTION("unwritable output path is exit 3, before any simulation") {
    write_file(dir / "ok.json", kTinyConfig);
    CHECK(run_cli("roc --config " + (dir / "ok.json").string() +
                  " --out-dir /proc/definitely_unwritable") == 3);
  }
  SECTION("missing subcommand or flags are validation errors") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("roc") == 1);
  }
}

TEST_CASE("cli roc run") {
  const fs::path dir = make_temp_dir("roc");
  write_file(dir / "config.json", kTinyConfig);
  const std::string config = (dir / "config.json").string();

  REQUIRE(run_cli("roc --config " + config + " --out-dir " +
                  (dir / "out1").string()) == 0);
  const std::string csv = read_file(dir / "out1" / "roc.csv");
  CHECK(csv.rfind("rule,pfa,pd\n", 0) == 0);
  CHECK(csv.find("glrt,") != std::string::npos);
  CHECK(csv.find("\r") == std::string::npos);  // LF endings only
  const std::string summary = read_file(dir / "out1" / "roc_summary.json");
  CHECK(summary.find("\"pfa_target\"") != std::string::npos);

  SECTION("byte-identical across repeat runs and thread counts") {
    REQUIRE(run_cli("roc --config " + config + " --threads 1 --out-dir " +
                    (dir / "out_t1").string()) == 0);
    REQUIRE(run_cli("roc --config " + config + " --threads 3 --out-dir " +
                    (dir / "out_t3").string()) == 0);
    CHECK(read_file(dir / "out_t1" / "roc.csv") ==
          read_file(dir / "out_t3" / "roc.csv"));
    CHECK(read_file(dir / "out_t1" / "roc_summary.json") ==
          read_file(dir / "out_t3" / "roc_summary.json"));
    CHECK(read_file(dir / "out_t1" / "roc.csv") == csv);
  }
  SECTION("counting rule alone yields at most K + 2 curve points") {
    write_file(dir / "cr.json",
               R"({"seed": 1, "trials": 100, "sensors": {"count": 4},
                   "grid": {"position_cells": 2, "power_cells": 2},
                   "rules": ["cr"]})");
    REQUIRE(run_cli("roc --config " + (dir / "cr.json").string() +
                    " --out-dir " + (dir / "out_cr").string()) == 0);
    const std::string cr_csv = read_file(dir / "out_cr" / "roc.csv");
    std::size_t rows = 0;
    for (char c : cr_csv) rows += c == '\n';
    CHECK(rows - 1 <= 6);  // header + at most K + 2 points
  }
}

TEST_CASE("cli pdfield run") {
  const fs::path dir = make_temp_dir("pdfield");
  write_file(dir / "config.json",
             R"({"field": {"resolution": 2, "target_position": [0.1, 0.5]}})");
  REQUIRE(run_cli("pdfield --config " + (dir / "config.json").string() +
                  " --out-dir " + dir.string()) == 0);
  const std::string field = read_file(dir / "pdfield.csv");
  std::size_t rows = 0, commas = 0;
  for (char c : field) {
    rows += c == '\n';
    commas += c == ',';
  }
  CHECK(rows == 2);
  CHECK(commas == 2);
  const std::string axes = read_file(dir / "pdfield_axes.csv");
  CHECK(axes.rfind("axis0,", 0) == 0);
  CHECK(axes.find("axis1,") != std::string::npos);
}

TEST_CASE("cli table run") {
  const fs::path dir = make_temp_dir("table");
  write_file(dir / "config.json", R"({
    "seed": 5,
    "trials": 200,
    "sensors": {"count": 4},
    "grid": {"position_cells": 3, "power_cells": 2},
    "rules": ["cr", "glod"],
    "table": {"pfa_target": 0.1,
              "variants": [{"name": "ideal", "bep": 0.0},
                           {"name": "noisy", "bep": 0.1}]}
  })");
  REQUIRE(run_cli("table --config " + (dir / "config.json").string() +
                  " --out-dir " + dir.string()) == 0);
  const std::string table = read_file(dir / "table.csv");
  CHECK(table.rfind("rule,ideal_pd,ideal_pfa,noisy_pd,noisy_pfa\n", 0) == 0);
  CHECK(table.find("\ncr,") != std::string::npos);
  CHECK(table.find("\nglod,") != std::string::npos);
}

TEST_CASE("cli default config exposes the seven table rules") {
  const fs::path dir = make_temp_dir("defaults");
  // Everything default except a tiny trial budget; the summary must carry
  // one entry per default rule.
  write_file(dir / "config.json", R"({"seed": 1, "trials": 64})");
  REQUIRE(run_cli("roc --config " + (dir / "config.json").string() +
                  " --out-dir " + dir.string()) == 0);
  const std::string summary = read_file(dir / "roc_summary.json");
  for (const char* rule :
       {"\"glrt\"", "\"bayes\"", "\"gb1\"", "\"gb2\"", "\"blod\"", "\"cr\"",
        "\"glod\""}) {
    CHECK(summary.find(rule) != std::string::npos);
  }
  CHECK(summary.find("\"llr\"") == std::string::npos);
  // 1e-2 is unresolvable at 64 trials and must be flagged, not faked.
  CHECK(summary.find("\"quantile_unresolvable\": true") != std::string::npos);
}

TEST_CASE("cli selftest") {
  CHECK(run_cli("selftest") == 0);
}
