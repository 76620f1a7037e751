// End-to-end tests that spawn the real binary. DETKIT_CLI_PATH and
// DETKIT_DATA_DIR come from the build system.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("detkit_cli_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

CliResult run_cli(const std::string& args) {
  static std::mt19937_64 rng(std::random_device{}());
  const fs::path out_file =
      fs::temp_directory_path() / ("detkit_out_" + std::to_string(rng()));
  const fs::path err_file =
      fs::temp_directory_path() / ("detkit_err_" + std::to_string(rng()));
  const std::string command = std::string(DETKIT_CLI_PATH) + " " + args +
                              " > " + out_file.string() + " 2> " +
                              err_file.string();
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_file);
  result.err = read_file(err_file);
  std::error_code ec;
  fs::remove(out_file, ec);
  fs::remove(err_file, ec);
  return result;
}

const std::string kData = DETKIT_DATA_DIR;
const std::string kMicroArgs = " --gt " + kData + "/micro/labels --pred " +
                               kData + "/micro/preds --classes " + kData +
                               "/micro/classes.txt";

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("evaluate --no-such-flag x").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("validate") {
  SUBCASE("clean micro dataset") {
    const auto result = run_cli("validate " + kData + "/micro/labels" +
                                " --classes " + kData + "/micro/classes.txt");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("| Bottle | 2 |") != std::string::npos);
    CHECK(result.out.find("zero-instance classes: Clothes, Wood") !=
          std::string::npos);
  }

  SUBCASE("malformed line names file and line") {
    const auto result = run_cli("validate " + kData + "/bad --classes " +
                                kData + "/micro/classes.txt");
    CHECK(result.exit_code == 3);
    CHECK(result.err.find("broken.txt:2") != std::string::npos);
    CHECK(result.err.find("'oops'") != std::string::npos);
  }

  SUBCASE("json format") {
    const auto result =
        run_cli("validate " + kData + "/micro/labels --classes " + kData +
                "/micro/classes.txt --format json");
    CHECK(result.exit_code == 0);
    const auto j = nlohmann::json::parse(result.out);
    CHECK(j["images"] == 3);
    CHECK(j["per_class"]["Bottle"] == 2);
    CHECK(j["zero_instance_classes"].size() == 2);
  }
}

TEST_CASE("evaluate golden report") {
  const std::string golden = read_file(kData + "/golden/eval_report.md");
  REQUIRE(!golden.empty());

  SUBCASE("byte-identical across runs") {
    const auto first = run_cli("evaluate" + kMicroArgs);
    const auto second = run_cli("evaluate" + kMicroArgs);
    CHECK(first.exit_code == 0);
    CHECK(first.out == golden);
    CHECK(second.out == golden);
  }

  SUBCASE("byte-identical across worker counts") {
    for (const int workers : {1, 2, 8}) {
      const auto result = run_cli("evaluate" + kMicroArgs + " --workers " +
                                  std::to_string(workers));
      CHECK(result.exit_code == 0);
      CHECK(result.out == golden);
    }
  }

  SUBCASE("machine formats parse and agree") {
    const auto as_json = run_cli("evaluate" + kMicroArgs + " --format json");
    CHECK(as_json.exit_code == 0);
    const auto j = nlohmann::json::parse(as_json.out);
    CHECK(j["aggregate"]["map50"] == 0.8);
    CHECK(j["aggregate"]["map50_95"] == 0.72);
    CHECK(j["skipped_classes"].size() == 2);

    const auto as_csv = run_cli("evaluate" + kMicroArgs + " --format csv");
    CHECK(as_csv.exit_code == 0);
    CHECK(as_csv.out.find("all,6,0.8000,0.8000,0.8000,0.7200") !=
          std::string::npos);
  }

  SUBCASE("continuous interpolation differs but stays sane") {
    const auto result =
        run_cli("evaluate" + kMicroArgs + " --interp continuous");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("interpolation: continuous") != std::string::npos);
  }

  SUBCASE("pr curves are emitted as data") {
    TempDir tmp;
    const auto result = run_cli("evaluate" + kMicroArgs + " --dump-pr " +
                                (tmp.path / "pr").string());
    CHECK(result.exit_code == 0);
    const std::string bottle = read_file(tmp.path / "pr" / "Bottle_pr.csv");
    CHECK(bottle.find("confidence,precision,recall") == 0);
    CHECK(bottle.find("0.920000") != std::string::npos);
  }

  SUBCASE("explain prints the resolved configuration to stderr") {
    const auto result = run_cli("evaluate" + kMicroArgs + " --explain");
    CHECK(result.exit_code == 0);
    CHECK(result.err.find("resolved configuration") != std::string::npos);
    CHECK(result.out == golden);  // stdout untouched
  }
}

TEST_CASE("evaluate input validation") {
  TempDir tmp;
  SUBCASE("prediction with out-of-range class id") {
    write_file(tmp.path / "preds" / "beach_001.txt",
               "9 0.9 0.5 0.5 0.2 0.2\n");
    const auto result = run_cli("evaluate --gt " + kData + "/micro/labels" +
                                " --pred " + (tmp.path / "preds").string() +
                                " --classes " + kData + "/micro/classes.txt");
    CHECK(result.exit_code == 3);
    CHECK(result.err.find("class id 9") != std::string::npos);
  }

  SUBCASE("empty ground truth is a usage error") {
    fs::create_directories(tmp.path / "gt");
    fs::create_directories(tmp.path / "preds");
    write_file(tmp.path / "gt" / "img.txt", "");
    const auto result =
        run_cli("evaluate --gt " + (tmp.path / "gt").string() + " --pred " +
                (tmp.path / "preds").string() + " --classes Bottle,Metal");
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("nothing to evaluate") != std::string::npos);
  }
}

TEST_CASE("confusion") {
  SUBCASE("micro dataset shows the rope-to-background miss") {
    const auto result = run_cli("confusion" + kMicroArgs);
    CHECK(result.exit_code == 0);
    CHECK(result.out.find(
              "| Rope | 0 | 0 | 0 | 0 | 0 | 0 | 0 | 1 |") !=
          std::string::npos);
  }

  SUBCASE("silent detector sends all mass to background") {
    TempDir tmp;
    fs::create_directories(tmp.path / "empty_preds");
    const auto result = run_cli(
        "confusion --gt " + kData + "/micro/labels --pred " +
        (tmp.path / "empty_preds").string() + " --classes " + kData +
        "/micro/classes.txt --format json");
    CHECK(result.exit_code == 0);
    const auto j = nlohmann::json::parse(result.out);
    const auto& counts = j["counts"];
    // every ground truth lands in the background column (last)
    int bg = 0;
    for (const auto& row : counts) {
      for (std::size_t c = 0; c + 1 < row.size(); ++c) CHECK(row[c] == 0);
      bg += row.back().get<int>();
    }
    CHECK(bg == 6);
  }

  SUBCASE("threshold flags are honored and validated") {
    const auto ok = run_cli("confusion" + kMicroArgs + " --conf 0.5 --iou 0.3");
    CHECK(ok.exit_code == 0);
    const auto bad = run_cli("confusion" + kMicroArgs + " --conf 1.5");
    CHECK(bad.exit_code == 2);
  }
}

TEST_CASE("loss-audit") {
  SUBCASE("both modes by default") {
    const auto result =
        run_cli("loss-audit --pairs " + kData + "/loss_pairs.json");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("| verbatim |") != std::string::npos);
    CHECK(result.out.find("| corrected |") != std::string::npos);
  }

  SUBCASE("single mode when requested") {
    const auto result = run_cli("loss-audit --pairs " + kData +
                                "/loss_pairs.json --loss-mode corrected" +
                                " --format json");
    CHECK(result.exit_code == 0);
    const auto j = nlohmann::json::parse(result.out);
    CHECK(j["modes"].size() == 1);
    CHECK(j["modes"][0]["mode"] == "corrected");
    CHECK(j["modes"][0]["total"].get<double>() >= 0.0);
  }

  SUBCASE("unknown mode is a usage error") {
    const auto result = run_cli("loss-audit --pairs " + kData +
                                "/loss_pairs.json --loss-mode hybrid");
    CHECK(result.exit_code == 2);
  }

  SUBCASE("weight overrides flow through") {
    const auto base = run_cli("loss-audit --pairs " + kData +
                              "/loss_pairs.json --format json");
    const auto heavy = run_cli("loss-audit --pairs " + kData +
                               "/loss_pairs.json --lambda-giou 10 "
                               "--format json");
    const auto jb = nlohmann::json::parse(base.out);
    const auto jh = nlohmann::json::parse(heavy.out);
    CHECK(jh["weights"]["lambda_giou"] == 10.0);
    CHECK(jh["modes"][1]["giou_term"].get<double>() ==
          doctest::Approx(5.0 * jb["modes"][1]["giou_term"].get<double>())
              .epsilon(1e-6));
  }
}

TEST_CASE("match") {
  SUBCASE("cost matrix file") {
    const auto result = run_cli("match --cost " + kData + "/cost.json");
    CHECK(result.exit_code == 0);
    const auto j = nlohmann::json::parse(result.out);
    CHECK(j["total_cost"] == 5.0);
    CHECK(j["pairs"].size() == 3);
  }

  SUBCASE("prediction/ground-truth pair file") {
    const auto result = run_cli("match --pairs " + kData +
                                "/match_pairs.json");
    CHECK(result.exit_code == 0);
    const auto j = nlohmann::json::parse(result.out);
    // three predictions, two ground truths: two matched pairs
    CHECK(j["pairs"].size() == 2);
    CHECK(j["pairs"][0][0] == 0);
    CHECK(j["pairs"][0][1] == 0);
    CHECK(j["pairs"][1][0] == 1);
    CHECK(j["pairs"][1][1] == 1);
  }

  SUBCASE("exactly one input source") {
    CHECK(run_cli("match").exit_code == 2);
    CHECK(run_cli("match --cost " + kData + "/cost.json --pairs " + kData +
                  "/match_pairs.json")
              .exit_code == 2);
  }

  SUBCASE("non-finite entries are rejected") {
    TempDir tmp;
    write_file(tmp.path / "bad.json", "[[1.0, 2.0], [3.0, \"x\"]]");
    const auto result =
        run_cli("match --cost " + (tmp.path / "bad.json").string());
    CHECK(result.exit_code == 3);
  }
}

TEST_CASE("bench") {
  TempDir tmp;
  write_file(tmp.path / "inputs.txt", "frame_a\nframe_b\n");

  SUBCASE("sleep stub adapter") {
    const auto result = run_cli(
        "bench --adapter 'while read l; do sleep 0.01; echo \"$l\"; done' "
        "--inputs " +
        (tmp.path / "inputs.txt").string() + " --warmup 1 --iters 3");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("| 3 |") != std::string::npos);
    CHECK(result.out.find("end-to-end adapter wall-clock") !=
          std::string::npos);
  }

  SUBCASE("crashing adapter aborts with a partial report") {
    const auto result = run_cli(
        "bench --adapter 'read l; echo \"$l\"; exit 1' --inputs " +
        (tmp.path / "inputs.txt").string() + " --warmup 0 --iters 5");
    CHECK(result.exit_code == 4);
    CHECK(result.err.find("partial report") != std::string::npos);
  }

  SUBCASE("bad iteration counts are usage errors") {
    const auto result = run_cli("bench --adapter cat --inputs " +
                                (tmp.path / "inputs.txt").string() +
                                " --iters 0");
    CHECK(result.exit_code == 2);
  }
}

TEST_CASE("report") {
  SUBCASE("markdown mirrors the comparison table") {
    const auto result = run_cli("report --models " + kData + "/models.json");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("49.75") != std::string::npos);
    CHECK(result.out.find("28.99") != std::string::npos);
    CHECK(result.out.find("2.05x") != std::string::npos);
    CHECK(result.out.find("2.17x") != std::string::npos);
    CHECK(result.out.find("+71.6%") != std::string::npos);
  }

  SUBCASE("empty models file is a usage error") {
    TempDir tmp;
    write_file(tmp.path / "empty.json", "[]");
    const auto result =
        run_cli("report --models " + (tmp.path / "empty.json").string());
    CHECK(result.exit_code == 2);
  }

  SUBCASE("missing file is caught by option validation") {
    const auto result = run_cli("report --models /nonexistent/models.json");
    CHECK(result.exit_code == 2);
  }
}
