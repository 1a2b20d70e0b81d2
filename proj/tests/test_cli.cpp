#include "disamgnn/cli.hpp"
#include "disamgnn/dataio.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace disamgnn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "disamgnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("disamgnn_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kQuick{"--epochs", "25", "--warmup", "5", "--refresh", "5", "--quiet"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"train", "--help"}).out.find("--lambda") != std::string::npos);
  CHECK(run({}).code == cli::kConfigError);
  CHECK(run({"train"}).code == cli::kConfigError);
  CHECK(run({"train", "--dataset", "sbm:ambiguity", "--bogus"}).code == cli::kConfigError);
  CHECK(run({"train", "--dataset", "sbm:ambiguity", "--backbone", "gat"}).code == cli::kConfigError);
  CHECK(run({"train", "--dataset", "sbm:nope"}).code == cli::kConfigError);
  CHECK(run({"train", "--dataset", "/definitely/not/here"}).code == cli::kConfigError);
  CHECK(run({"train", "--dataset", "sbm:separated", "--eps2", "0.9"}).code == cli::kConfigError);
  CHECK(run({"train", "--dataset", "sbm:separated", "--seeds", "1,x"}).code == cli::kConfigError);
}

TEST_CASE("list parsing and sweep parameters") {
  CHECK(cli::parse_seed_list("0,1,2") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK_THROWS_AS(cli::parse_seed_list(""), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_seed_list("-1"), cli::ConfigError);
  CHECK(cli::parse_value_list("0.5,1e-3") == std::vector<double>{0.5, 1e-3});
  TrainConfig cfg;
  cli::set_param(cfg, "threshold", 0.6);
  cli::set_param(cfg, "k-aux", 3);
  CHECK(cfg.disam.score_threshold == 0.6);
  CHECK(cfg.disam.k_aux == 3);
  CHECK_THROWS_AS(cli::set_param(cfg, "k-aux", 2.5), cli::ConfigError);
  CHECK_THROWS_AS(cli::set_param(cfg, "colour", 1), cli::ConfigError);
}

TEST_CASE("gen, train and analyze round trip") {
  const fs::path data = scratch("data"), out = scratch("out"), rep = scratch("report");
  const Result g = run({"gen", "--preset", "separated", "--seed", "3", "--out", data.string()});
  REQUIRE(g.code == 0);
  CHECK(fs::exists(data / "splits.json"));

  const Result t = run(with({"train", "--dataset", data.string(), "--seeds", "0,1", "--out", out.string()}, kQuick));
  REQUIRE(t.code == 0);
  for (const char* f : {"history.csv", "checkpoint.json", "checkpoint.bin", "ambiguity.csv", "splits.json"})
    CHECK(fs::exists(out / "seed_1" / f));
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  CHECK(metrics["runs"].size() == 2);
  CHECK(metrics["config"]["lambda"] == 1.0);
  CHECK(metrics["config"]["epochs"] == 25);
  for (const char* split : {"train", "val", "test"})
    for (const char* k : {"acc", "macro_f1", "auroc"}) CHECK(metrics["summary"][split][k].contains("std"));

  // Bundle splits win over the seed.
  CHECK(slurp(out / "seed_0" / "splits.json") == slurp(out / "seed_1" / "splits.json"));

  const Result a = run({"analyze", "--dataset", data.string(), "--checkpoint", (out / "seed_0" / "checkpoint.json").string(),
                        "--ambiguity", (out / "seed_0" / "ambiguity.csv").string(), "--out", rep.string()});
  REQUIRE(a.code == 0);
  CHECK(slurp(rep / "strategy1_report.csv").rfind("group_label,count,accuracy,mean_ambiguity\n", 0) == 0);
  CHECK(slurp(rep / "strategy2_report.csv").find("AdjMinority/LowHomophily") != std::string::npos);
  CHECK(slurp(rep / "ambiguity_by_group.csv").rfind("strategy,group_label,count,accuracy,mean_ambiguity\n1,", 0) == 0);

  const Result wide = run({"analyze", "--dataset", data.string(), "--checkpoint",
                           (out / "seed_0" / "checkpoint.json").string(), "--all-unlabeled", "--out", rep.string()});
  CHECK(wide.code == 0);
  CHECK(run({"analyze", "--dataset", data.string(), "--checkpoint", (rep / "missing.json").string()}).code ==
        cli::kRuntimeError);
}

TEST_CASE("train outputs are reproducible byte for byte") {
  const fs::path a = scratch("rep_a"), b = scratch("rep_b");
  REQUIRE(run(with({"train", "--dataset", "sbm:separated", "--out", a.string()}, kQuick)).code == 0);
  REQUIRE(run(with({"train", "--dataset", "sbm:separated", "--out", b.string()}, kQuick)).code == 0);
  CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
  CHECK(slurp(a / "seed_0" / "history.csv") == slurp(b / "seed_0" / "history.csv"));
  CHECK(slurp(a / "seed_0" / "checkpoint.bin") == slurp(b / "seed_0" / "checkpoint.bin"));
}

TEST_CASE("threshold 1 keeps the ambiguous count at zero") {
  const fs::path out = scratch("th1");
  REQUIRE(run(with({"train", "--dataset", "sbm:separated", "--threshold", "1.0", "--out", out.string()}, kQuick))
              .code == 0);
  std::istringstream hist(slurp(out / "seed_0" / "history.csv"));
  std::string line;
  std::getline(hist, line);
  while (std::getline(hist, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 8);
    CHECK(cells[6] == "0");
  }
}

TEST_CASE("sweep emits one row per value and does not depend on job count") {
  const fs::path one = scratch("sweep1"), two = scratch("sweep2");
  const auto base = with({"sweep", "--dataset", "sbm:separated", "--param", "lambda", "--values", "0.5,0.8,1.0,2.0",
                          "--seeds", "0,1"},
                         kQuick);
  REQUIRE(run(with(base, {"--out", one.string(), "--jobs", "1"})).code == 0);
  REQUIRE(run(with(base, {"--out", two.string(), "--jobs", "3"})).code == 0);
  const std::string csv = slurp(one / "sweep.csv");
  CHECK(csv == slurp(two / "sweep.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("lambda,0.8,2,") != std::string::npos);
  CHECK(run(with({"sweep", "--dataset", "sbm:separated", "--param", "nope", "--values", "1"}, kQuick)).code ==
        cli::kConfigError);
  CHECK(run(with({"sweep", "--dataset", "sbm:separated", "--param", "mu", "--values", "3"}, kQuick)).code ==
        cli::kConfigError);
}

TEST_CASE("divergence maps to the runtime exit code") {
  const fs::path out = scratch("div");
  CHECK(run(with({"train", "--dataset", "sbm:separated", "--lr", "1e306", "--out", out.string()}, kQuick)).code ==
        cli::kRuntimeError);
}

TEST_CASE("dataset root from the environment") {
  const fs::path root = scratch("root");
  REQUIRE(run({"gen", "--preset", "separated", "--out", (root / "toy").string()}).code == 0);
  setenv("DISAMGNN_DATA", root.c_str(), 1);
  const Bundle b = cli::resolve_dataset("toy", 0);
  CHECK(b.graph.num_nodes() == 600);
  unsetenv("DISAMGNN_DATA");
  CHECK_THROWS_AS(cli::resolve_dataset("toy", 0), cli::ConfigError);
}
