#include "generators.hpp"

#include "disamgnn/checkpoint.hpp"
#include "disamgnn/dataio.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace disamgnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("disamgnn_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Binomial pmf over 0..n in log space.
std::vector<double> binom_pmf(std::size_t n, double p) {
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    out[k] = std::exp(lg + k * std::log(p) + (n - k) * std::log1p(-p));
  }
  return out;
}

// E[node homophily | degree > 0] and P(degree > 0) for one class.
std::pair<double, double> class_expectation(std::size_t same_pool, std::size_t other_pool, double p_in,
                                            double p_out) {
  const auto a = binom_pmf(same_pool, p_in);
  const auto b = binom_pmf(other_pool, p_out);
  double num = 0.0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] < 1e-300) continue;
    for (std::size_t j = 0; j < b.size(); ++j) num += a[i] * b[j] * static_cast<double>(i) / static_cast<double>(i + j);
  }
  const double connected = 1.0 - a[0] * b[0];
  return {num / connected, connected};
}

}  // namespace

TEST_CASE("splits: 100 nodes at 0.5:1:8.5 give 5/10/85") {
  std::mt19937_64 rng(71);
  Graph g = testutil::random_graph(100, 0.02, 2, 2, rng);
  for (bool strat : {true, false}) {
    Rng r(3);
    const SplitMasks m = make_split(g, SplitRatios{}, strat, r);
    CHECK(m.train.size() == 5);
    CHECK(m.val.size() == 10);
    CHECK(m.test.size() == 85);
    CHECK_NOTHROW(m.validate(g));
  }
}

TEST_CASE("splits reject zero ratios and empty classes") {
  std::mt19937_64 rng(72);
  Graph g = testutil::random_graph(30, 0.1, 2, 2, rng);
  Rng r(1);
  CHECK_THROWS(make_split(g, SplitRatios{1, 0, 0}, true, r));
  CHECK_THROWS(make_split(g, SplitRatios{1, 1, -1}, true, r));
  Graph gap = Graph::build({}, Matrix::Zero(3, 1), {0, 0, 2}, 3);
  CHECK_THROWS(make_split(gap, SplitRatios{}, true, r));
}

TEST_CASE("stratified splits stay within one node of the global fraction per class") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SbmSpec spec = SbmSpec::uniform({300, 300, 60}, 0.02, 0.002, 2, 1.0, seed);
    spec.class_sizes = {137, 41, 9, 300};
    spec.block_probs = Matrix::Constant(4, 4, 0.0);
    spec.class_means = Matrix::Zero(4, 2);
    Graph g = sbm_generate(spec);
    Rng r(seed);
    const SplitMasks m = make_split(g, SplitRatios{}, true, r);
    const auto counts = g.class_counts();
    for (const auto* part : {&m.train, &m.val, &m.test}) {
      const double frac = static_cast<double>(part->size()) / static_cast<double>(g.num_nodes());
      std::vector<double> per(counts.size(), 0.0);
      for (NodeId v : *part) per[g.label(v)] += 1.0;
      for (std::size_t c = 0; c < counts.size(); ++c) CHECK(std::abs(per[c] - frac * counts[c]) <= 1.0 + 1e-9);
    }
    std::vector<int> in_train(counts.size(), 0);
    for (NodeId v : m.train) in_train[g.label(v)] = 1;
    for (int x : in_train) CHECK(x == 1);
  }
}

TEST_CASE("non-stratified splits still cover every class in train") {
  std::vector<ClassId> labels(200, 0);
  labels[17] = 1;
  Graph g = Graph::build({}, Matrix::Zero(200, 1), labels);
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng r(s);
    const SplitMasks m = make_split(g, SplitRatios{}, false, r);
    CHECK(std::find(m.train.begin(), m.train.end(), 17) != m.train.end());
    CHECK(m.train.size() == 10);
  }
}

TEST_CASE("splits are deterministic and disjoint") {
  std::mt19937_64 rng(73);
  Graph g = testutil::random_graph(80, 0.05, 2, 4, rng);
  Rng a(9), b(9);
  const SplitMasks x = make_split(g, SplitRatios{}, true, a);
  const SplitMasks y = make_split(g, SplitRatios{}, true, b);
  CHECK(x.train == y.train);
  CHECK(x.test == y.test);
  CHECK(x.train.size() + x.val.size() + x.test.size() == 80);
}

TEST_CASE("sbm: degenerate probabilities") {
  SbmSpec none = SbmSpec::uniform({4, 4}, 0.0, 0.0, 2, 0.1, 0);
  CHECK(sbm_generate(none).num_edges() == 0);
  SbmSpec tri = SbmSpec::uniform({3, 5}, 1.0, 0.0, 2, 0.1, 0);
  Graph g = sbm_generate(tri);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 2));
  CHECK(g.has_edge(0, 2));
  CHECK_FALSE(g.has_edge(2, 3));
  CHECK(g.label(2) == 0);
  CHECK(g.label(3) == 1);
}

TEST_CASE("sbm: deterministic under seed and validated") {
  const Graph a = sbm_generate(SbmSpec::uniform({20, 20}, 0.2, 0.05, 3, 1.0, 4));
  const Graph b = sbm_generate(SbmSpec::uniform({20, 20}, 0.2, 0.05, 3, 1.0, 4));
  CHECK(a.edge_list() == b.edge_list());
  CHECK(a.features() == b.features());
  SbmSpec bad = SbmSpec::uniform({20, 20}, 1.2, 0.05, 3, 1.0, 4);
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(sbm_generate(bad));
}

TEST_CASE("sbm homophily matches its binomial expectation") {
  const std::vector<std::size_t> sizes{300, 300, 60};
  const double p_in = 0.02, p_out = 0.002;
  std::vector<double> samples;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    samples.push_back(graph_homophily(sbm_generate(SbmSpec::uniform(sizes, p_in, p_out, 2, 1.0, seed))));
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= 20.0;
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  const double se = std::sqrt(var / 19.0 / 20.0);

  double num = 0.0, den = 0.0;
  for (std::size_t n : sizes) {
    const auto [h, connected] = class_expectation(n - 1, 660 - n, p_in, p_out);
    num += static_cast<double>(n) * connected * h;
    den += static_cast<double>(n) * connected;
  }
  const double expected = num / den;
  CHECK(std::abs(mean - expected) < 2.0 * se);
}

TEST_CASE("sbm features are centered on the class means") {
  SbmSpec spec = SbmSpec::uniform({400, 400}, 0.0, 0.0, 3, 0.5, 2);
  Graph g = sbm_generate(spec);
  Matrix mean0 = g.features().topRows(400).colwise().mean();
  CHECK(std::abs(mean0(0, 0) - 1.0) < 0.1);
  CHECK(std::abs(mean0(0, 1)) < 0.1);
  CHECK(std::abs(mean0(0, 2)) < 0.1);
}

TEST_CASE("shipped presets have the stated shape") {
  const SbmSpec amb = ambiguity_preset(0);
  CHECK(amb.class_sizes == std::vector<std::size_t>{300, 300, 60});
  CHECK(amb.sigma == 1.0);
  CHECK(amb.block_probs(0, 2) == doctest::Approx(5.0 * amb.block_probs(0, 1)));
  CHECK(amb.block_probs(1, 2) == doctest::Approx(5.0 * amb.block_probs(0, 1)));
  const SbmSpec sep = separated_preset(0);
  CHECK(sep.block_probs(0, 0) == 0.05);
  CHECK(sep.block_probs(0, 1) == 0.002);
  CHECK(sep.sigma == 0.5);
  CHECK_THROWS(sbm_preset("nope"));
}

TEST_CASE("bundles round-trip exactly, including splits") {
  const fs::path dir = scratch("bundle");
  Graph g = sbm_generate(SbmSpec::uniform({10, 7}, 0.3, 0.05, 4, 1.0, 3));
  Rng r(1);
  const SplitMasks m = make_split(g, SplitRatios{}, true, r);
  save_bundle(dir, g, &m, "toy");
  const Bundle b = load_bundle(dir);
  CHECK(b.name == "toy");
  CHECK(b.graph.features() == g.features());
  CHECK(b.graph.labels() == g.labels());
  CHECK(b.graph.edge_list() == g.edge_list());
  REQUIRE(b.splits);
  CHECK(b.splits->train == m.train);
  CHECK(b.splits->test == m.test);
}

TEST_CASE("bundle loading deduplicates edges and rejects malformed files") {
  const fs::path dir = scratch("raw");
  std::ofstream(dir / "edges.tsv") << "# comment\n0 1\n1 0\n0\t1\n1 2\n";
  std::ofstream(dir / "features.csv") << "1,2\n3,4\n5,6\n";
  std::ofstream(dir / "labels.csv") << "0\n1\n0\n";
  const Bundle b = load_bundle(dir);
  CHECK(b.graph.num_edges() == 2);
  CHECK_FALSE(b.splits);

  std::ofstream(dir / "features.csv") << "1,2\n3\n5,6\n";
  CHECK_THROWS(load_bundle(dir));
  std::ofstream(dir / "features.csv") << "1,2\n3,4\n5,6\n";
  std::ofstream(dir / "labels.csv") << "0\n1\n";
  CHECK_THROWS(load_bundle(dir));
  std::ofstream(dir / "labels.csv") << "0\n1\n0\n";
  std::ofstream(dir / "edges.tsv") << "0 9\n";
  CHECK_THROWS(load_bundle(dir));
  std::ofstream(dir / "edges.tsv") << "0 x\n";
  CHECK_THROWS(load_bundle(dir));
  CHECK_THROWS(load_bundle(dir / "missing"));
}

TEST_CASE("checkpoints round-trip bit-exactly for every backbone") {
  const fs::path dir = scratch("ckpt");
  for (auto b : {Backbone::GCN, Backbone::SAGE, Backbone::GIN, Backbone::SGC}) {
    ModelConfig cfg;
    cfg.backbone = b;
    cfg.hidden = 5;
    cfg.dropout = 0.25;
    Rng rng(4);
    ModelParams mp = init_params(cfg, 3, 4, rng);
    mp.params.front().value(0, 0) = -0.0;
    mp.params.back().value(0, 0) = 1e-310;
    const fs::path manifest = dir / (std::string(to_string(b)) + ".json");
    save_checkpoint(mp, manifest);
    const ModelParams back = load_checkpoint(manifest);
    CHECK(back.config.backbone == b);
    CHECK(back.config.dropout == 0.25);
    REQUIRE(back.params.size() == mp.params.size());
    for (std::size_t i = 0; i < mp.params.size(); ++i) {
      CHECK(back.params[i].name == mp.params[i].name);
      CHECK(std::memcmp(back.params[i].value.data(), mp.params[i].value.data(),
                        sizeof(double) * static_cast<std::size_t>(mp.params[i].value.size())) == 0);
    }
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path dir = scratch("ckpt_bad");
  ModelConfig cfg;
  Rng rng(4);
  ModelParams mp = init_params(cfg, 3, 2, rng);
  const fs::path manifest = dir / "m.json";
  save_checkpoint(mp, manifest);
  nlohmann::json j = nlohmann::json::parse(std::ifstream(manifest));

  auto expect_corrupt = [&](nlohmann::json bad) {
    std::ofstream(manifest) << bad.dump();
    try {
      (void)load_checkpoint(manifest);
      CHECK_MESSAGE(false, "no error");
    } catch (const std::runtime_error& e) {
      CHECK_MESSAGE(std::string(e.what()).find("corrupt checkpoint manifest") != std::string::npos, std::string(e.what()));
    }
  };
  auto shape = j;
  shape["params"][0]["shape"][0] = 4;
  expect_corrupt(shape);
  auto offset = j;
  offset["params"][1]["offset"] = 8;
  expect_corrupt(offset);
  auto kind = j;
  kind["format"] = "other";
  expect_corrupt(kind);
  auto size = j;
  size["blob_bytes"] = 16;
  expect_corrupt(size);
  std::ofstream(manifest) << "{ not json";
  CHECK_THROWS_AS(load_checkpoint(manifest), std::runtime_error);

  std::ofstream(manifest) << j.dump();
  std::filesystem::resize_file(dir / "m.bin", 8);
  CHECK_THROWS_AS(load_checkpoint(manifest), std::runtime_error);
}
