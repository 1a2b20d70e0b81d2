#include "disamgnn/dataio.hpp"

#include "disamgnn/format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace disamgnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <class T>
T parse_number(std::string_view s, const fs::path& file, std::size_t line) {
  s = trim(s);
  T value{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(file.string() + ":" + std::to_string(line) + ": cannot parse '" + std::string(s) + "'");
  }
  return value;
}

std::vector<Edge> read_edges(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss{std::string(t)};
    std::string a, b, extra;
    if (!(ss >> a >> b) || (ss >> extra)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected two node ids");
    }
    edges.emplace_back(parse_number<std::size_t>(a, path, lineno), parse_number<std::size_t>(b, path, lineno));
  }
  return edges;
}

Matrix read_features(const fs::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = t.find(',', start);
      const auto field = t.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      values.push_back(parse_number<double>(field, path, lineno));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": ragged row (" +
                               std::to_string(count) + " values, expected " + std::to_string(cols) + ")");
    }
    ++rows;
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

std::vector<ClassId> read_labels(const fs::path& path) {
  auto in = open_in(path);
  std::vector<ClassId> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty()) continue;
    labels.push_back(parse_number<ClassId>(t, path, lineno));
  }
  return labels;
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_splits_json(const fs::path& path, const SplitMasks& masks) {
  json j{{"train", masks.train}, {"val", masks.val}, {"test", masks.test}};
  open_out(path) << j.dump() << '\n';
}

SplitMasks read_splits_json(const fs::path& path) {
  const json j = read_json(path);
  try {
    return SplitMasks{j.at("train").get<std::vector<NodeId>>(), j.at("val").get<std::vector<NodeId>>(),
                      j.at("test").get<std::vector<NodeId>>()};
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Bundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir.string());
  auto edges = read_edges(dir / "edges.tsv");
  Matrix features = read_features(dir / "features.csv");
  auto labels = read_labels(dir / "labels.csv");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::runtime_error("features.csv has " + std::to_string(features.rows()) + " rows but labels.csv has " +
                             std::to_string(labels.size()) + " labels");
  }

  std::optional<std::size_t> num_classes;
  std::string name = dir.filename().string();
  if (fs::exists(dir / "meta.json")) {
    const json meta = read_json(dir / "meta.json");
    if (meta.contains("name")) name = meta["name"].get<std::string>();
    if (meta.contains("C")) num_classes = meta["C"].get<std::size_t>();
    if (meta.contains("N") && meta["N"].get<std::size_t>() != labels.size()) {
      throw std::runtime_error("meta.json N disagrees with labels.csv");
    }
    if (meta.contains("d") && meta["d"].get<std::size_t>() != static_cast<std::size_t>(features.cols())) {
      throw std::runtime_error("meta.json d disagrees with features.csv");
    }
  }

  Bundle b{Graph::build(edges, std::move(features), std::move(labels), num_classes), std::nullopt, name};
  if (fs::exists(dir / "splits.json")) {
    SplitMasks masks = read_splits_json(dir / "splits.json");
    masks.validate(b.graph);
    b.splits = std::move(masks);
  }
  return b;
}

void save_bundle(const fs::path& dir, const Graph& g, const SplitMasks* splits, std::string_view name) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "edges.tsv");
    for (const auto& [u, v] : g.edge_list()) out << u << '\t' << v << '\n';
  }
  {
    auto out = open_out(dir / "features.csv");
    const Matrix& x = g.features();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (c > 0) out << ',';
        out << format_real(x(r, c));
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "labels.csv");
    for (ClassId y : g.labels()) out << y << '\n';
  }
  {
    json meta{{"name", std::string(name)}, {"C", g.num_classes()}, {"d", g.feature_dim()}, {"N", g.num_nodes()}};
    open_out(dir / "meta.json") << meta.dump() << '\n';
  }
  if (splits != nullptr) write_splits_json(dir / "splits.json", *splits);
}

namespace {

// Largest-remainder apportionment of `total` slots proportional to `weights`,
// never exceeding `caps`. With `at_least_one`, every class with capacity gets
// one slot even if that overshoots `total`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& weights, const std::vector<std::size_t>& caps,
                                   std::size_t total, bool at_least_one) {
  const std::size_t c = weights.size();
  const double wsum = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
  std::vector<double> quota(c);
  std::vector<std::size_t> alloc(c);
  std::size_t used = 0;
  for (std::size_t k = 0; k < c; ++k) {
    quota[k] = wsum > 0 ? static_cast<double>(total) * static_cast<double>(weights[k]) / wsum : 0.0;
    alloc[k] = std::min(caps[k], static_cast<std::size_t>(std::floor(quota[k])));
    if (at_least_one && alloc[k] == 0 && caps[k] > 0) alloc[k] = 1;
    used += alloc[k];
  }
  std::vector<std::size_t> order(c);
  while (used < total) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return quota[a] - static_cast<double>(alloc[a]) > quota[b] - static_cast<double>(alloc[b]);
    });
    bool progressed = false;
    for (std::size_t k : order) {
      if (used == total) break;
      if (alloc[k] < caps[k]) {
        ++alloc[k];
        ++used;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  while (used > total) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return static_cast<double>(alloc[a]) - quota[a] > static_cast<double>(alloc[b]) - quota[b];
    });
    bool progressed = false;
    for (std::size_t k : order) {
      if (alloc[k] > (at_least_one ? 1u : 0u)) {
        --alloc[k];
        --used;
        progressed = true;
        break;
      }
    }
    if (!progressed) break;
  }
  return alloc;
}

}  // namespace

SplitMasks make_split(const Graph& g, SplitRatios ratios, bool stratified, Rng& rng) {
  for (double r : {ratios.train, ratios.val, ratios.test}) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("split ratios must all be positive (train, val and test are required)");
    }
  }
  const auto counts = g.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw std::invalid_argument("class " + std::to_string(k) + " has no members");
  }
  const std::size_t n = g.num_nodes();
  const double total = ratios.train + ratios.val + ratios.test;
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train / total));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.val / total));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw std::invalid_argument("graph too small for the requested split ratios");
  }

  SplitMasks m;
  if (stratified) {
    std::vector<std::vector<NodeId>> members(counts.size());
    for (NodeId v = 0; v < n; ++v) members[g.label(v)].push_back(v);
    const auto train_alloc = apportion(counts, counts, n_train, true);
    std::vector<std::size_t> left(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) left[k] = counts[k] - train_alloc[k];
    const auto val_alloc = apportion(counts, left, n_val, false);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      auto& pool = members[k];
      std::shuffle(pool.begin(), pool.end(), rng);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i < train_alloc[k]) {
          m.train.push_back(pool[i]);
        } else if (i < train_alloc[k] + val_alloc[k]) {
          m.val.push_back(pool[i]);
        } else {
          m.test.push_back(pool[i]);
        }
      }
    }
  } else {
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> train_count(counts.size(), 0);
    for (std::size_t i = 0; i < n_train; ++i) ++train_count[g.label(perm[i])];
    // Pull the first unseen member of each missing class into train, giving
    // back a node from the best-covered class.
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (train_count[k] > 0) continue;
      const auto donor_class = static_cast<std::size_t>(
          std::max_element(train_count.begin(), train_count.end()) - train_count.begin());
      std::size_t donor = 0;
      while (g.label(perm[donor]) != donor_class) ++donor;
      std::size_t taker = n_train;
      while (g.label(perm[taker]) != k) ++taker;
      std::swap(perm[donor], perm[taker]);
      --train_count[donor_class];
      ++train_count[k];
    }
    m.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    m.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    m.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  }
  std::sort(m.train.begin(), m.train.end());
  std::sort(m.val.begin(), m.val.end());
  std::sort(m.test.begin(), m.test.end());
  return m;
}

SbmSpec SbmSpec::uniform(std::vector<std::size_t> sizes, double intra_p, double inter_p, std::size_t feature_dim,
                         double sigma, std::uint64_t seed) {
  const auto c = static_cast<Eigen::Index>(sizes.size());
  SbmSpec s;
  s.class_sizes = std::move(sizes);
  s.block_probs = Matrix::Constant(c, c, inter_p);
  s.block_probs.diagonal().setConstant(intra_p);
  s.class_means = Matrix::Zero(c, static_cast<Eigen::Index>(std::max<std::size_t>(feature_dim, s.class_sizes.size())));
  for (Eigen::Index k = 0; k < c; ++k) s.class_means(k, k) = 1.0;
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

void SbmSpec::validate() const {
  const auto c = static_cast<Eigen::Index>(class_sizes.size());
  if (c < 2) throw std::invalid_argument("SBM needs at least 2 classes");
  for (std::size_t s : class_sizes) {
    if (s == 0) throw std::invalid_argument("SBM class sizes must be >= 1");
  }
  if (block_probs.rows() != c || block_probs.cols() != c) throw std::invalid_argument("SBM block matrix must be C x C");
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      const double p = block_probs(i, j);
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("SBM probabilities must be in [0, 1]");
      if (p != block_probs(j, i)) throw std::invalid_argument("SBM block matrix must be symmetric");
    }
  }
  if (class_means.rows() != c || class_means.cols() < 1) throw std::invalid_argument("SBM needs C x d class means");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("SBM sigma must be >= 0");
}

Graph sbm_generate(const SbmSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<ClassId> labels;
  for (std::size_t k = 0; k < spec.class_sizes.size(); ++k) labels.insert(labels.end(), spec.class_sizes[k], k);
  const std::size_t n = labels.size();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const double p = spec.block_probs(static_cast<Eigen::Index>(labels[u]), static_cast<Eigen::Index>(labels[v]));
      if (unit(rng) < p) edges.emplace_back(u, v);
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), spec.class_means.cols());
  for (NodeId v = 0; v < n; ++v) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      x(static_cast<Eigen::Index>(v), c) =
          spec.class_means(static_cast<Eigen::Index>(labels[v]), c) + spec.sigma * noise(rng);
    }
  }
  return Graph::build(edges, std::move(x), std::move(labels), spec.class_sizes.size());
}

SbmSpec ambiguity_preset(std::uint64_t seed) {
  constexpr double kIntra = 0.03;
  constexpr double kMajorInter = 0.002;
  SbmSpec s = SbmSpec::uniform({300, 300, 60}, kIntra, kMajorInter, 16, 1.0, seed);
  // minority block sits between both majorities
  s.block_probs(0, 2) = s.block_probs(2, 0) = 5.0 * kMajorInter;
  s.block_probs(1, 2) = s.block_probs(2, 1) = 5.0 * kMajorInter;
  return s;
}

SbmSpec separated_preset(std::uint64_t seed) {
  return SbmSpec::uniform({200, 200, 200}, 0.05, 0.002, 16, 0.5, seed);
}

SbmSpec sbm_preset(std::string_view name, std::uint64_t seed) {
  if (name == "ambiguity") return ambiguity_preset(seed);
  if (name == "separated") return separated_preset(seed);
  throw std::invalid_argument("unknown SBM preset '" + std::string(name) + "'");
}

}  // namespace disamgnn
