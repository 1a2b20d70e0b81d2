#include "disamgnn/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace disamgnn {

Graph Graph::build(std::span<const Edge> edges, Matrix features, std::vector<ClassId> labels,
                   std::optional<std::size_t> num_classes) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(features.rows()) != n) {
    throw std::invalid_argument("feature rows (" + std::to_string(features.rows()) +
                                ") do not match label count (" + std::to_string(n) + ")");
  }
  std::size_t max_label = 0;
  for (ClassId y : labels) max_label = std::max(max_label, y);
  const std::size_t classes = num_classes.value_or(n == 0 ? 0 : max_label + 1);
  if (n > 0 && max_label >= classes) {
    throw std::invalid_argument("label " + std::to_string(max_label) + " outside class range " +
                                std::to_string(classes));
  }
  if (classes < 2) throw std::invalid_argument("graph needs at least 2 classes");
  if (!features.allFinite()) throw std::invalid_argument("features contain non-finite values");

  std::vector<std::vector<NodeId>> adjacency(n);
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      throw std::out_of_range("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") references a node outside 0.." + std::to_string(n));
    }
    if (u == v) continue;
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
  }

  Graph g;
  g.offsets_.reserve(n + 1);
  g.offsets_.push_back(0);
  for (auto& row : adjacency) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.targets_.insert(g.targets_.end(), row.begin(), row.end());
    g.offsets_.push_back(g.targets_.size());
  }
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.num_classes_ = classes;
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto row = neighbors(u);
  return std::binary_search(row.begin(), row.end(), v);
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

std::vector<std::size_t> Graph::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (ClassId y : labels_) ++counts[y];
  return counts;
}

void SplitMasks::validate(const Graph& g) const {
  if (train.empty()) throw std::invalid_argument("train mask is empty");
  std::vector<int> owner(g.num_nodes(), -1);
  auto mark = [&](const std::vector<NodeId>& nodes, int tag, const char* name) {
    for (NodeId v : nodes) {
      if (v >= g.num_nodes()) {
        throw std::out_of_range(std::string(name) + " mask node " + std::to_string(v) +
                                " outside graph");
      }
      if (owner[v] != -1) {
        throw std::invalid_argument("node " + std::to_string(v) + " appears in more than one split");
      }
      owner[v] = tag;
    }
  };
  mark(train, 0, "train");
  mark(val, 1, "val");
  mark(test, 2, "test");
}

double node_homophily(const Graph& g, NodeId v) {
  auto nbrs = g.neighbors(v);
  if (nbrs.empty()) return 1.0;
  std::size_t same = 0;
  for (NodeId u : nbrs) same += g.label(u) == g.label(v);
  return static_cast<double>(same) / static_cast<double>(nbrs.size());
}

double graph_homophily(const Graph& g) {
  double total = 0.0;
  std::size_t counted = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.degree(v) == 0) continue;
    total += node_homophily(g, v);
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("graph homophily undefined: every node is isolated");
  return total / static_cast<double>(counted);
}

}  // namespace disamgnn
