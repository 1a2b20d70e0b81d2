#pragma once

#include "disamgnn/matrix.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace disamgnn {

using Edge = std::pair<NodeId, NodeId>;

/// Immutable undirected graph with node features and labels.
///
/// Adjacency is stored as symmetric CSR with sorted, deduplicated neighbor
/// lists and no self-loops. Self-loops needed by message passing are added by
/// the normalization routines, never stored here.
class Graph {
 public:
  /// Symmetrizes `edges`, drops self-loops and duplicates.
  /// `num_classes` defaults to max(label) + 1 and must be at least 2.
  static Graph build(std::span<const Edge> edges, Matrix features,
                     std::vector<ClassId> labels,
                     std::optional<std::size_t> num_classes = std::nullopt);

  std::size_t num_nodes() const { return labels_.size(); }
  /// Undirected edge count |E|.
  std::size_t num_edges() const { return targets_.size() / 2; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId u, NodeId v) const;

  const std::vector<std::size_t>& csr_offsets() const { return offsets_; }
  const std::vector<NodeId>& csr_targets() const { return targets_; }
  const Matrix& features() const { return features_; }
  const std::vector<ClassId>& labels() const { return labels_; }
  ClassId label(NodeId v) const { return labels_[v]; }

  /// Each undirected edge once, with u < v, in CSR order.
  std::vector<Edge> edge_list() const;
  std::vector<std::size_t> class_counts() const;

 private:
  Graph() = default;

  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  Matrix features_;
  std::vector<ClassId> labels_;
  std::size_t num_classes_ = 0;
};

/// Transductive train/val/test node sets over one graph.
struct SplitMasks {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  /// Throws std::invalid_argument when sets overlap, leave the node range or
  /// train is empty.
  void validate(const Graph& g) const;
};

/// Fraction of v's neighbors sharing its label; 1.0 for isolated nodes.
double node_homophily(const Graph& g, NodeId v);

/// Mean node homophily over non-isolated nodes. Throws when every node is
/// isolated.
double graph_homophily(const Graph& g);

}  // namespace disamgnn
