#pragma once

// Ambiguity tracking and the neighborhood-aware contrastive regularizer.
//
// Each node keeps an exponential moving average of its predicted class
// distribution. The normalized entropy of that memory is the node's
// ambiguity score; nodes above a threshold get a contrastive loss that pulls
// them toward their most similar neighbors (plus a few similar non-neighbors)
// and away from dissimilar neighbors.

#include "disamgnn/autograd.hpp"
#include "disamgnn/graph.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace disamgnn {

struct DisamConfig {
  /// Weight on the historical memory in the EMA.
  double mu = 0.5;
  double score_threshold = 0.8;
  double eps1 = 0.75;
  double eps2 = 0.4;
  /// Similarity cut for auxiliary positives.
  double tau = 0.7;
  std::size_t k_aux = 8;
  double lambda = 1.0;
  std::size_t refresh_period = 10;
  std::size_t warmup = 50;
  /// Cosine similarity when true, raw dot product otherwise. Applies to both
  /// group selection and the loss.
  bool cosine = true;

  void validate() const;
};

struct AmbiguityState {
  Matrix memory;
  std::vector<double> scores;
  std::vector<NodeId> ambiguous;
  bool initialized = false;
};

/// First call copies `class_probs`; later calls apply
/// memory = mu * memory + (1 - mu) * class_probs.
void update_memory(AmbiguityState& state, const Matrix& class_probs, double mu);

/// Row entropies divided by ln C, with 0 ln 0 = 0.
std::vector<double> ambiguity_scores(const Matrix& memory);

/// Nodes with score strictly above `threshold`, ascending.
std::vector<NodeId> select_ambiguous(std::span<const double> scores, double threshold);

/// Cosine similarity (0 if either row is zero) or raw dot product.
double similarity(std::span<const double> a, std::span<const double> b, bool cosine = true);

struct NeighborGroups {
  std::vector<NodeId> pos;
  std::vector<NodeId> neg;
};

/// Splits v's neighbors by similarity relative to the best neighbor m:
/// pos = {sim > eps1 * m} (empty when m <= 0), neg = {sim <= eps2 * m}.
/// Returns nullopt for isolated nodes.
std::optional<NeighborGroups> build_groups(const Matrix& embeddings, const Graph& g, NodeId v, double eps1,
                                           double eps2, bool cosine = true);

/// Uniform sample without replacement of min(k, |candidates|) nodes from
/// {u != v, u not adjacent to v, sim(u, v) >= tau}, returned ascending.
std::vector<NodeId> sample_aux_positives(const Matrix& embeddings, const Graph& g, NodeId v, double tau,
                                         std::size_t k, Rng& rng, bool cosine = true);

struct ContrastGroup {
  NodeId node;
  std::vector<NodeId> pos;
  std::vector<NodeId> neg;
  std::vector<NodeId> aux_pos;
};
using ContrastGroups = std::vector<ContrastGroup>;

/// Groups for every non-isolated node in `ambiguous`, in the given order.
ContrastGroups build_contrast_groups(const Matrix& embeddings, const Graph& g, std::span<const NodeId> ambiguous,
                                     const DisamConfig& cfg, Rng& rng);

/// Sum over groups of mean_{u in pos+aux} sp(-T(z_v, z_u)) +
/// mean_{u in neg} sp(T(z_v, z_u)). An empty pool drops its term.
ad::Var jsd_contrast_loss(ad::Var embeddings, const ContrastGroups& groups, bool cosine = true);

/// node_id,score,is_ambiguous
void write_ambiguity_csv(std::ostream& out, std::span<const double> scores, std::span<const NodeId> ambiguous);

}  // namespace disamgnn
