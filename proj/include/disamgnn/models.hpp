#pragma once

#include "disamgnn/autograd.hpp"
#include "disamgnn/graph.hpp"
#include "disamgnn/sparse.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace disamgnn {

enum class Backbone { GCN, SAGE, GIN, SGC };

std::string_view to_string(Backbone b);
/// Accepts "gcn", "sage", "gin", "sgc" (any case).
Backbone parse_backbone(std::string_view name);

struct ModelConfig {
  Backbone backbone = Backbone::GCN;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  /// Propagation power for SGC.
  std::size_t sgc_k = 2;
  /// Applied to hidden representations in train mode only.
  double dropout = 0.0;

  void validate() const;
};

/// Trainable weights of one backbone. Parameter order is fixed per backbone
/// and is the order used by checkpoints and the optimizer.
struct ModelParams {
  ModelConfig config;
  std::size_t in_dim = 0;
  std::size_t num_classes = 0;
  std::vector<ad::Parameter> params;

  ad::Parameter& at(std::string_view name);
  const ad::Parameter& at(std::string_view name) const;
  void zero_grad();
  std::size_t scalar_count() const;
};

/// Glorot-uniform weights, zero biases, GIN eps = 0.
ModelParams init_params(const ModelConfig& config, std::size_t in_dim, std::size_t num_classes, Rng& rng);

/// D^-1/2 (A + I) D^-1/2 with D the degree including the self-loop.
SparseMatrix gcn_normalized_adjacency(const Graph& g);
/// Row-normalized A without self-loops; isolated rows are empty.
SparseMatrix mean_adjacency(const Graph& g);
/// Plain 0/1 adjacency.
SparseMatrix sum_adjacency(const Graph& g);

/// Graph operators a backbone needs, built once per graph.
struct Propagation {
  std::shared_ptr<const SparseMatrix> gcn;
  std::shared_ptr<const SparseMatrix> mean;
  std::shared_ptr<const SparseMatrix> sum;
  /// Â^k X for SGC.
  std::optional<Matrix> sgc_features;

  static Propagation build(const Graph& g, const ModelConfig& config);
};

enum class Mode { Train, Eval };

struct ForwardVars {
  ad::Var logits;
  /// Input to the classification layer (Â^k X for SGC).
  ad::Var embeddings;
};

/// Records one forward pass on `tape`. Parameters are bound as tracked
/// leaves so backward() fills their grads. `rng` is only used for dropout.
ForwardVars forward(ad::Tape& tape, ModelParams& params, const Graph& g, const Propagation& prop,
                    Mode mode, Rng* rng = nullptr);

struct ForwardOutput {
  Matrix logits;
  Matrix embeddings;
  Matrix class_probs;
};

/// Eval-mode forward without gradient tracking.
ForwardOutput forward(const ModelParams& params, const Graph& g, const Propagation& prop);
ForwardOutput forward(const ModelParams& params, const Graph& g);

/// Mean masked cross-entropy on the logits of a forward pass.
ad::Var cross_entropy_loss(const ForwardVars& out, std::span<const ClassId> labels,
                           std::span<const NodeId> mask);

}  // namespace disamgnn
