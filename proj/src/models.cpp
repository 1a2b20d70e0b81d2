#include "disamgnn/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace disamgnn {

std::string_view to_string(Backbone b) {
  switch (b) {
    case Backbone::GCN: return "gcn";
    case Backbone::SAGE: return "sage";
    case Backbone::GIN: return "gin";
    case Backbone::SGC: return "sgc";
  }
  return "unknown";
}

Backbone parse_backbone(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gcn") return Backbone::GCN;
  if (lower == "sage") return Backbone::SAGE;
  if (lower == "gin") return Backbone::GIN;
  if (lower == "sgc") return Backbone::SGC;
  throw std::invalid_argument("unknown backbone '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("model needs at least one layer");
  if (hidden < 1) throw std::invalid_argument("hidden dimension must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
}

ad::Parameter& ModelParams::at(std::string_view name) {
  for (auto& p : params) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

const ad::Parameter& ModelParams::at(std::string_view name) const {
  return const_cast<ModelParams*>(this)->at(name);
}

void ModelParams::zero_grad() {
  for (auto& p : params) p.zero_grad();
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value.size());
  return n;
}

namespace {

ad::Parameter glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  ad::Parameter p{std::move(name), std::move(w), {}};
  p.zero_grad();
  return p;
}

ad::Parameter zeros(std::string name, std::size_t rows, std::size_t cols) {
  ad::Parameter p{std::move(name),
                  Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)), {}};
  p.zero_grad();
  return p;
}

std::string layer_name(std::size_t l, const char* suffix) {
  return "layer" + std::to_string(l) + "." + suffix;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::size_t in_dim, std::size_t num_classes, Rng& rng) {
  config.validate();
  if (in_dim == 0 || num_classes < 2) throw std::invalid_argument("invalid model dimensions");
  ModelParams mp;
  mp.config = config;
  mp.in_dim = in_dim;
  mp.num_classes = num_classes;
  if (config.backbone == Backbone::SGC) {
    mp.params.push_back(glorot("linear.weight", in_dim, num_classes, rng));
    mp.params.push_back(zeros("linear.bias", 1, num_classes));
    return mp;
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? in_dim : config.hidden;
    const std::size_t out = l + 1 == config.layers ? num_classes : config.hidden;
    switch (config.backbone) {
      case Backbone::GCN:
        mp.params.push_back(glorot(layer_name(l, "weight"), in, out, rng));
        mp.params.push_back(zeros(layer_name(l, "bias"), 1, out));
        break;
      case Backbone::SAGE:
        mp.params.push_back(glorot(layer_name(l, "weight"), 2 * in, out, rng));
        mp.params.push_back(zeros(layer_name(l, "bias"), 1, out));
        break;
      case Backbone::GIN:
        mp.params.push_back(zeros(layer_name(l, "eps"), 1, 1));
        mp.params.push_back(glorot(layer_name(l, "mlp0.weight"), in, config.hidden, rng));
        mp.params.push_back(zeros(layer_name(l, "mlp0.bias"), 1, config.hidden));
        mp.params.push_back(glorot(layer_name(l, "mlp1.weight"), config.hidden, out, rng));
        mp.params.push_back(zeros(layer_name(l, "mlp1.bias"), 1, out));
        break;
      case Backbone::SGC:
        break;
    }
  }
  return mp;
}

SparseMatrix gcn_normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (NodeId v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;
  std::vector<double> values;
  offsets.reserve(n + 1);
  indices.reserve(2 * g.num_edges() + n);
  values.reserve(2 * g.num_edges() + n);
  for (NodeId v = 0; v < n; ++v) {
    bool self_done = false;
    for (NodeId u : g.neighbors(v)) {
      if (!self_done && u > v) {
        indices.push_back(v);
        values.push_back(inv_sqrt[v] * inv_sqrt[v]);
        self_done = true;
      }
      indices.push_back(u);
      values.push_back(inv_sqrt[v] * inv_sqrt[u]);
    }
    if (!self_done) {
      indices.push_back(v);
      values.push_back(inv_sqrt[v] * inv_sqrt[v]);
    }
    offsets.push_back(indices.size());
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(indices), std::move(values));
}

SparseMatrix mean_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> values;
  values.reserve(g.csr_targets().size());
  for (NodeId v = 0; v < n; ++v) {
    const double w = g.degree(v) == 0 ? 0.0 : 1.0 / static_cast<double>(g.degree(v));
    values.insert(values.end(), g.degree(v), w);
  }
  return SparseMatrix(n, n, g.csr_offsets(), g.csr_targets(), std::move(values));
}

SparseMatrix sum_adjacency(const Graph& g) {
  return SparseMatrix(g.num_nodes(), g.num_nodes(), g.csr_offsets(), g.csr_targets(),
                      std::vector<double>(g.csr_targets().size(), 1.0));
}

Propagation Propagation::build(const Graph& g, const ModelConfig& config) {
  Propagation p;
  switch (config.backbone) {
    case Backbone::GCN:
      p.gcn = std::make_shared<const SparseMatrix>(gcn_normalized_adjacency(g));
      break;
    case Backbone::SAGE:
      p.mean = std::make_shared<const SparseMatrix>(mean_adjacency(g));
      break;
    case Backbone::GIN:
      p.sum = std::make_shared<const SparseMatrix>(sum_adjacency(g));
      break;
    case Backbone::SGC: {
      const SparseMatrix a_hat = gcn_normalized_adjacency(g);
      Matrix x = g.features();
      for (std::size_t i = 0; i < config.sgc_k; ++i) x = a_hat.multiply(x);
      p.sgc_features = std::move(x);
      break;
    }
  }
  return p;
}

namespace {

// `bind(i)` returns the Var for params[i]; this lets the tracked and the
// untracked forward share one implementation.
template <class Bind>
ForwardVars forward_impl(ad::Tape& tape, const ModelParams& mp, const Graph& g, const Propagation& prop,
                         Mode mode, Rng* rng, Bind bind) {
  const ModelConfig& cfg = mp.config;
  if (g.feature_dim() != mp.in_dim) {
    throw std::invalid_argument("model expects " + std::to_string(mp.in_dim) + " features, graph has " +
                                std::to_string(g.feature_dim()));
  }
  const bool drop = mode == Mode::Train && cfg.dropout > 0.0;
  if (drop && rng == nullptr) throw std::invalid_argument("dropout in train mode needs an rng");

  if (cfg.backbone == Backbone::SGC) {
    if (!prop.sgc_features) throw std::invalid_argument("propagation cache lacks SGC features");
    ad::Var x = tape.constant(*prop.sgc_features);
    ad::Var logits = ad::add_row(ad::matmul(x, bind(0)), bind(1));
    return {logits, x};
  }

  auto require = [](const std::shared_ptr<const SparseMatrix>& s) -> std::shared_ptr<const SparseMatrix> {
    if (!s) throw std::invalid_argument("propagation cache does not match backbone");
    return s;
  };

  ad::Var h = tape.constant(g.features());
  ad::Var embeddings = h;
  std::size_t pi = 0;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const bool last = l + 1 == cfg.layers;
    if (last) embeddings = h;
    ad::Var in = (l > 0 && drop) ? ad::dropout(h, cfg.dropout, *rng) : h;
    ad::Var out;
    switch (cfg.backbone) {
      case Backbone::GCN: {
        ad::Var w = bind(pi++);
        ad::Var b = bind(pi++);
        out = ad::add_row(ad::spmm(require(prop.gcn), ad::matmul(in, w)), b);
        break;
      }
      case Backbone::SAGE: {
        ad::Var w = bind(pi++);
        ad::Var b = bind(pi++);
        ad::Var agg = ad::spmm(require(prop.mean), in);
        out = ad::add_row(ad::matmul(ad::concat_cols(in, agg), w), b);
        break;
      }
      case Backbone::GIN: {
        ad::Var eps = bind(pi++);
        ad::Var w0 = bind(pi++);
        ad::Var b0 = bind(pi++);
        ad::Var w1 = bind(pi++);
        ad::Var b1 = bind(pi++);
        ad::Var agg = ad::add(ad::add(in, ad::scale_by(in, eps)), ad::spmm(require(prop.sum), in));
        ad::Var hidden = ad::relu(ad::add_row(ad::matmul(agg, w0), b0));
        out = ad::add_row(ad::matmul(hidden, w1), b1);
        break;
      }
      case Backbone::SGC:
        break;
    }
    h = last ? out : ad::relu(out);
  }
  return {h, embeddings};
}

}  // namespace

ForwardVars forward(ad::Tape& tape, ModelParams& params, const Graph& g, const Propagation& prop, Mode mode,
                    Rng* rng) {
  return forward_impl(tape, params, g, prop, mode, rng,
                      [&](std::size_t i) { return tape.parameter(params.params.at(i)); });
}

ForwardOutput forward(const ModelParams& params, const Graph& g, const Propagation& prop) {
  ad::Tape tape;
  ForwardVars vars = forward_impl(tape, params, g, prop, Mode::Eval, nullptr,
                                  [&](std::size_t i) { return tape.constant(params.params.at(i).value); });
  ForwardOutput out;
  out.logits = vars.logits.value();
  out.embeddings = vars.embeddings.value();
  out.class_probs = ad::softmax_rows(out.logits);
  return out;
}

ForwardOutput forward(const ModelParams& params, const Graph& g) {
  return forward(params, g, Propagation::build(g, params.config));
}

ad::Var cross_entropy_loss(const ForwardVars& out, std::span<const ClassId> labels, std::span<const NodeId> mask) {
  return ad::masked_cross_entropy(out.logits, labels, mask);
}

}  // namespace disamgnn
