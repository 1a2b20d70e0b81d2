#include "disamgnn/disam.hpp"

#include "disamgnn/format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace disamgnn {

void DisamConfig::validate() const {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must be in [0, 1]");
  if (!(eps2 > 0.0 && eps2 <= eps1 && eps1 <= 1.0)) {
    throw std::invalid_argument("need 0 < eps2 <= eps1 <= 1");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw std::invalid_argument("score threshold must be in [0, 1]");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (refresh_period == 0) throw std::invalid_argument("refresh period must be positive");
  if (!std::isfinite(tau)) throw std::invalid_argument("tau must be finite");
}

void update_memory(AmbiguityState& state, const Matrix& class_probs, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must be in [0, 1]");
  for (Eigen::Index r = 0; r < class_probs.rows(); ++r) {
    const double s = class_probs.row(r).sum();
    if (std::abs(s - 1.0) > 1e-6 || (class_probs.row(r).array() < 0.0).any()) {
      throw std::invalid_argument("update_memory: row " + std::to_string(r) + " is not a probability vector");
    }
  }
  if (!state.initialized) {
    state.memory = class_probs;
    state.initialized = true;
    return;
  }
  if (state.memory.rows() != class_probs.rows() || state.memory.cols() != class_probs.cols()) {
    throw std::invalid_argument("update_memory: shape mismatch");
  }
  state.memory = mu * state.memory + (1.0 - mu) * class_probs;
}

std::vector<double> ambiguity_scores(const Matrix& memory) {
  const Eigen::Index c = memory.cols();
  const double norm = c > 1 ? std::log(static_cast<double>(c)) : 1.0;
  std::vector<double> scores(static_cast<std::size_t>(memory.rows()));
  for (Eigen::Index r = 0; r < memory.rows(); ++r) {
    double h = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
      const double p = memory(r, k);
      if (p > 0.0) h -= p * std::log(p);
    }
    scores[static_cast<std::size_t>(r)] = std::clamp(h / norm, 0.0, 1.0);
  }
  return scores;
}

std::vector<NodeId> select_ambiguous(std::span<const double> scores, double threshold) {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < scores.size(); ++v) {
    if (scores[v] > threshold) out.push_back(v);
  }
  return out;
}

double similarity(std::span<const double> a, std::span<const double> b, bool cosine) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!cosine) return dot;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (n > 0.0) out.row(r) /= n; else out.row(r).setZero();
  }
  return out;
}

// `z` is already unit-normalized when cosine similarity is in use, so dot
// products suffice below.
std::optional<NeighborGroups> groups_from(const Matrix& z, const Graph& g, NodeId v, double eps1, double eps2) {
  auto nbrs = g.neighbors(v);
  if (nbrs.empty()) return std::nullopt;
  const auto zv = z.row(static_cast<Eigen::Index>(v));
  std::vector<double> sims;
  sims.reserve(nbrs.size());
  for (NodeId u : nbrs) sims.push_back(zv.dot(z.row(static_cast<Eigen::Index>(u))));
  const double m = *std::max_element(sims.begin(), sims.end());
  NeighborGroups out;
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    if (m > 0.0 && sims[i] > eps1 * m) {
      out.pos.push_back(nbrs[i]);
    } else if (sims[i] <= eps2 * m) {
      out.neg.push_back(nbrs[i]);
    }
  }
  return out;
}

std::vector<NodeId> aux_from(const Matrix& z, const Graph& g, NodeId v, double tau, std::size_t k, Rng& rng) {
  const auto zv = z.row(static_cast<Eigen::Index>(v));
  auto nbrs = g.neighbors(v);
  std::vector<NodeId> candidates;
  std::size_t ni = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    while (ni < nbrs.size() && nbrs[ni] < u) ++ni;
    if (u == v || (ni < nbrs.size() && nbrs[ni] == u)) continue;
    if (zv.dot(z.row(static_cast<Eigen::Index>(u))) >= tau) candidates.push_back(u);
  }
  // Partial Fisher-Yates: the first `take` slots become a uniform sample.
  const std::size_t take = std::min(k, candidates.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::optional<NeighborGroups> build_groups(const Matrix& embeddings, const Graph& g, NodeId v, double eps1,
                                           double eps2, bool cosine) {
  if (v >= g.num_nodes()) throw std::out_of_range("build_groups: node out of range");
  return groups_from(cosine ? unit_rows(embeddings) : embeddings, g, v, eps1, eps2);
}

std::vector<NodeId> sample_aux_positives(const Matrix& embeddings, const Graph& g, NodeId v, double tau,
                                         std::size_t k, Rng& rng, bool cosine) {
  if (v >= g.num_nodes()) throw std::out_of_range("sample_aux_positives: node out of range");
  return aux_from(cosine ? unit_rows(embeddings) : embeddings, g, v, tau, k, rng);
}

ContrastGroups build_contrast_groups(const Matrix& embeddings, const Graph& g, std::span<const NodeId> ambiguous,
                                     const DisamConfig& cfg, Rng& rng) {
  const Matrix z = cfg.cosine ? unit_rows(embeddings) : embeddings;
  ContrastGroups out;
  out.reserve(ambiguous.size());
  for (NodeId v : ambiguous) {
    auto groups = groups_from(z, g, v, cfg.eps1, cfg.eps2);
    if (!groups) continue;
    ContrastGroup cg{v, std::move(groups->pos), std::move(groups->neg), {}};
    cg.aux_pos = aux_from(z, g, v, cfg.tau, cfg.k_aux, rng);
    out.push_back(std::move(cg));
  }
  return out;
}

ad::Var jsd_contrast_loss(ad::Var embeddings, const ContrastGroups& groups, bool cosine) {
  std::vector<ad::SignedPair> pairs;
  for (const auto& cg : groups) {
    const std::size_t n_pos = cg.pos.size() + cg.aux_pos.size();
    if (n_pos > 0) {
      const double w = 1.0 / static_cast<double>(n_pos);
      for (NodeId u : cg.pos) pairs.push_back({cg.node, u, -1.0, w});
      for (NodeId u : cg.aux_pos) pairs.push_back({cg.node, u, -1.0, w});
    }
    if (!cg.neg.empty()) {
      const double w = 1.0 / static_cast<double>(cg.neg.size());
      for (NodeId u : cg.neg) pairs.push_back({cg.node, u, 1.0, w});
    }
  }
  ad::Var z = cosine ? ad::row_l2_normalize(embeddings) : embeddings;
  return ad::pair_softplus(z, std::move(pairs));
}

void write_ambiguity_csv(std::ostream& out, std::span<const double> scores, std::span<const NodeId> ambiguous) {
  std::vector<char> flag(scores.size(), 0);
  for (NodeId v : ambiguous) {
    if (v < flag.size()) flag[v] = 1;
  }
  out << "node_id,score,is_ambiguous\n";
  for (NodeId v = 0; v < scores.size(); ++v) {
    out << v << ',' << format_real(scores[v]) << ',' << int(flag[v]) << '\n';
  }
}

}  // namespace disamgnn
