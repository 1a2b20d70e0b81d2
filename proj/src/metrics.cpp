#include "disamgnn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace disamgnn {

namespace {

void check_mask(std::span<const NodeId> mask, std::size_t n) {
  if (mask.empty()) throw std::invalid_argument("metrics: empty mask");
  for (NodeId v : mask) {
    if (v >= n) throw std::out_of_range("metrics: mask node out of range");
  }
}

std::vector<double> per_class_f1(const std::vector<std::vector<std::size_t>>& cm) {
  const std::size_t c = cm.size();
  std::vector<double> f1(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t tp = cm[k][k], actual = 0, predicted = 0;
    for (std::size_t j = 0; j < c; ++j) {
      actual += cm[k][j];
      predicted += cm[j][k];
    }
    const std::size_t denom = actual + predicted;
    f1[k] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return f1;
}

double macro_from(const std::vector<std::vector<std::size_t>>& cm, const std::vector<double>& f1) {
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < cm.size(); ++k) {
    const std::size_t actual = std::accumulate(cm[k].begin(), cm[k].end(), std::size_t{0});
    if (actual == 0) continue;
    total += f1[k];
    ++present;
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

}  // namespace

std::vector<ClassId> argmax_rows(const Matrix& scores) {
  std::vector<ClassId> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<ClassId>(best);
  }
  return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const ClassId> preds,
                                                       std::span<const ClassId> labels,
                                                       std::span<const NodeId> mask, std::size_t num_classes) {
  if (preds.size() != labels.size()) throw std::invalid_argument("metrics: preds/labels length mismatch");
  check_mask(mask, labels.size());
  std::vector<std::vector<std::size_t>> cm(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (NodeId v : mask) {
    if (labels[v] >= num_classes || preds[v] >= num_classes) {
      throw std::out_of_range("metrics: class index out of range");
    }
    ++cm[labels[v]][preds[v]];
  }
  return cm;
}

double accuracy(std::span<const ClassId> preds, std::span<const ClassId> labels, std::span<const NodeId> mask) {
  if (preds.size() != labels.size()) throw std::invalid_argument("metrics: preds/labels length mismatch");
  check_mask(mask, labels.size());
  std::size_t correct = 0;
  for (NodeId v : mask) correct += preds[v] == labels[v];
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double macro_f1(std::span<const ClassId> preds, std::span<const ClassId> labels, std::span<const NodeId> mask,
                std::size_t num_classes) {
  const auto cm = confusion_matrix(preds, labels, mask, num_classes);
  return macro_from(cm, per_class_f1(cm));
}

double macro_auroc(const Matrix& class_probs, std::span<const ClassId> labels, std::span<const NodeId> mask) {
  if (static_cast<std::size_t>(class_probs.rows()) != labels.size()) {
    throw std::invalid_argument("auroc: score rows do not match labels");
  }
  check_mask(mask, labels.size());
  const std::size_t n = mask.size();
  const auto num_classes = static_cast<std::size_t>(class_probs.cols());

  std::vector<std::size_t> order(n);
  std::vector<double> ranks(n);
  double total = 0.0;
  std::size_t scored = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t n_pos = 0;
    for (NodeId v : mask) n_pos += labels[v] == k;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) continue;

    auto score = [&](std::size_t i) {
      return class_probs(static_cast<Eigen::Index>(mask[i]), static_cast<Eigen::Index>(k));
    };
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score(a) < score(b); });
    // Midranks (1-based) over tie blocks.
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && score(order[j + 1]) == score(order[i])) ++j;
      const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
      i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[mask[i]] == k) rank_sum += ranks[i];
    }
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    total += u / (np * static_cast<double>(n_neg));
    ++scored;
  }
  if (scored == 0) throw std::invalid_argument("auroc: no class has both positives and negatives in the mask");
  return total / static_cast<double>(scored);
}

MetricsReport compute_metrics(const Matrix& class_probs, std::span<const ClassId> labels,
                              std::span<const NodeId> mask) {
  const auto num_classes = static_cast<std::size_t>(class_probs.cols());
  const auto preds = argmax_rows(class_probs);
  MetricsReport r;
  r.confusion = confusion_matrix(preds, labels, mask, num_classes);
  r.per_class_f1 = per_class_f1(r.confusion);
  r.macro_f1 = macro_from(r.confusion, r.per_class_f1);
  r.acc = accuracy(preds, labels, mask);
  r.macro_auroc = macro_auroc(class_probs, labels, mask);
  r.count = mask.size();
  return r;
}

}  // namespace disamgnn
