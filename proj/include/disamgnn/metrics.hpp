#pragma once

#include "disamgnn/matrix.hpp"

#include <span>
#include <vector>

namespace disamgnn {

struct MetricsReport {
  double acc = 0.0;
  double macro_f1 = 0.0;
  double macro_auroc = 0.0;
  std::vector<double> per_class_f1;
  /// confusion[true][pred]
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t count = 0;
};

std::vector<ClassId> argmax_rows(const Matrix& scores);

/// Counts over the masked nodes only.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const ClassId> preds,
                                                       std::span<const ClassId> labels,
                                                       std::span<const NodeId> mask, std::size_t num_classes);

double accuracy(std::span<const ClassId> preds, std::span<const ClassId> labels, std::span<const NodeId> mask);

/// Unweighted mean of per-class F1 over classes present in the masked labels.
/// A present class with no true positives scores 0.
double macro_f1(std::span<const ClassId> preds, std::span<const ClassId> labels, std::span<const NodeId> mask,
                std::size_t num_classes);

/// One-vs-rest AUROC per class from the Mann-Whitney rank statistic with
/// midranks for ties, averaged over classes that have both positives and
/// negatives in the mask. Throws when no class is scorable.
double macro_auroc(const Matrix& class_probs, std::span<const ClassId> labels, std::span<const NodeId> mask);

MetricsReport compute_metrics(const Matrix& class_probs, std::span<const ClassId> labels,
                              std::span<const NodeId> mask);

}  // namespace disamgnn
