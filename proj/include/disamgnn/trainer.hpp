#pragma once

#include "disamgnn/adam.hpp"
#include "disamgnn/disam.hpp"
#include "disamgnn/metrics.hpp"
#include "disamgnn/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace disamgnn {

struct TrainConfig {
  ModelConfig model;
  AdamOptions optim;
  DisamConfig disam;
  /// false trains with cross-entropy only: no memory, no contrast.
  bool use_disam = true;
  std::size_t max_epochs = 8000;
  /// Early stop after this many evaluations without a better val accuracy.
  std::size_t patience = 200;
  std::size_t eval_every = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double ce_loss = 0.0;
  double cs_loss = 0.0;
  double total_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::size_t num_ambiguous = 0;
  double mean_score = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  bool early_stopped = false;
};

struct TrainResult {
  /// Parameters from the epoch with the best validation accuracy.
  ModelParams params;
  AmbiguityState ambiguity;
  TrainHistory history;
};

/// Raised when a loss or activation turns non-finite during training.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Joint CE + lambda * contrast training. Every epoch: eval-mode forward and
/// memory update; every refresh_period epochs from warmup on, new ambiguous
/// set and contrast groups; then one Adam step on the train-mode loss.
/// All randomness derives from cfg.seed. `log`, when set, receives a
/// progress line every `log_every` epochs.
TrainResult train(const TrainConfig& cfg, const Graph& g, const SplitMasks& masks, std::ostream* log = nullptr,
                  std::size_t log_every = 100);

enum class SplitTag { Train, Val, Test };
std::string_view to_string(SplitTag s);
std::span<const NodeId> mask_of(const SplitMasks& masks, SplitTag which);

MetricsReport evaluate(const ModelParams& params, const Graph& g, const SplitMasks& masks, SplitTag which);

/// epoch,ce_loss,cs_loss,total_loss,train_acc,val_acc,num_ambiguous,mean_score
void write_history_csv(std::ostream& out, const TrainHistory& history);

}  // namespace disamgnn
