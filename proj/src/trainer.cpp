#include "disamgnn/trainer.hpp"

#include "disamgnn/format.hpp"

#include <numeric>
#include <ostream>

namespace disamgnn {

void TrainConfig::validate() const {
  model.validate();
  disam.validate();
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be positive");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be positive");
  if (!(optim.lr > 0.0) || optim.weight_decay < 0.0) throw std::invalid_argument("invalid optimizer settings");
}

namespace {

// Independent streams so that switching the contrast on or off never shifts
// the draws used for initialization or dropout.
Rng stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

double masked_accuracy(const std::vector<ClassId>& preds, const Graph& g, const std::vector<NodeId>& mask) {
  if (mask.empty()) return 0.0;
  return accuracy(preds, g.labels(), mask);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Graph& g, const SplitMasks& masks, std::ostream* log,
                  std::size_t log_every) {
  cfg.validate();
  masks.validate(g);

  Rng init_rng = stream(cfg.seed, 1);
  Rng dropout_rng = stream(cfg.seed, 2);
  Rng aux_rng = stream(cfg.seed, 3);

  ModelParams params = init_params(cfg.model, g.feature_dim(), g.num_classes(), init_rng);
  const Propagation prop = Propagation::build(g, cfg.model);
  Adam adam(cfg.optim);

  TrainResult result{params, {}, {}};
  TrainHistory& hist = result.history;
  AmbiguityState& state = result.ambiguity;
  ContrastGroups groups;
  double best_val = -1.0;
  std::size_t stale = 0;
  double train_acc = 0.0, val_acc = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const bool check = epoch % cfg.eval_every == 0;
    bool stop = false;
    try {
      if (cfg.use_disam || check) {
        const ForwardOutput out = forward(params, g, prop);
        if (cfg.use_disam) {
          update_memory(state, out.class_probs, cfg.disam.mu);
          state.scores = ambiguity_scores(state.memory);
          if (epoch >= cfg.disam.warmup && epoch % cfg.disam.refresh_period == 0) {
            state.ambiguous = select_ambiguous(state.scores, cfg.disam.score_threshold);
            groups = build_contrast_groups(out.embeddings, g, state.ambiguous, cfg.disam, aux_rng);
          }
        }
        if (check) {
          const auto preds = argmax_rows(out.class_probs);
          train_acc = masked_accuracy(preds, g, masks.train);
          val_acc = masked_accuracy(preds, g, masks.val);
          if (val_acc > best_val) {
            best_val = val_acc;
            hist.best_epoch = epoch;
            result.params = params;
            stale = 0;
          } else if (++stale >= cfg.patience) {
            stop = true;
          }
        }
      }
      if (stop) {
        hist.early_stopped = true;
        break;
      }

      ad::Tape tape;
      const ForwardVars fwd = forward(tape, params, g, prop, Mode::Train, &dropout_rng);
      ad::Var ce = cross_entropy_loss(fwd, g.labels(), masks.train);
      ad::Var total = ce;
      double cs_value = 0.0;
      if (cfg.use_disam && !groups.empty()) {
        ad::Var cs = jsd_contrast_loss(fwd.embeddings, groups, cfg.disam.cosine);
        cs_value = cs.scalar();
        if (cfg.disam.lambda != 0.0) total = ad::add(ce, ad::scale(cs, cfg.disam.lambda));
      }
      params.zero_grad();
      tape.backward(total);
      adam.step(params.params);
      for (const auto& p : params.params) {
        if (!p.value.allFinite()) throw ad::NumericError("parameter '" + p.name + "' became non-finite");
      }

      EpochRecord rec;
      rec.epoch = epoch;
      rec.ce_loss = ce.scalar();
      rec.cs_loss = cs_value;
      rec.total_loss = total.scalar();
      rec.train_acc = train_acc;
      rec.val_acc = val_acc;
      rec.num_ambiguous = cfg.use_disam ? state.ambiguous.size() : 0;
      rec.mean_score = state.scores.empty()
                           ? 0.0
                           : std::accumulate(state.scores.begin(), state.scores.end(), 0.0) /
                                 static_cast<double>(state.scores.size());
      hist.epochs.push_back(rec);
      if (log != nullptr && log_every > 0 && epoch % log_every == 0) {
        *log << "epoch " << epoch << " ce " << rec.ce_loss << " cs " << rec.cs_loss << " train_acc " << train_acc
             << " val_acc " << val_acc << " ambiguous " << rec.num_ambiguous << '\n';
      }
    } catch (const ad::NumericError& e) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  hist.best_val_acc = best_val;
  return result;
}

std::string_view to_string(SplitTag s) {
  switch (s) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "?";
}

std::span<const NodeId> mask_of(const SplitMasks& masks, SplitTag which) {
  switch (which) {
    case SplitTag::Train: return masks.train;
    case SplitTag::Val: return masks.val;
    case SplitTag::Test: return masks.test;
  }
  return {};
}

MetricsReport evaluate(const ModelParams& params, const Graph& g, const SplitMasks& masks, SplitTag which) {
  const auto mask = mask_of(masks, which);
  if (mask.empty()) throw std::invalid_argument("evaluate: empty " + std::string(to_string(which)) + " mask");
  const ForwardOutput out = forward(params, g);
  return compute_metrics(out.class_probs, g.labels(), mask);
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,ce_loss,cs_loss,total_loss,train_acc,val_acc,num_ambiguous,mean_score\n";
  for (const auto& r : history.epochs) {
    out << r.epoch << ',' << format_real(r.ce_loss) << ',' << format_real(r.cs_loss) << ','
        << format_real(r.total_loss) << ',' << format_real(r.train_acc) << ',' << format_real(r.val_acc) << ','
        << r.num_ambiguous << ',' << format_real(r.mean_score) << '\n';
  }
}

}  // namespace disamgnn
