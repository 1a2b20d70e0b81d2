#include "disamgnn/dataio.hpp"
#include "disamgnn/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace disamgnn;

namespace {

struct Fixture {
  Graph g = sbm_generate([] {
    SbmSpec s = SbmSpec::uniform({40, 40, 12}, 0.15, 0.02, 4, 1.0, 5);
    s.block_probs(0, 2) = s.block_probs(2, 0) = s.block_probs(1, 2) = s.block_probs(2, 1) = 0.1;
    return s;
  }());
  SplitMasks masks = [this] {
    Rng r(2);
    return make_split(g, SplitRatios{1, 1, 3}, true, r);
  }();
};

TrainConfig small_config() {
  TrainConfig c;
  c.max_epochs = 120;
  c.patience = 1000;
  c.model.hidden = 16;
  c.optim.lr = 0.01;
  c.disam.warmup = 20;
  c.disam.refresh_period = 5;
  c.seed = 7;
  return c;
}

void same_trajectory(const TrainResult& a, const TrainResult& b) {
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].ce_loss == b.history.epochs[i].ce_loss);
    CHECK(a.history.epochs[i].val_acc == b.history.epochs[i].val_acc);
  }
  CHECK(a.history.best_epoch == b.history.best_epoch);
  for (std::size_t i = 0; i < a.params.params.size(); ++i) CHECK(a.params.params[i].value == b.params.params[i].value);
}

}  // namespace

TEST_CASE("lambda 0 reproduces plain cross-entropy bit for bit") {
  Fixture f;
  TrainConfig ce = small_config();
  ce.use_disam = false;
  TrainConfig zero = small_config();
  zero.disam.lambda = 0.0;
  const TrainResult a = train(ce, f.g, f.masks);
  const TrainResult b = train(zero, f.g, f.masks);
  same_trajectory(a, b);
  bool contrasted = false;
  for (const auto& r : b.history.epochs) contrasted |= r.cs_loss > 0.0;
  CHECK(contrasted);
}

TEST_CASE("threshold 1 leaves the ambiguous set empty and matches cross-entropy") {
  Fixture f;
  TrainConfig ce = small_config();
  ce.use_disam = false;
  TrainConfig full = small_config();
  full.disam.score_threshold = 1.0;
  const TrainResult a = train(ce, f.g, f.masks);
  const TrainResult b = train(full, f.g, f.masks);
  same_trajectory(a, b);
  for (const auto& r : b.history.epochs) {
    CHECK(r.num_ambiguous == 0);
    CHECK(r.cs_loss == 0.0);
  }
}

TEST_CASE("contrast changes training once nodes are ambiguous") {
  Fixture f;
  TrainConfig ce = small_config();
  ce.use_disam = false;
  const TrainResult a = train(ce, f.g, f.masks);
  const TrainResult b = train(small_config(), f.g, f.masks);
  CHECK(a.history.epochs.back().ce_loss != b.history.epochs.back().ce_loss);
}

TEST_CASE("history bookkeeping: warmup, totals, monotone epochs") {
  Fixture f;
  const TrainConfig cfg = small_config();
  const TrainResult r = train(cfg, f.g, f.masks);
  for (std::size_t i = 0; i < r.history.epochs.size(); ++i) {
    const auto& e = r.history.epochs[i];
    CHECK(e.epoch == i);
    CHECK(std::abs(e.total_loss - (e.ce_loss + cfg.disam.lambda * e.cs_loss)) < 1e-9);
    if (e.epoch < cfg.disam.warmup) {
      CHECK(e.cs_loss == 0.0);
      CHECK(e.total_loss == e.ce_loss);
      CHECK(e.num_ambiguous == 0);
    }
    CHECK(std::isfinite(e.total_loss));
    CHECK(e.mean_score >= 0.0);
    CHECK(e.mean_score <= 1.0);
  }
  for (double s : r.ambiguity.scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("training is deterministic under a seed") {
  Fixture f;
  TrainConfig cfg = small_config();
  cfg.model.dropout = 0.3;
  const TrainResult a = train(cfg, f.g, f.masks);
  const TrainResult b = train(cfg, f.g, f.masks);
  same_trajectory(a, b);
  CHECK(a.ambiguity.memory == b.ambiguity.memory);
  cfg.seed = 8;
  const TrainResult c = train(cfg, f.g, f.masks);
  CHECK(c.history.epochs.back().ce_loss != a.history.epochs.back().ce_loss);
}

TEST_CASE("returns the best validation checkpoint and stops early") {
  Fixture f;
  TrainConfig cfg = small_config();
  cfg.patience = 10;
  cfg.max_epochs = 2000;
  const TrainResult r = train(cfg, f.g, f.masks);
  CHECK(r.history.early_stopped);
  CHECK(r.history.epochs.size() < 2000);
  const MetricsReport val = evaluate(r.params, f.g, f.masks, SplitTag::Val);
  CHECK(val.acc == doctest::Approx(r.history.best_val_acc));
}

TEST_CASE("all backbones train on the fixture") {
  Fixture f;
  for (Backbone b : {Backbone::GCN, Backbone::SAGE, Backbone::GIN, Backbone::SGC}) {
    TrainConfig cfg = small_config();
    cfg.model.backbone = b;
    const TrainResult r = train(cfg, f.g, f.masks);
    CHECK(r.history.best_val_acc > 0.5);
  }
}

TEST_CASE("divergence is reported") {
  Fixture f;
  TrainConfig cfg = small_config();
  cfg.optim.lr = 1e306;
  CHECK_THROWS_AS(train(cfg, f.g, f.masks), TrainingDiverged);
}

TEST_CASE("invalid configs are rejected") {
  Fixture f;
  TrainConfig cfg = small_config();
  cfg.max_epochs = 0;
  CHECK_THROWS_AS(train(cfg, f.g, f.masks), std::invalid_argument);
  cfg = small_config();
  SplitMasks empty = f.masks;
  empty.train.clear();
  CHECK_THROWS_AS(train(cfg, f.g, empty), std::invalid_argument);
}

TEST_CASE("evaluate on the test mask and history CSV layout") {
  Fixture f;
  const TrainResult r = train(small_config(), f.g, f.masks);
  const MetricsReport rep = evaluate(r.params, f.g, f.masks, SplitTag::Test);
  CHECK(rep.count == f.masks.test.size());
  std::ostringstream os;
  write_history_csv(os, r.history);
  CHECK(os.str().rfind("epoch,ce_loss,cs_loss,total_loss,train_acc,val_acc,num_ambiguous,mean_score\n0,", 0) == 0);
  CHECK(to_string(SplitTag::Val) == "val");
}
