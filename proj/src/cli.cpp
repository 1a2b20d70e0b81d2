#include "disamgnn/cli.hpp"

#include "disamgnn/analysis.hpp"
#include "disamgnn/checkpoint.hpp"
#include "disamgnn/format.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace disamgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Bundle resolve_dataset(const std::string& spec, std::uint64_t data_seed) {
  if (spec.rfind("sbm:", 0) == 0) {
    const std::string preset = spec.substr(4);
    try {
      return Bundle{sbm_generate(sbm_preset(preset, data_seed)), std::nullopt, "sbm-" + preset};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  fs::path dir(spec);
  if (!fs::exists(dir) && dir.is_relative()) {
    if (const char* root = std::getenv("DISAMGNN_DATA"); root != nullptr && *root != '\0') {
      dir = fs::path(root) / dir;
    }
  }
  if (!fs::is_directory(dir)) throw ConfigError("dataset not found: " + spec);
  return load_bundle(dir);
}

SplitMasks splits_for(const Bundle& bundle, std::uint64_t seed) {
  if (bundle.splits) return *bundle.splits;
  Rng rng(seed);
  return make_split(bundle.graph, SplitRatios{}, true, rng);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if (item.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(item);
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid value '" + item + "'");
    }
  }
  if (values.empty()) throw ConfigError("value list is empty");
  return values;
}

void set_param(TrainConfig& cfg, const std::string& name, double value) {
  auto count = [&]() {
    if (value < 0.0 || value != std::floor(value)) throw ConfigError(name + " needs a non-negative integer");
    return static_cast<std::size_t>(value);
  };
  if (name == "lambda") cfg.disam.lambda = value;
  else if (name == "mu") cfg.disam.mu = value;
  else if (name == "threshold") cfg.disam.score_threshold = value;
  else if (name == "eps1") cfg.disam.eps1 = value;
  else if (name == "eps2") cfg.disam.eps2 = value;
  else if (name == "tau") cfg.disam.tau = value;
  else if (name == "k-aux") cfg.disam.k_aux = count();
  else if (name == "refresh") cfg.disam.refresh_period = count();
  else if (name == "warmup") cfg.disam.warmup = count();
  else if (name == "lr") cfg.optim.lr = value;
  else if (name == "weight-decay") cfg.optim.weight_decay = value;
  else if (name == "epochs") cfg.max_epochs = count();
  else if (name == "hidden") cfg.model.hidden = count();
  else if (name == "layers") cfg.model.layers = count();
  else if (name == "dropout") cfg.model.dropout = value;
  else throw ConfigError("unknown sweep parameter '" + name + "'");
}

namespace {

SplitScores scores_on(const ForwardOutput& out, const Graph& g, std::span<const NodeId> mask) {
  const MetricsReport r = compute_metrics(out.class_probs, g.labels(), mask);
  return {r.acc, r.macro_f1, r.macro_auroc};
}

json to_json(const SplitScores& s) { return {{"acc", s.acc}, {"macro_f1", s.macro_f1}, {"auroc", s.auroc}}; }

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

json summarize(const std::vector<RunOutcome>& runs, SplitScores RunOutcome::*split) {
  json j;
  for (auto [key, field] : {std::pair{"acc", &SplitScores::acc}, std::pair{"macro_f1", &SplitScores::macro_f1},
                            std::pair{"auroc", &SplitScores::auroc}}) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.*split.*field);
    const auto [m, s] = mean_std(xs);
    j[key] = {{"mean", m}, {"std", s}};
  }
  return j;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::size_t resolve_jobs(std::size_t jobs, std::size_t tasks) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(jobs, tasks));
}

// Runs tasks[i] for all i with up to `jobs` worker threads; the first
// exception is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  jobs = resolve_jobs(jobs, count);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct CommonOptions {
  std::string dataset;
  std::uint64_t data_seed = 0;
  std::string seeds = "0";
  std::string out = "out";
  std::string backbone = "gcn";
  std::optional<std::uint64_t> split_seed;
  bool no_disam = false;
  bool raw_dot = false;
  bool quiet = false;
  std::size_t log_every = 100;
  TrainConfig cfg;
};

void add_train_flags(CLI::App& app, CommonOptions& o) {
  app.add_option("--dataset", o.dataset, "sbm:<preset> or bundle directory")->required();
  app.add_option("--data-seed", o.data_seed, "seed for synthetic graph generation");
  app.add_option("--seeds", o.seeds, "comma-separated training seeds");
  app.add_option("--split-seed", o.split_seed, "fixed split seed (default: the run seed)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--backbone", o.backbone, "gcn, sage, gin or sgc")
      ->check(CLI::IsMember({"gcn", "sage", "gin", "sgc"}, CLI::ignore_case));
  app.add_option("--lambda", o.cfg.disam.lambda, "weight of the contrastive loss");
  app.add_option("--mu", o.cfg.disam.mu, "weight of historical memory");
  app.add_option("--threshold", o.cfg.disam.score_threshold, "ambiguity score threshold");
  app.add_option("--eps1", o.cfg.disam.eps1, "positive-neighbor ratio");
  app.add_option("--eps2", o.cfg.disam.eps2, "negative-neighbor ratio");
  app.add_option("--tau", o.cfg.disam.tau, "similarity threshold for auxiliary positives");
  app.add_option("--k-aux", o.cfg.disam.k_aux, "auxiliary positives per ambiguous node");
  app.add_option("--refresh", o.cfg.disam.refresh_period, "epochs between ambiguous-set refreshes");
  app.add_option("--warmup", o.cfg.disam.warmup, "epochs before the first refresh");
  app.add_option("--lr", o.cfg.optim.lr, "Adam learning rate");
  app.add_option("--weight-decay", o.cfg.optim.weight_decay, "L2 weight decay");
  app.add_option("--epochs", o.cfg.max_epochs, "maximum training epochs");
  app.add_option("--patience", o.cfg.patience, "early-stopping patience in evaluations");
  app.add_option("--hidden", o.cfg.model.hidden, "hidden dimension");
  app.add_option("--layers", o.cfg.model.layers, "number of layers");
  app.add_option("--sgc-k", o.cfg.model.sgc_k, "SGC propagation power");
  app.add_option("--dropout", o.cfg.model.dropout, "dropout rate on hidden layers");
  app.add_flag("--no-disam", o.no_disam, "plain cross-entropy training");
  app.add_flag("--raw-dot", o.raw_dot, "raw dot-product similarity instead of cosine");
  app.add_flag("--quiet", o.quiet, "no progress output");
  app.add_option("--log-every", o.log_every, "epochs between progress lines");
}

TrainConfig finalize(CommonOptions& o) {
  TrainConfig cfg = o.cfg;
  cfg.model.backbone = parse_backbone(o.backbone);
  cfg.use_disam = !o.no_disam;
  cfg.disam.cosine = !o.raw_dot;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json config_json(const TrainConfig& cfg) {
  return {{"backbone", std::string(to_string(cfg.model.backbone))},
          {"hidden", cfg.model.hidden},
          {"layers", cfg.model.layers},
          {"sgc_k", cfg.model.sgc_k},
          {"dropout", cfg.model.dropout},
          {"lr", cfg.optim.lr},
          {"weight_decay", cfg.optim.weight_decay},
          {"epochs", cfg.max_epochs},
          {"patience", cfg.patience},
          {"use_disam", cfg.use_disam},
          {"lambda", cfg.disam.lambda},
          {"mu", cfg.disam.mu},
          {"threshold", cfg.disam.score_threshold},
          {"eps1", cfg.disam.eps1},
          {"eps2", cfg.disam.eps2},
          {"tau", cfg.disam.tau},
          {"k_aux", cfg.disam.k_aux},
          {"refresh", cfg.disam.refresh_period},
          {"warmup", cfg.disam.warmup},
          {"cosine", cfg.disam.cosine}};
}

int cmd_train(CommonOptions& o, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = finalize(o);
  const auto seeds = parse_seed_list(o.seeds);
  const Bundle bundle = resolve_dataset(o.dataset, o.data_seed);
  const fs::path root(o.out);
  fs::create_directories(root);

  std::vector<RunOutcome> runs;
  for (std::uint64_t seed : seeds) {
    const SplitMasks masks = splits_for(bundle, o.split_seed.value_or(seed));
    if (!o.quiet) err << "[train] seed " << seed << '\n';
    RunOutcome run = run_once(cfg, bundle.graph, masks, seed, o.quiet ? nullptr : &err);

    const fs::path dir = root / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    {
      auto f = open_out(dir / "history.csv");
      write_history_csv(f, run.result.history);
    }
    save_checkpoint(run.result.params, dir / "checkpoint.json");
    write_splits_json(dir / "splits.json", masks);
    {
      auto f = open_out(dir / "ambiguity.csv");
      const auto scores = run.result.ambiguity.initialized ? ambiguity_scores(run.result.ambiguity.memory)
                                                           : std::vector<double>(bundle.graph.num_nodes(), 0.0);
      write_ambiguity_csv(f, scores, run.result.ambiguity.ambiguous);
    }
    runs.push_back(std::move(run));
  }

  json j;
  j["dataset"] = bundle.name;
  j["config"] = config_json(cfg);
  j["runs"] = json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"seed", r.seed},
                         {"best_epoch", r.result.history.best_epoch},
                         {"epochs_run", r.result.history.epochs.size()},
                         {"train", to_json(r.train)},
                         {"val", to_json(r.val)},
                         {"test", to_json(r.test)}});
  }
  j["summary"] = {{"train", summarize(runs, &RunOutcome::train)},
                  {"val", summarize(runs, &RunOutcome::val)},
                  {"test", summarize(runs, &RunOutcome::test)}};
  open_out(root / "metrics.json") << j.dump(2) << '\n';
  const auto& t = j["summary"]["test"];
  out << "test acc " << t["acc"]["mean"].get<double>() << " +- " << t["acc"]["std"].get<double>() << ", macro_f1 "
      << t["macro_f1"]["mean"].get<double>() << " +- " << t["macro_f1"]["std"].get<double>() << ", auroc "
      << t["auroc"]["mean"].get<double>() << " +- " << t["auroc"]["std"].get<double>() << '\n';
  return kOk;
}

struct SweepOptions {
  std::string param;
  std::string values;
  std::size_t jobs = 1;
};

int cmd_sweep(CommonOptions& o, const SweepOptions& s, std::ostream& out, std::ostream& err) {
  const TrainConfig base = finalize(o);
  const auto seeds = parse_seed_list(o.seeds);
  const auto values = parse_value_list(s.values);
  std::vector<TrainConfig> configs;
  for (double v : values) {
    TrainConfig c = base;
    set_param(c, s.param, v);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    configs.push_back(c);
  }
  const Bundle bundle = resolve_dataset(o.dataset, o.data_seed);

  const std::size_t tasks = values.size() * seeds.size();
  std::vector<SplitScores> test(tasks);
  std::mutex log_mutex;
  parallel_for(tasks, s.jobs, [&](std::size_t i) {
    const std::size_t vi = i / seeds.size();
    const std::uint64_t seed = seeds[i % seeds.size()];
    const SplitMasks masks = splits_for(bundle, o.split_seed.value_or(seed));
    test[i] = run_once(configs[vi], bundle.graph, masks, seed).test;
    if (!o.quiet) {
      std::lock_guard lock(log_mutex);
      err << "[sweep] " << s.param << "=" << format_real(values[vi]) << " seed " << seed << " test macro_f1 "
          << test[i].macro_f1 << '\n';
    }
  });

  const fs::path root(o.out);
  fs::create_directories(root);
  auto f = open_out(root / "sweep.csv");
  f << "param,value,n_seeds,acc_mean,acc_std,macro_f1_mean,macro_f1_std,auroc_mean,auroc_std\n";
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> acc, f1, auc;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& r = test[vi * seeds.size() + si];
      acc.push_back(r.acc);
      f1.push_back(r.macro_f1);
      auc.push_back(r.auroc);
    }
    const auto [am, as] = mean_std(acc);
    const auto [fm, fsd] = mean_std(f1);
    const auto [um, us] = mean_std(auc);
    f << s.param << ',' << format_real(values[vi]) << ',' << seeds.size() << ',' << format_real(am) << ','
      << format_real(as) << ',' << format_real(fm) << ',' << format_real(fsd) << ',' << format_real(um) << ','
      << format_real(us) << '\n';
  }
  out << "wrote " << (root / "sweep.csv").string() << " (" << values.size() << " rows)\n";
  return kOk;
}

struct AnalyzeOptions {
  std::string dataset;
  std::uint64_t data_seed = 0;
  std::string checkpoint;
  std::string ambiguity;
  std::string splits;
  std::uint64_t seed = 0;
  std::string out = "out";
  double h_star = kDefaultHomophilyCut;
  bool all_unlabeled = false;
};

std::vector<double> read_ambiguity_csv(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> scores(n, 0.0);
  std::vector<char> seen(n, 0);
  std::string line;
  std::getline(in, line);
  if (line.rfind("node_id,score", 0) != 0) throw std::runtime_error(path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, score;
    std::getline(ss, id, ',');
    std::getline(ss, score, ',');
    const auto v = static_cast<std::size_t>(std::stoull(id));
    if (v >= n) throw std::runtime_error(path.string() + ": node id out of range");
    scores[v] = std::stod(score);
    seen[v] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::runtime_error(path.string() + ": missing scores for some nodes");
  }
  return scores;
}

int cmd_analyze(const AnalyzeOptions& a, std::ostream& out) {
  const Bundle bundle = resolve_dataset(a.dataset, a.data_seed);
  const Graph& g = bundle.graph;
  const ModelParams params = load_checkpoint(a.checkpoint);
  const SplitMasks masks = a.splits.empty() ? splits_for(bundle, a.seed) : read_splits_json(a.splits);
  masks.validate(g);
  const ForwardOutput fwd = forward(params, g);
  const auto preds = argmax_rows(fwd.class_probs);
  // Without a training memory, a single prediction's normalized entropy stands in.
  const std::vector<double> scores =
      a.ambiguity.empty() ? ambiguity_scores(fwd.class_probs) : read_ambiguity_csv(a.ambiguity, g.num_nodes());

  std::vector<NodeId> mask = masks.test;
  if (a.all_unlabeled) {
    mask.insert(mask.end(), masks.val.begin(), masks.val.end());
    std::vector<char> train(g.num_nodes(), 0);
    for (NodeId v : masks.train) train[v] = 1;
    std::vector<char> taken(g.num_nodes(), 0);
    for (NodeId v : mask) taken[v] = 1;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (!train[v] && !taken[v]) mask.push_back(v);
    }
    std::sort(mask.begin(), mask.end());
  }

  const fs::path root(a.out);
  fs::create_directories(root);
  const auto s1 = group_report(strategy1_groups(g, a.h_star), preds, g.labels(), scores, mask);
  const auto s2 = group_report(strategy2_groups(g, a.h_star), preds, g.labels(), scores, mask);
  {
    auto f = open_out(root / "strategy1_report.csv");
    write_group_report_csv(f, s1);
  }
  {
    auto f = open_out(root / "strategy2_report.csv");
    write_group_report_csv(f, s2);
  }
  {
    auto f = open_out(root / "ambiguity_by_group.csv");
    f << "strategy,group_label,count,accuracy,mean_ambiguity\n";
    for (auto [tag, rows] : {std::pair{1, &s1}, std::pair{2, &s2}}) {
      for (const auto& r : *rows) {
        f << tag << ',' << r.label << ',' << r.count << ',' << format_real(r.accuracy) << ','
          << format_real(r.mean_ambiguity) << '\n';
      }
    }
  }
  out << "wrote group reports to " << root.string() << '\n';
  return kOk;
}

struct GenOptions {
  std::string preset = "ambiguity";
  std::uint64_t seed = 0;
  std::string out;
  bool no_splits = false;
};

int cmd_gen(const GenOptions& gopt, std::ostream& out) {
  SbmSpec spec;
  try {
    spec = sbm_preset(gopt.preset, gopt.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const Graph g = sbm_generate(spec);
  std::optional<SplitMasks> masks;
  if (!gopt.no_splits) {
    Rng rng(gopt.seed);
    masks = make_split(g, SplitRatios{}, true, rng);
  }
  save_bundle(gopt.out, g, masks ? &*masks : nullptr, "sbm-" + gopt.preset);
  out << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges to " << gopt.out << '\n';
  return kOk;
}

}  // namespace

RunOutcome run_once(TrainConfig cfg, const Graph& g, const SplitMasks& masks, std::uint64_t seed, std::ostream* log) {
  cfg.seed = seed;
  RunOutcome r;
  r.seed = seed;
  r.result = train(cfg, g, masks, log);
  const ForwardOutput fwd = forward(r.result.params, g);
  r.train = scores_on(fwd, g, masks.train);
  r.val = scores_on(fwd, g, masks.val);
  r.test = scores_on(fwd, g, masks.test);
  return r;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ambiguity-aware contrastive training for semi-supervised node classification", "disamgnn"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train one or more seeds and write metrics");
  add_train_flags(*train_cmd, train_opts);

  CommonOptions sweep_opts;
  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "train over a list of values for one hyperparameter");
  add_train_flags(*sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--param", sweep.param, "parameter to vary, e.g. lambda, mu, threshold")->required();
  sweep_cmd->add_option("--values", sweep.values, "comma-separated values")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "parallel runs (0 = all cores)");

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "per-region accuracy and ambiguity reports");
  analyze_cmd->add_option("--dataset", analyze.dataset, "sbm:<preset> or bundle directory")->required();
  analyze_cmd->add_option("--data-seed", analyze.data_seed, "seed for synthetic graph generation");
  analyze_cmd->add_option("--checkpoint", analyze.checkpoint, "checkpoint manifest")->required();
  analyze_cmd->add_option("--ambiguity", analyze.ambiguity, "ambiguity.csv written by train");
  analyze_cmd->add_option("--splits", analyze.splits, "splits.json written by train");
  analyze_cmd->add_option("--seed", analyze.seed, "split seed when no splits file is given");
  analyze_cmd->add_option("--h-star", analyze.h_star, "homophily cut between high and low");
  analyze_cmd->add_flag("--all-unlabeled", analyze.all_unlabeled, "report on every non-train node");
  analyze_cmd->add_option("--out", analyze.out, "output directory");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic SBM preset as a dataset bundle");
  gen_cmd->add_option("--preset", gen.preset, "ambiguity or separated");
  gen_cmd->add_option("--seed", gen.seed, "generator and split seed");
  gen_cmd->add_option("--out", gen.out, "bundle directory")->required();
  gen_cmd->add_flag("--no-splits", gen.no_splits, "omit splits.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep, out, err);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze, out);
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace disamgnn::cli
