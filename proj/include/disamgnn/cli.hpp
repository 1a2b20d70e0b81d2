#pragma once

#include "disamgnn/dataio.hpp"
#include "disamgnn/trainer.hpp"

#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

namespace disamgnn::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kRuntimeError = 3,
};

/// Thrown for invalid flags or flag combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Resolves "sbm:<preset>" or a bundle directory. Relative directories that
/// do not exist are looked up under $DISAMGNN_DATA.
Bundle resolve_dataset(const std::string& spec, std::uint64_t data_seed);

/// Bundle splits when present, else a stratified 5/10/85 split from `seed`.
SplitMasks splits_for(const Bundle& bundle, std::uint64_t seed);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<double> parse_value_list(const std::string& text);

/// Sets a hyperparameter by its flag name (without dashes), e.g. "lambda".
void set_param(TrainConfig& cfg, const std::string& name, double value);

struct SplitScores {
  double acc = 0.0;
  double macro_f1 = 0.0;
  double auroc = 0.0;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  TrainResult result;
  SplitScores train, val, test;
};

RunOutcome run_once(TrainConfig cfg, const Graph& g, const SplitMasks& masks, std::uint64_t seed,
                    std::ostream* log = nullptr);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace disamgnn::cli
