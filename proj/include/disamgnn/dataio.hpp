#pragma once

// Dataset bundles, deterministic splits and synthetic stochastic block models.
//
// A bundle is a directory with
//   edges.tsv     two whitespace-separated node ids per line
//   features.csv  N rows of d comma-separated reals
//   labels.csv    N integer lines
//   splits.json   optional {"train": [...], "val": [...], "test": [...]}
//   meta.json     optional {"name": ..., "C": ..., "d": ..., "N": ...}

#include "disamgnn/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace disamgnn {

struct Bundle {
  Graph graph;
  std::optional<SplitMasks> splits;
  std::string name;
};

/// Throws std::runtime_error on missing files or malformed content.
Bundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const std::filesystem::path& dir, const Graph& g, const SplitMasks* splits,
                 std::string_view name);

void write_splits_json(const std::filesystem::path& path, const SplitMasks& masks);
SplitMasks read_splits_json(const std::filesystem::path& path);

/// Relative weights, normalized by their sum.
struct SplitRatios {
  double train = 0.5;
  double val = 1.0;
  double test = 8.5;
};

/// Stratified mode apportions each split across classes by largest
/// remainder with at least one train node per class. Every ratio must be
/// positive and every class in 0..C must have members.
SplitMasks make_split(const Graph& g, SplitRatios ratios, bool stratified, Rng& rng);

struct SbmSpec {
  std::vector<std::size_t> class_sizes;
  /// Symmetric C x C edge probabilities between blocks.
  Matrix block_probs;
  /// C x d per-class feature means.
  Matrix class_means;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  /// Scalar intra/inter probabilities, means at the simplex corners e_k
  /// padded with zeros to `feature_dim`.
  static SbmSpec uniform(std::vector<std::size_t> sizes, double intra_p, double inter_p,
                         std::size_t feature_dim, double sigma, std::uint64_t seed);
  void validate() const;
};

/// Nodes are laid out block by block in class order.
Graph sbm_generate(const SbmSpec& spec);

/// Three classes 300/300/60 where the small class sits between the two large
/// ones: minority-major edge probability is 5x the major-major one.
SbmSpec ambiguity_preset(std::uint64_t seed = 0);
/// Three balanced, well separated classes.
SbmSpec separated_preset(std::uint64_t seed = 0);
/// "ambiguity" or "separated".
SbmSpec sbm_preset(std::string_view name, std::uint64_t seed = 0);

}  // namespace disamgnn
