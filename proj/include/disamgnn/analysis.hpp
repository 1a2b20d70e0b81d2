#pragma once

// Graph-region splits for per-group evaluation.
//
// Strategy 1 tiers classes by frequency (Majority / Middle / Minority) and
// splits each tier by neighborhood composition. Strategy 2 splits nodes by
// whether they touch a Minority-tier class and by homophily level.

#include "disamgnn/graph.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace disamgnn {

enum class ClassTier { Majority, Middle, Minority };

std::string_view to_string(ClassTier t);

/// Equal-width bins over [min count, max count] of the classes that occur,
/// upper-inclusive. Classes absent from the graph count as Minority. When
/// every class has the same size all are Majority.
std::vector<ClassTier> class_tiers(const Graph& g);

struct NodeGroups {
  int strategy = 0;
  /// Group index per node into `labels`.
  std::vector<std::size_t> group_of;
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
  /// Index of the bucket holding excluded nodes, if the strategy has one.
  std::optional<std::size_t> residual;
};

constexpr double kDefaultHomophilyCut = 0.5;

/// Nine groups "<Tier>/<Same-class|Minor-class|Others>".
NodeGroups strategy1_groups(const Graph& g, double h_star = kDefaultHomophilyCut);

/// Four groups "<AdjMinority|NotAdj>/<HighHomophily|LowHomophily>" plus a
/// residual "Isolated" bucket.
NodeGroups strategy2_groups(const Graph& g, double h_star = kDefaultHomophilyCut);

struct GroupRow {
  std::string label;
  /// Masked members only.
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_ambiguity = 0.0;
};

/// Per group: masked member count, accuracy and mean ambiguity score over
/// those members. Empty groups report zeros.
std::vector<GroupRow> group_report(const NodeGroups& groups, std::span<const ClassId> preds,
                                   std::span<const ClassId> labels, std::span<const double> scores,
                                   std::span<const NodeId> mask);

/// group_label,count,accuracy,mean_ambiguity
void write_group_report_csv(std::ostream& out, std::span<const GroupRow> rows);

}  // namespace disamgnn
