#include "disamgnn/analysis.hpp"

#include "disamgnn/format.hpp"

#include <algorithm>
#include <array>
#include <ostream>
#include <stdexcept>

namespace disamgnn {

std::string_view to_string(ClassTier t) {
  switch (t) {
    case ClassTier::Majority: return "Majority";
    case ClassTier::Middle: return "Middle";
    case ClassTier::Minority: return "Minority";
  }
  return "?";
}

std::vector<ClassTier> class_tiers(const Graph& g) {
  const auto counts = g.class_counts();
  std::size_t lo = 0, hi = 0;
  bool any = false;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    lo = any ? std::min(lo, c) : c;
    hi = any ? std::max(hi, c) : c;
    any = true;
  }
  std::vector<ClassTier> tiers(counts.size(), ClassTier::Minority);
  if (!any) return tiers;
  const double width = static_cast<double>(hi - lo) / 3.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    if (hi == lo) {
      tiers[k] = ClassTier::Majority;
      continue;
    }
    const double c = static_cast<double>(counts[k]);
    if (c <= static_cast<double>(lo) + width) {
      tiers[k] = ClassTier::Minority;
    } else if (c <= static_cast<double>(lo) + 2.0 * width) {
      tiers[k] = ClassTier::Middle;
    } else {
      tiers[k] = ClassTier::Majority;
    }
  }
  return tiers;
}

namespace {

void finish_counts(NodeGroups& groups) {
  groups.counts.assign(groups.labels.size(), 0);
  for (std::size_t id : groups.group_of) ++groups.counts[id];
}

}  // namespace

NodeGroups strategy1_groups(const Graph& g, double h_star) {
  const auto tiers = class_tiers(g);
  static constexpr std::array<ClassTier, 3> kTierOrder{ClassTier::Majority, ClassTier::Middle, ClassTier::Minority};
  static constexpr std::array<const char*, 3> kSub{"Same-class", "Minor-class", "Others"};

  NodeGroups out;
  out.strategy = 1;
  for (ClassTier t : kTierOrder) {
    for (const char* sub : kSub) out.labels.push_back(std::string(to_string(t)) + "/" + sub);
  }
  out.group_of.resize(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const auto tier = static_cast<std::size_t>(tiers[g.label(v)]);
    std::size_t sub = 0;
    if (node_homophily(g, v) < h_star) {
      std::array<std::size_t, 3> by_tier{0, 0, 0};
      for (NodeId u : g.neighbors(v)) ++by_tier[static_cast<std::size_t>(tiers[g.label(u)])];
      const std::size_t minority = by_tier[static_cast<std::size_t>(ClassTier::Minority)];
      const bool plurality = minority > by_tier[static_cast<std::size_t>(ClassTier::Majority)] &&
                             minority > by_tier[static_cast<std::size_t>(ClassTier::Middle)];
      sub = plurality ? 1 : 2;
    }
    out.group_of[v] = tier * 3 + sub;
  }
  finish_counts(out);
  return out;
}

NodeGroups strategy2_groups(const Graph& g, double h_star) {
  const auto tiers = class_tiers(g);
  NodeGroups out;
  out.strategy = 2;
  out.labels = {"AdjMinority/HighHomophily", "AdjMinority/LowHomophily", "NotAdj/HighHomophily",
                "NotAdj/LowHomophily", "Isolated"};
  out.residual = 4;
  out.group_of.resize(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    auto nbrs = g.neighbors(v);
    if (nbrs.empty()) {
      out.group_of[v] = 4;
      continue;
    }
    const bool adjacent = std::any_of(nbrs.begin(), nbrs.end(),
                                      [&](NodeId u) { return tiers[g.label(u)] == ClassTier::Minority; });
    const bool high = node_homophily(g, v) >= h_star;
    out.group_of[v] = (adjacent ? 0 : 2) + (high ? 0 : 1);
  }
  finish_counts(out);
  return out;
}

std::vector<GroupRow> group_report(const NodeGroups& groups, std::span<const ClassId> preds,
                                   std::span<const ClassId> labels, std::span<const double> scores,
                                   std::span<const NodeId> mask) {
  const std::size_t n = groups.group_of.size();
  if (preds.size() != n || labels.size() != n || scores.size() != n) {
    throw std::invalid_argument("group_report: array lengths must equal the node count");
  }
  std::vector<GroupRow> rows(groups.labels.size());
  std::vector<std::size_t> correct(rows.size(), 0);
  std::vector<double> score_sum(rows.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].label = groups.labels[i];
  for (NodeId v : mask) {
    if (v >= n) throw std::out_of_range("group_report: mask node out of range");
    const std::size_t id = groups.group_of[v];
    ++rows[id].count;
    correct[id] += preds[v] == labels[v];
    score_sum[id] += scores[v];
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].count == 0) continue;
    const auto c = static_cast<double>(rows[i].count);
    rows[i].accuracy = static_cast<double>(correct[i]) / c;
    rows[i].mean_ambiguity = score_sum[i] / c;
  }
  return rows;
}

void write_group_report_csv(std::ostream& out, std::span<const GroupRow> rows) {
  out << "group_label,count,accuracy,mean_ambiguity\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.count << ',' << format_real(r.accuracy) << ',' << format_real(r.mean_ambiguity)
        << '\n';
  }
}

}  // namespace disamgnn
