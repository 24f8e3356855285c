#pragma once

// Ranking output files and top-k plot data.

#include <algorithm>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/metrics.hpp"
#include "roadrank/ranker.hpp"
#include "roadrank/text.hpp"

namespace roadrank {

inline void write_ranking(const RankingResult& r, std::ostream& out) {
  out << "rank,node_id,copeland,rating_sum\n";
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    out << k + 1 << ',' << r.order[k] << ',' << r.copeland[k] << ','
        << text::format_double(r.rating_sum[k]) << '\n';
  }
}

/// Reads the node order back from a ranking CSV.
inline std::vector<NodeId> read_ranking(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::uint64_t, NodeId>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line, ',');
    if (lineno == 1) {
      if (cols.size() < 2 || cols[0] != "rank" || cols[1] != "node_id") {
        throw invalid_input(origin + ": header must start with rank,node_id");
      }
      continue;
    }
    const auto rank = cols.size() >= 2 ? text::parse_uint(cols[0]) : std::nullopt;
    const auto node = cols.size() >= 2 ? text::parse_uint(cols[1]) : std::nullopt;
    if (!rank || !node) {
      throw invalid_input(origin + ":" + std::to_string(lineno) + ": bad ranking row");
    }
    rows.push_back({*rank, static_cast<NodeId>(*node)});
  }
  std::sort(rows.begin(), rows.end());
  std::vector<NodeId> order;
  std::set<NodeId> seen;
  for (const auto& [rank, node] : rows) {
    if (!seen.insert(node).second) {
      throw invalid_input(origin + ": node " + std::to_string(node) + " ranked twice");
    }
    order.push_back(node);
  }
  return order;
}

inline void write_pair_ratings(const PairwiseRatings& r, std::ostream& out) {
  out << "i,j,rating\n";
  for (std::size_t a = 0; a < r.nodes.size(); ++a) {
    for (std::size_t b = 0; b < r.nodes.size(); ++b) {
      if (a != b) {
        out << r.nodes[a] << ',' << r.nodes[b] << ',' << text::format_double(r.values(a, b))
            << '\n';
      }
    }
  }
}

struct TopKOverlap {
  std::vector<NodeId> predicted;
  std::vector<NodeId> actual;
  std::size_t overlap = 0;
};

/// Top-k of the predicted order against the top-k of the same nodes by
/// ground-truth score.
inline TopKOverlap top_k_overlap(std::span<const NodeId> ranking, std::span<const double> scores,
                                 std::size_t k) {
  if (k == 0 || k > ranking.size()) {
    throw usage_error("k must lie in [1, " + std::to_string(ranking.size()) + "]");
  }
  TopKOverlap out;
  const auto ideal = descending_by_score(ranking, scores);
  out.predicted.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k));
  out.actual.assign(ideal.begin(), ideal.begin() + static_cast<std::ptrdiff_t>(k));
  const std::set<NodeId> actual(out.actual.begin(), out.actual.end());
  for (auto v : out.predicted) out.overlap += actual.count(v);
  return out;
}

inline TopKOverlap export_plotdata(std::span<const NodeId> ranking, std::span<const double> scores,
                                   std::size_t k, std::ostream& out) {
  auto t = top_k_overlap(ranking, scores, k);
  const std::set<NodeId> pred(t.predicted.begin(), t.predicted.end());
  const std::set<NodeId> act(t.actual.begin(), t.actual.end());
  out << "# overlap=" << t.overlap << " k=" << k << '\n';
  out << "position,predicted_node,predicted_hit,actual_node,actual_hit\n";
  for (std::size_t q = 0; q < k; ++q) {
    out << q + 1 << ',' << t.predicted[q] << ',' << act.count(t.predicted[q]) << ','
        << t.actual[q] << ',' << pred.count(t.actual[q]) << '\n';
  }
  return t;
}

}  // namespace roadrank
