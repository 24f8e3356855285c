#pragma once

// Evaluation metrics: pairwise micro/macro F1 and the Diff(Z) rank
// displacement measure.

#include <algorithm>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/graph.hpp"

namespace roadrank {

struct MetricReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double diff = 0.0;
  std::size_t pairs = 0;
  // confusion counts, positive class = 1
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

/// Micro-F1 pools both classes (equals accuracy here); macro-F1 averages the
/// per-class F1, with a class absent from both lists scoring 0.
inline F1Scores micro_macro_f1(std::span<const int> predicted, std::span<const int> truth,
                               MetricReport* counts = nullptr) {
  if (predicted.size() != truth.size()) throw invalid_input("F1: length mismatch");
  if (predicted.empty()) throw invalid_input("F1: empty input");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const bool p = predicted[k] != 0, t = truth[k] != 0;
    tp += p && t;
    fp += p && !t;
    tn += !p && !t;
    fn += !p && t;
  }
  auto f1 = [](std::size_t hit, std::size_t false_pos, std::size_t false_neg) {
    const auto denom = 2 * hit + false_pos + false_neg;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(hit) / static_cast<double>(denom);
  };
  // pooled over both classes: TP = correct, FP = FN = wrong
  const auto correct = tp + tn, wrong = fp + fn;
  F1Scores out;
  out.micro = f1(correct, wrong, wrong);
  out.macro = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
  if (counts) {
    counts->tp = tp;
    counts->fp = fp;
    counts->tn = tn;
    counts->fn = fn;
    counts->pairs = predicted.size();
    counts->micro_f1 = out.micro;
    counts->macro_f1 = out.macro;
  }
  return out;
}

/// Nodes of z sorted by descending score, ties by ascending id.
inline std::vector<NodeId> descending_by_score(std::span<const NodeId> z,
                                               std::span<const double> scores) {
  std::vector<NodeId> out(z.begin(), z.end());
  for (auto v : out) {
    if (v >= scores.size()) throw invalid_input("no score for node " + std::to_string(v));
  }
  std::sort(out.begin(), out.end(), [&](NodeId a, NodeId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return out;
}

/// Σ |pos(z, Z) − pos(z, decs(Z))| / ⌊n²/2⌋. A single-node list scores 0.
inline double diff_metric(std::span<const NodeId> z, std::span<const double> scores) {
  if (z.empty()) throw invalid_input("Diff of an empty ranking");
  const auto ideal = descending_by_score(z, scores);
  const auto n = z.size();
  if (n == 1) return 0.0;
  std::vector<std::size_t> ideal_pos(scores.size(), 0);
  for (std::size_t k = 0; k < n; ++k) ideal_pos[ideal[k]] = k;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto other = ideal_pos[z[k]];
    total += static_cast<double>(k > other ? k - other : other - k);
  }
  return total / static_cast<double>((n * n) / 2);
}

}  // namespace roadrank
