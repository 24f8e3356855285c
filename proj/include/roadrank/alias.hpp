#pragma once

// Walker/Vose alias tables: O(n) construction, O(1) draws from a fixed
// discrete distribution.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/rng.hpp"

namespace roadrank {

struct AliasTable {
  std::vector<double> prob;           // acceptance probability per column
  std::vector<std::uint32_t> alias;   // fallback index per column

  std::size_t size() const { return prob.size(); }

  /// Rebuilds the distribution the table encodes.
  std::vector<double> reconstruct() const {
    const auto n = size();
    std::vector<double> p(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] += prob[i];
      p[alias[i]] += 1.0 - prob[i];
    }
    for (auto& v : p) v /= static_cast<double>(n);
    return p;
  }
};

inline AliasTable build_alias(std::span<const double> p) {
  const auto n = p.size();
  if (n == 0) throw invalid_input("alias table needs a non-empty distribution");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
      throw invalid_input("alias table: negative or non-finite entry at " + std::to_string(i));
    }
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw invalid_input("alias table: probabilities sum to " + std::to_string(total));
  }

  AliasTable t;
  t.prob.resize(n);
  t.alias.resize(n);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  small.reserve(n);
  large.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = p[i] * static_cast<double>(n);
    t.alias[i] = static_cast<std::uint32_t>(i);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto g = large.back();
    t.prob[s] = scaled[s];
    t.alias[s] = g;
    // subtract in the order that loses the least precision
    scaled[g] = (scaled[g] + scaled[s]) - 1.0;
    if (scaled[g] < 1.0) {
      large.pop_back();
      small.push_back(g);
    }
  }
  // leftovers are 1 up to rounding
  for (auto g : large) t.prob[g] = 1.0;
  for (auto s : small) t.prob[s] = 1.0;
  return t;
}

inline std::size_t alias_draw(const AliasTable& t, Rng& rng) {
  const auto column = static_cast<std::size_t>(rng.below(t.size()));
  return rng.uniform() < t.prob[column] ? column : t.alias[column];
}

}  // namespace roadrank
