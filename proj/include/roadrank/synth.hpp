#pragma once

// Reproducible synthetic grid road networks for tests and demos.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "roadrank/error.hpp"
#include "roadrank/graph.hpp"
#include "roadrank/rng.hpp"

namespace roadrank {

struct SynthConfig {
  std::size_t rows = 5;
  std::size_t cols = 5;
  std::uint64_t seed = 1;
  double min_load = 0.2;  // baseline demand / capacity range
  double max_load = 1.1;
};

/// rows × cols cells, each a segment linked both ways to its 4-neighbours,
/// carrying limiv, nlan, len, vol, avgv attributes.
inline RoadNetwork synth_grid(const SynthConfig& cfg) {
  if (cfg.rows < 1 || cfg.cols < 1) throw usage_error("grid needs at least one row and column");
  if (!(cfg.min_load >= 0.0 && cfg.max_load >= cfg.min_load)) throw usage_error("bad load range");
  const auto n = cfg.rows * cfg.cols;
  std::vector<Edge> edges;
  auto id = [&](std::size_t r, std::size_t c) { return static_cast<NodeId>(r * cfg.cols + c); };
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.cols; ++c) {
      if (c + 1 < cfg.cols) {
        edges.push_back({id(r, c), id(r, c + 1)});
        edges.push_back({id(r, c + 1), id(r, c)});
      }
      if (r + 1 < cfg.rows) {
        edges.push_back({id(r, c), id(r + 1, c)});
        edges.push_back({id(r + 1, c), id(r, c)});
      }
    }
  }
  static constexpr double kLimits[] = {30.0, 40.0, 50.0, 60.0, 80.0};
  Rng rng(stage_seed(cfg.seed, Stage::kSynth));
  Matrix attrs(n, 5);
  for (std::size_t i = 0; i < n; ++i) {
    const double limit = kLimits[rng.below(5)];
    const double lanes = static_cast<double>(1 + rng.below(4));
    const double length = std::round(rng.uniform(50.0, 500.0));
    const double capacity = lanes * limit;
    const double volume = std::round(capacity * rng.uniform(cfg.min_load, cfg.max_load));
    const double speed = limit * std::min(1.0, capacity / std::max(volume, 1.0)) *
                         rng.uniform(0.85, 1.0);
    attrs(i, 0) = limit;
    attrs(i, 1) = lanes;
    attrs(i, 2) = length;
    attrs(i, 3) = volume;
    attrs(i, 4) = std::round(speed * 100.0) / 100.0;
  }
  return RoadNetwork::build(n, std::move(edges), std::move(attrs),
                            {"limiv", "nlan", "len", "vol", "avgv"});
}

}  // namespace roadrank
