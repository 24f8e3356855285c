#pragma once

// Macroscopic congestion-cascade surrogate that synthesizes ground-truth
// importance: cut one segment's capacity, let unmet demand spill upstream
// period by period, and score the decayed count of segments whose speed
// collapses.

#include <cmath>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/graph.hpp"
#include "roadrank/parallel.hpp"
#include "roadrank/scores.hpp"

namespace roadrank {

struct CascadeConfig {
  double capacity_reduction = 0.10;      // failed segment keeps this share of capacity
  double failure_speed_fraction = 0.10;  // failed when speed < this · speed limit
  double gamma = 0.9;
  std::size_t periods = 10;
  double period_length = 1.0;
  double spillback_rate = 0.5;
  double kappa = 1.0;               // flow units per lane per speed unit
  double observation_window = 1.0;  // vol / window = demand rate

  void validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_unit(capacity_reduction)) throw usage_error("capacity_reduction must lie in (0, 1)");
    if (!in_unit(failure_speed_fraction)) {
      throw usage_error("failure_speed_fraction must lie in (0, 1)");
    }
    if (!in_unit(spillback_rate)) throw usage_error("spillback_rate must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw usage_error("gamma must lie in (0, 1]");
    if (periods < 1) throw usage_error("periods must be >= 1");
    if (!(period_length > 0.0)) throw usage_error("period_length must be positive");
    if (!(kappa > 0.0)) throw usage_error("kappa must be positive");
    if (!(observation_window > 0.0)) throw usage_error("observation_window must be positive");
  }
};

struct TrafficState {
  std::vector<double> capacity;
  std::vector<double> demand;
  std::vector<double> speed_limit;

  std::size_t size() const { return capacity.size(); }

  double speed(std::size_t i) const {
    if (demand[i] <= capacity[i]) return speed_limit[i];
    return speed_limit[i] * capacity[i] / demand[i];
  }
};

inline constexpr const char* kRequiredTrafficAttributes[] = {"limiv", "nlan", "len", "vol"};

inline TrafficState assign_baseline_state(const RoadNetwork& net, const CascadeConfig& cfg) {
  std::size_t col[4];
  for (std::size_t k = 0; k < 4; ++k) {
    const auto idx = net.attribute_index(kRequiredTrafficAttributes[k]);
    if (!idx) {
      throw invalid_input(std::string("cascade simulation needs attribute '") +
                          kRequiredTrafficAttributes[k] + "'");
    }
    col[k] = *idx;
  }
  const auto& a = net.attributes();
  TrafficState s;
  for (std::size_t i = 0; i < net.num_nodes(); ++i) {
    const double limit = a(i, col[0]);
    s.speed_limit.push_back(limit);
    s.capacity.push_back(cfg.kappa * a(i, col[1]) * limit);
    s.demand.push_back(a(i, col[3]) / cfg.observation_window);
  }
  return s;
}

/// Newly failed segment counts for periods 1..Q after cutting `target`.
inline std::vector<std::size_t> cascade_failure(const RoadNetwork& net, const TrafficState& base,
                                                NodeId target, const CascadeConfig& cfg) {
  const auto n = net.num_nodes();
  if (target >= n) throw invalid_input("unknown target segment " + std::to_string(target));
  TrafficState s = base;
  s.capacity[target] *= cfg.capacity_reduction;
  std::vector<bool> failed(n, false);
  std::vector<std::size_t> counts(cfg.periods, 0);
  std::vector<double> inflow(n);
  // relative slack so products that are equal in exact arithmetic are not
  // counted as strictly below the threshold
  constexpr double kBoundarySlack = 1e-12;
  for (std::size_t t = 0; t < cfg.periods; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double threshold = cfg.failure_speed_fraction * s.speed_limit[i];
      if (!failed[i] && s.speed(i) < threshold * (1.0 - kBoundarySlack)) {
        failed[i] = true;
        ++counts[t];
      }
    }
    std::fill(inflow.begin(), inflow.end(), 0.0);
    for (NodeId j = 0; j < n; ++j) {
      const double excess = s.demand[j] - s.capacity[j];
      if (excess <= 0.0) continue;
      double upstream = 0.0;
      for (NodeId u : net.in_neighbors(j)) {
        if (u != j) upstream += s.demand[u];
      }
      if (upstream <= 0.0) continue;
      const double pushed = cfg.spillback_rate * excess * cfg.period_length;
      for (NodeId u : net.in_neighbors(j)) {
        if (u != j) inflow[u] += pushed * s.demand[u] / upstream;
      }
    }
    for (std::size_t i = 0; i < n; ++i) s.demand[i] += inflow[i];
  }
  return counts;
}

/// Σ_{t=1..Q} γ^t · n_t.
inline double importance_score(std::span<const std::size_t> counts, double gamma) {
  double total = 0.0, weight = 1.0;
  for (auto c : counts) {
    weight *= gamma;
    total += weight * static_cast<double>(c);
  }
  return total;
}

inline ImportanceScores generate_ground_truth(const RoadNetwork& net, const CascadeConfig& cfg,
                                              std::size_t threads = 1) {
  cfg.validate();
  const auto base = assign_baseline_state(net, cfg);
  ImportanceScores out;
  out.aff.assign(net.num_nodes(), 0.0);
  out.gamma = cfg.gamma;
  out.periods = cfg.periods;
  out.provenance = Provenance::kSimulated;
  parallel_for(net.num_nodes(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto counts = cascade_failure(net, base, static_cast<NodeId>(i), cfg);
      out.aff[i] = importance_score(counts, cfg.gamma);
    }
  });
  return out;
}

}  // namespace roadrank
