#pragma once

// Classic centrality baselines on the directed, unweighted road graph.

#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/graph.hpp"

namespace roadrank {

struct ScoreVector {
  std::string method;
  std::vector<double> values;
};

/// In-degree + out-degree over the input edges; a self-loop counts once and
/// the loops build() adds to sinks are left out.
inline ScoreVector degree_centrality(const RoadNetwork& net) {
  ScoreVector s{"dc", std::vector<double>(net.num_nodes(), 0.0)};
  for (const auto& e : net.edges()) {
    if (net.is_added_loop(e)) continue;
    s.values[e.src] += 1.0;
    if (e.dst != e.src) s.values[e.dst] += 1.0;
  }
  return s;
}

/// Brandes accumulation over BFS shortest paths, all ordered (s, t) pairs,
/// endpoints excluded. Self-loops never lie on a shortest path.
inline ScoreVector betweenness_centrality(const RoadNetwork& net) {
  const auto n = net.num_nodes();
  ScoreVector out{"bc", std::vector<double>(n, 0.0)};
  std::vector<std::int64_t> dist(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<std::vector<NodeId>> preds(n);
  std::vector<NodeId> stack;
  stack.reserve(n);
  for (NodeId s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : preds) p.clear();
    stack.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    std::queue<NodeId> q;
    q.push(s);
    while (!q.empty()) {
      const auto v = q.front();
      q.pop();
      stack.push_back(v);
      for (NodeId w : net.out_neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      const auto w = *it;
      for (NodeId v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) out.values[w] += delta[w];
    }
  }
  return out;
}

/// Power iteration p ← d·M̄p + (1−d)/n until the l1 change drops below tol.
inline ScoreVector pagerank(const RoadNetwork& net, double damping = 0.85, double tol = 1e-10,
                            std::size_t max_iter = 10000) {
  const auto n = net.num_nodes();
  if (n == 0) return {"pagerank", {}};
  std::vector<double> p(n, 1.0 / static_cast<double>(n)), next(n);
  double residual = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), (1.0 - damping) / static_cast<double>(n));
    for (NodeId i = 0; i < n; ++i) {
      const double share = damping * p[i] / static_cast<double>(net.out_degree(i));
      for (NodeId j : net.out_neighbors(i)) next[j] += share;
    }
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - p[i]);
    p.swap(next);
    if (residual < tol) return {"pagerank", p};
  }
  throw numerical_error("pagerank did not converge; l1 residual " + std::to_string(residual));
}

}  // namespace roadrank
