#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "roadrank/graph.hpp"
#include "roadrank/rng.hpp"

namespace roadrank::testing {

/// Network with every attribute set to one unless given.
inline RoadNetwork make_net(std::size_t n, std::vector<Edge> edges, Matrix attrs = {}) {
  if (attrs.rows == 0) attrs = Matrix(n, 1, 1.0);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < attrs.cols; ++k) names.push_back("a" + std::to_string(k));
  return RoadNetwork::build(n, std::move(edges), std::move(attrs), std::move(names));
}

/// Directed Erdos-Renyi graph with random positive attributes.
inline RoadNetwork random_net(std::size_t n, double p, std::uint64_t seed, std::size_t m = 1) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i != j && rng.uniform() < p) edges.push_back({i, j});
    }
  }
  Matrix attrs(n, m);
  for (auto& v : attrs.data) v = rng.uniform(0.1, 10.0);
  return make_net(n, std::move(edges), std::move(attrs));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("roadrank_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& body) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto out = text::open_output(path);
  out << body;
}

// Betweenness by brute force: for every ordered (s, t), iterative deepening
// enumerates all simple paths of the smallest length that reaches t, and each
// interior node collects its share of them.
inline std::vector<double> enumerate_betweenness(const RoadNetwork& net) {
  const auto n = net.num_nodes();
  std::vector<double> bc(n, 0.0);
  for (NodeId s = 0; s < n; ++s) {
    for (NodeId t = 0; t < n; ++t) {
      if (s == t) continue;
      for (std::size_t depth = 1; depth < n; ++depth) {
        std::vector<std::vector<NodeId>> found;
        std::vector<NodeId> path{s};
        std::vector<bool> on_path(n, false);
        on_path[s] = true;
        auto dfs = [&](auto&& self, NodeId v) -> void {
          if (path.size() == depth + 1) {
            if (v == t) found.push_back(path);
            return;
          }
          if (v == t) return;
          for (NodeId w : net.out_neighbors(v)) {
            if (on_path[w]) continue;
            on_path[w] = true;
            path.push_back(w);
            self(self, w);
            path.pop_back();
            on_path[w] = false;
          }
        };
        dfs(dfs, s);
        if (found.empty()) continue;
        for (const auto& p : found) {
          for (std::size_t k = 1; k + 1 < p.size(); ++k) {
            bc[p[k]] += 1.0 / static_cast<double>(found.size());
          }
        }
        break;
      }
    }
  }
  return bc;
}

}  // namespace roadrank::testing
