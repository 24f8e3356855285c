#include <gtest/gtest.h>

#include "helpers.hpp"
#include "roadrank/cascade.hpp"

namespace roadrank {
namespace {

using testing::TempDir;

struct Segment {
  double limiv, nlan, vol;
};

RoadNetwork traffic_net(const std::vector<Segment>& segs, std::vector<Edge> edges) {
  Matrix a(segs.size(), 4);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    a(i, 0) = segs[i].limiv;
    a(i, 1) = segs[i].nlan;
    a(i, 2) = 100.0;
    a(i, 3) = segs[i].vol;
  }
  return RoadNetwork::build(segs.size(), std::move(edges), std::move(a),
                            {"limiv", "nlan", "len", "vol"});
}

// Straightforward re-simulation over a dense adjacency matrix, written
// independently of cascade_failure.
std::vector<std::size_t> reference_cascade(const RoadNetwork& net, NodeId target,
                                           const CascadeConfig& cfg) {
  const auto n = net.num_nodes();
  std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
  for (const auto& e : net.edges()) adj[e.src][e.dst] = 1;
  std::vector<double> cap(n), dem(n), lim(n);
  for (std::size_t i = 0; i < n; ++i) {
    lim[i] = net.attributes()(i, 0);
    cap[i] = cfg.kappa * net.attributes()(i, 1) * lim[i];
    dem[i] = net.attributes()(i, 3) / cfg.observation_window;
  }
  cap[target] *= cfg.capacity_reduction;
  std::vector<std::size_t> first_fail(n, 0);  // 0 = never
  for (std::size_t t = 1; t <= cfg.periods; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double speed = dem[i] > cap[i] ? lim[i] * cap[i] / dem[i] : lim[i];
      if (first_fail[i] == 0 && speed < cfg.failure_speed_fraction * lim[i] * (1 - 1e-12)) {
        first_fail[i] = t;
      }
    }
    auto next = dem;
    for (std::size_t j = 0; j < n; ++j) {
      if (dem[j] <= cap[j]) continue;
      double share_total = 0.0;
      for (std::size_t u = 0; u < n; ++u) {
        if (u != j && adj[u][j]) share_total += dem[u];
      }
      if (share_total <= 0.0) continue;
      for (std::size_t u = 0; u < n; ++u) {
        if (u != j && adj[u][j]) {
          next[u] += cfg.spillback_rate * (dem[j] - cap[j]) * cfg.period_length * dem[u] /
                     share_total;
        }
      }
    }
    dem = next;
  }
  std::vector<std::size_t> counts(cfg.periods, 0);
  for (auto f : first_fail) {
    if (f) ++counts[f - 1];
  }
  return counts;
}

TEST(BaselineState, Examples) {
  CascadeConfig cfg;
  const auto free_flow = traffic_net({{60, 2, 0}, {40, 1, 0}}, {{0, 1}, {1, 0}});
  const auto s = assign_baseline_state(free_flow, cfg);
  EXPECT_EQ(s.capacity[0], 120.0);
  EXPECT_EQ(s.speed(0), 60.0);
  EXPECT_EQ(s.speed(1), 40.0);

  cfg.kappa = 2.5;
  const auto jam = traffic_net({{60, 2, 600}, {40, 1, 1}}, {{0, 1}, {1, 0}});
  const auto j = assign_baseline_state(jam, cfg);
  EXPECT_EQ(j.capacity[0], 300.0);
  EXPECT_EQ(j.speed(0), 30.0);  // demand = 2 × capacity

  Matrix a(1, 2, 1.0);
  const auto missing = RoadNetwork::build(1, {}, a, {"limiv", "nlan"});
  EXPECT_THROW(assign_baseline_state(missing, cfg), Error);
}

TEST(CascadeFailure, NoDemandNoFailure) {
  const auto net = traffic_net({{50, 2, 0}, {50, 2, 0}, {50, 1, 0}}, {{0, 1}, {1, 2}, {2, 0}});
  const CascadeConfig cfg;
  const auto base = assign_baseline_state(net, cfg);
  for (NodeId t = 0; t < 3; ++t) {
    for (auto c : cascade_failure(net, base, t, cfg)) EXPECT_EQ(c, 0u);
  }
  for (double v : generate_ground_truth(net, cfg).aff) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(cascade_failure(net, base, 3, cfg), Error);
}

TEST(CascadeFailure, SpeedThresholdBoundary) {
  const CascadeConfig cfg;
  // capacity 100; cut to 10
  const auto exact = traffic_net({{50, 2, 100}}, {});
  const auto at = cascade_failure(exact, assign_baseline_state(exact, cfg), 0, cfg);
  EXPECT_EQ(at[0], 0u);  // speed = 0.1·limit is not below it
  const auto over = traffic_net({{50, 2, 101}}, {});
  const auto above = cascade_failure(over, assign_baseline_state(over, cfg), 0, cfg);
  EXPECT_EQ(above[0], 1u);
}

TEST(CascadeFailure, ChainHandTrace) {
  // a→b→c; capacities 20, 20, 100; demands 10, 20, 110; cut c.
  // c fails at t1 (110 > 10·10). Spill 50/period into b; b passes its excess
  // on to a: b = 70, 120, 170, 220 → fails at t5 (> 200); a = 35, 85, 160,
  // 260 → fails at t6.
  const auto net = traffic_net({{10, 2, 10}, {10, 2, 20}, {10, 10, 110}}, {{0, 1}, {1, 2}});
  const CascadeConfig cfg;
  const auto counts = cascade_failure(net, assign_baseline_state(net, cfg), 2, cfg);
  EXPECT_EQ(counts, (std::vector<std::size_t>{1, 0, 0, 0, 1, 1, 0, 0, 0, 0}));
  EXPECT_EQ(counts, reference_cascade(net, 2, cfg));
}

TEST(CascadeFailure, StarHubScoresHighest) {
  // hub 0 is fed by leaves 1..5 and is saturated
  std::vector<Segment> segs{{10, 4, 44}};
  std::vector<Edge> edges;
  for (NodeId leaf = 1; leaf <= 5; ++leaf) {
    segs.push_back({10, 1, 3.0 + leaf});
    edges.push_back({leaf, 0});
  }
  const auto net = traffic_net(segs, edges);
  CascadeConfig cfg;
  cfg.spillback_rate = 0.9;
  const auto gt = generate_ground_truth(net, cfg);
  const auto base = assign_baseline_state(net, cfg);
  for (NodeId i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(gt.aff[i], importance_score(reference_cascade(net, i, cfg), cfg.gamma));
    if (i > 0) {
      EXPECT_GT(gt.aff[0], gt.aff[i]);
    }
    EXPECT_EQ(cascade_failure(net, base, i, cfg), reference_cascade(net, i, cfg));
  }
  EXPECT_GT(gt.aff[0], 0.0);
}

TEST(CascadeFailure, MatchesReferenceOnRandomNetworks) {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng.below(8);
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < n; ++i) {
      const double lim = 30 + 10 * static_cast<double>(rng.below(4));
      const double lanes = 1 + static_cast<double>(rng.below(3));
      segs.push_back({lim, lanes, std::round(lim * lanes * rng.uniform(0.2, 1.5))});
    }
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        if (i != j && rng.uniform() < 0.3) edges.push_back({i, j});
      }
    }
    const auto net = traffic_net(segs, edges);
    CascadeConfig cfg;
    cfg.spillback_rate = rng.uniform(0.2, 0.9);
    const auto base = assign_baseline_state(net, cfg);
    for (NodeId t = 0; t < n; ++t) {
      const auto counts = cascade_failure(net, base, t, cfg);
      ASSERT_EQ(counts, reference_cascade(net, t, cfg));
      std::size_t total = 0;
      for (auto c : counts) total += c;
      EXPECT_LE(total, n);  // each segment counted at most once
    }
  }
}

TEST(CascadeFailure, MoreTargetDemandNeverLowersItsScore) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < n; ++i) {
      const double lanes = 1 + static_cast<double>(rng.below(3));
      segs.push_back({40, lanes, std::round(40 * lanes * rng.uniform(0.2, 1.4))});
    }
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        if (i != j && rng.uniform() < 0.35) edges.push_back({i, j});
      }
    }
    const NodeId target = static_cast<NodeId>(rng.below(n));
    const CascadeConfig cfg;
    double prev = -1.0;
    for (double extra : {0.0, 5.0, 20.0, 60.0, 150.0, 400.0}) {
      auto bumped = segs;
      bumped[target].vol += extra;
      const auto net = traffic_net(bumped, edges);
      const double aff = importance_score(reference_cascade(net, target, cfg), cfg.gamma);
      EXPECT_DOUBLE_EQ(
          aff, importance_score(cascade_failure(net, assign_baseline_state(net, cfg), target, cfg),
                                cfg.gamma));
      EXPECT_GE(aff, prev) << "trial " << trial << " extra " << extra;
      prev = aff;
    }
  }
}

TEST(ImportanceScore, Examples) {
  EXPECT_NEAR(importance_score(std::vector<std::size_t>{2, 1}, 0.9), 2.61, 1e-12);
  EXPECT_EQ(importance_score(std::vector<std::size_t>{0, 0, 0}, 0.9), 0.0);
  // strictly decreasing in t for equal counts
  EXPECT_GT(importance_score(std::vector<std::size_t>{1, 0}, 0.9),
            importance_score(std::vector<std::size_t>{0, 1}, 0.9));
  // linear in counts
  EXPECT_NEAR(importance_score(std::vector<std::size_t>{4, 2, 6}, 0.9),
              2 * importance_score(std::vector<std::size_t>{2, 1, 3}, 0.9), 1e-12);
}

TEST(GroundTruth, DeterministicAndThreadIndependent) {
  Rng rng(2);
  std::vector<Segment> segs;
  std::vector<Edge> edges;
  for (NodeId i = 0; i < 30; ++i) {
    segs.push_back({50, 2, std::round(100 * rng.uniform(0.3, 1.2))});
    edges.push_back({i, static_cast<NodeId>((i + 1) % 30)});
    edges.push_back({i, static_cast<NodeId>((i + 7) % 30)});
  }
  const auto net = traffic_net(segs, edges);
  const CascadeConfig cfg;
  const auto a = generate_ground_truth(net, cfg, 1);
  EXPECT_EQ(a.aff, generate_ground_truth(net, cfg, 1).aff);
  EXPECT_EQ(a.aff, generate_ground_truth(net, cfg, 4).aff);
  EXPECT_EQ(a.provenance, Provenance::kSimulated);
}

TEST(ImportScores, CoverageAndRoundTrip) {
  TempDir dir;
  ImportanceScores s;
  s.aff = {0.0, 2.61, 1.0 / 3.0, 0.9};
  export_scores(s, dir / "s.csv");
  const auto back = import_scores(dir / "s.csv", 4);
  EXPECT_EQ(back.aff, s.aff);
  EXPECT_EQ(back.provenance, Provenance::kImported);

  testing::write_text(dir / "gap.csv", "node_id,aff\n0,1\n1,1\n2,1\n3,1\n4,1\n5,1\n6,1\n8,1\n");
  try {
    import_scores(dir / "gap.csv", 9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("node 7"), std::string::npos) << e.what();
  }
  testing::write_text(dir / "neg.csv", "node_id,aff\n0,1\n1,-1\n");
  EXPECT_THROW(import_scores(dir / "neg.csv"), Error);
}

}  // namespace
}  // namespace roadrank
