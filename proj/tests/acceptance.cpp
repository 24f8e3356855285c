// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "helpers.hpp"
#include "roadrank/alias.hpp"
#include "roadrank/baselines.hpp"
#include "roadrank/cascade.hpp"
#include "roadrank/metrics.hpp"
#include "roadrank/synth.hpp"
#include "roadrank/trainer.hpp"

namespace roadrank {
namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  Rng rng(2718);
  for (int inst = 0; inst < 5; ++inst) {
    const auto n = 4 + rng.below(7);  // 4..10
    const auto num = 1 + rng.below(3);
    const auto net = testing::random_net(n, 0.35, 500 + inst, 3);
    const NormalizedViews views(net);
    const auto samples = sample_walks(net, views, {0.5, num, 4, static_cast<std::uint64_t>(inst)});
    const auto data = make_training_data(net, &samples);
    TrainConfig cfg;
    cfg.hdim = 8;
    const auto model = Model::initialized(cfg, net.num_attributes(), 77 + inst);
    std::vector<NodeId> nodes;
    std::vector<double> scores;
    for (NodeId i = 0; i < n; ++i) {
      nodes.push_back(i);
      scores.push_back(rng.uniform());
    }
    worst = std::max(worst, gradient_check(model, data, make_pairs(nodes, scores)).max_rel_error);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max relative error " + fmt(worst) + " over 5 instances, " + fmt(secs, 3) + " s"};
}

Verdict sampler_law() {
  const auto t0 = Clock::now();
  const auto net = synth_grid({4, 5, 12});
  const NormalizedViews views(net);
  const auto n = net.num_nodes(), m = net.num_attributes();
  constexpr std::size_t kWalks = 100000;
  double worst = 0.0;
  for (double alpha : {0.0, 0.5, 1.0}) {
    TransitionSampler sampler(net, views);
    const WalkConfig cfg{alpha, 1, 2, 0};
    std::vector<std::uint32_t> buf(2);
    for (NodeId i = 0; i < n; ++i) {
      const auto step = node_step_distribution(i, views);
      const auto attr = node_to_attr_distribution(i, views);
      std::vector<double> freq(n + m, 0.0);
      Rng rng(walk_stream_seed(99, i, 0, 1));
      for (std::size_t w = 0; w < kWalks; ++w) {
        walk_once(i, cfg, sampler, n, rng, buf);
        freq[buf[1]] += 1.0;
      }
      double tv = 0.0;
      for (std::size_t v = 0; v < n + m; ++v) {
        const double expected = v < n ? alpha * step[v] : (1.0 - alpha) * attr[v - n];
        tv += 0.5 * std::abs(freq[v] / kWalks - expected);
      }
      worst = std::max(worst, tv);
    }
  }
  const auto walks = sample_walks(net, views, {1.0, 150, 4, 5});
  bool nodes_only = true;
  for (auto v : walks.vertices) nodes_only = nodes_only && v < n;
  const double secs = seconds_since(t0);
  return {worst < 0.01 && nodes_only && secs < 30.0,
          "worst first-step TV " + fmt(worst) + " over 20 nodes x 3 alphas; alpha=1 node-only: " +
              (nodes_only ? "yes" : "no") + ", " + fmt(secs, 3) + " s"};
}

Verdict alias_exactness() {
  Rng rng(31337);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto size = 1 + rng.below(64);
    std::vector<double> p(size);
    double total = 0.0;
    for (auto& v : p) total += v = rng.uniform() < 0.1 ? 0.0 : rng.uniform();
    if (total == 0.0) p[0] = total = 1.0;
    for (auto& v : p) v /= total;
    const auto back = build_alias(p).reconstruct();
    for (std::size_t k = 0; k < size; ++k) worst = std::max(worst, std::abs(back[k] - p[k]));
  }
  return {worst <= 1e-12, "max reconstruction error " + fmt(worst) + " over 1000 tables"};
}

Verdict metric_oracles() {
  const std::vector<double> scores{4, 3, 2, 1};
  const double sorted = diff_metric(std::vector<NodeId>{0, 1, 2, 3}, scores);
  const double reversed = diff_metric(std::vector<NodeId>{3, 2, 1, 0}, scores);
  const double swapped = diff_metric(std::vector<NodeId>{0, 2, 1, 3}, scores);
  Rng rng(4);
  bool micro_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const auto len = 1 + rng.below(40);
    std::vector<int> p(len), t(len);
    std::size_t tp = 0, tn = 0;
    for (std::size_t k = 0; k < len; ++k) {
      p[k] = static_cast<int>(rng.below(2));
      t[k] = static_cast<int>(rng.below(2));
      tp += p[k] == 1 && t[k] == 1;
      tn += p[k] == 0 && t[k] == 0;
    }
    const double accuracy = static_cast<double>(tp + tn) / static_cast<double>(len);
    micro_ok = micro_ok && std::abs(micro_macro_f1(p, t).micro - accuracy) < 1e-15;
  }
  const bool ok = sorted == 0.0 && reversed == 1.0 && swapped == 0.25 && micro_ok;
  return {ok, "diff sorted " + fmt(sorted) + ", reversed " + fmt(reversed) + ", one swap " +
                  fmt(swapped) + "; micro-F1 == accuracy on 100 vectors: " +
                  (micro_ok ? "yes" : "no")};
}

Verdict baseline_oracles() {
  Rng rng(2025);
  std::size_t bc_mismatch = 0;
  double worst_residual = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 2 + rng.below(11);
    const auto net = testing::random_net(n, rng.uniform(0.1, 0.5), 9000 + trial);
    const auto got = betweenness_centrality(net).values;
    const auto want = testing::enumerate_betweenness(net);
    for (std::size_t i = 0; i < n; ++i) bc_mismatch += std::abs(got[i] - want[i]) > 1e-9;

    const auto p = pagerank(net).values;
    const auto w = AdjacencyView(net).dense();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double rhs = 0.15 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) rhs += 0.85 * w(j, i) * p[i];
      worst_residual = std::max(worst_residual, std::abs(p[j] - rhs));
      sum += p[j];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  return {bc_mismatch == 0 && worst_residual < 1e-9 && worst_sum <= 1e-9,
          "betweenness mismatches " + std::to_string(bc_mismatch) +
              " on 50 graphs; PageRank residual " + fmt(worst_residual) + ", |sum-1| " +
              fmt(worst_sum)};
}

Verdict importance_oracle() {
  const double a = importance_score(std::vector<std::size_t>{2, 1}, 0.9);
  const double z = importance_score(std::vector<std::size_t>{0, 0, 0, 0}, 0.9);
  return {std::abs(a - 2.61) <= 1e-12 && z == 0.0, "score(2,1) = " + fmt(a, 17) +
                                                        ", zero counts = " + fmt(z)};
}

// Pairwise micro-F1 of a fixed score vector on the ordered pairs of `nodes`.
double score_vector_micro_f1(const std::vector<double>& predicted, const std::vector<double>& truth,
                             const std::vector<NodeId>& nodes) {
  std::vector<int> p, t;
  for (auto i : nodes) {
    for (auto j : nodes) {
      if (i == j) continue;
      p.push_back(pair_label(predicted[i], predicted[j]));
      t.push_back(pair_label(truth[i], truth[j]));
    }
  }
  return micro_macro_f1(p, t).micro;
}

Verdict learnable_task() {
  const auto t0 = Clock::now();
  const auto net = synth_grid({8, 8, 7});
  ImportanceScores truth;
  const auto vol = *net.attribute_index("vol");
  const auto lanes = *net.attribute_index("nlan");
  // load per lane: a fixed monotone function of two attributes
  for (NodeId i = 0; i < net.num_nodes(); ++i) {
    truth.aff.push_back(net.attributes()(i, vol) / net.attributes()(i, lanes));
  }
  TrainConfig cfg;  // lr 0.001, batch 64, 100 epochs, hdim 8, dropout 0.45
  cfg.seed = 7;
  const NormalizedViews views(net);
  WalkConfig wc;  // alpha 0.0001, num 150, l 4
  wc.seed = 7;
  const auto samples = sample_walks(net, views, wc);
  const auto split = stratified_split(truth, cfg);
  const auto result = train_model(net, &samples, truth, split, cfg);
  const auto data = make_training_data(net, &samples);
  const auto test = evaluate_nodes(result.model, data, split.test, truth.aff);
  const double dc = score_vector_micro_f1(degree_centrality(net).values, truth.aff, split.test);
  const double secs = seconds_since(t0);
  const double f1 = test.report.micro_f1;
  return {f1 >= 0.9 && f1 >= dc && secs < 600.0,
          std::to_string(net.num_nodes()) + " nodes, test micro-F1 " + fmt(f1) + " vs DC " +
              fmt(dc) + " (" + std::to_string(split.test.size()) + " test nodes), " +
              fmt(secs, 3) + " s"};
}

Verdict ablation_ordering() {
  const Ablation modes[] = {Ablation::kFull, Ablation::kNoMG, Ablation::kNoBiLSTM,
                            Ablation::kNoEmb};
  double mean[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    const auto net = synth_grid(sc);
    const auto truth = generate_ground_truth(net, CascadeConfig{});
    const NormalizedViews views(net);
    for (int a = 0; a < 4; ++a) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.ablation = modes[a];
      WalkConfig wc;
      wc.seed = seed;
      const auto samples = sample_walks(net, views, walk_config_for(modes[a], wc));
      const auto split = stratified_split(truth, cfg);
      const auto result = train_model(net, &samples, truth, split, cfg);
      mean[a] += result.history[result.best_epoch].val_micro_f1 / 3.0;
    }
  }
  std::string detail = "mean val micro-F1 full " + fmt(mean[0]);
  bool ok = true;
  for (int a = 1; a < 4; ++a) {
    detail += ", " + to_string(modes[a]) + " " + fmt(mean[a]) + " (margin " +
              fmt(mean[0] - mean[a], 3) + ")";
    ok = ok && mean[0] >= mean[a];
  }
  return {ok, detail};
}

int cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"roadrank"};
  full.insert(full.end(), args.begin(), args.end());
  std::ostringstream out, err;
  const int code = cli::run(full, out, err);
  if (code != 0) std::cerr << "cli failed: " << err.str();
  return code;
}

Verdict determinism() {
  const std::vector<std::string> outputs{
      "net/edges.csv", "net/attributes.csv", "aff.csv",        "s.txt",
      "m.ckpt",        "m.ckpt.history.csv", "m.ckpt.splits.csv", "r.csv",
      "ratings.csv",   "plot.csv",           "eval.txt",       "dc.csv",
      "bc.csv",        "pr.csv",             "grad.txt"};
  auto pipeline = [&](const testing::TempDir& d) {
    const auto net = d / "net";
    int bad = 0;
    bad += cli({"synth", "--rows", "5", "--cols", "5", "--seed", "4", "--out", net});
    bad += cli({"generate", "--network", net, "--threads", "1", "--out", d / "aff.csv"});
    bad += cli({"sample", "--network", net, "--num", "20", "--seed", "4", "--threads", "1",
                "--out", d / "s.txt"});
    bad += cli({"train", "--network", net, "--scores", d / "aff.csv", "--samples", d / "s.txt",
                "--epochs", "5", "--seed", "4", "--threads", "1", "--out", d / "m.ckpt"});
    bad += cli({"rank", "--network", net, "--checkpoint", d / "m.ckpt", "--samples",
                d / "s.txt", "--threads", "1", "--out", d / "r.csv", "--ratings",
                d / "ratings.csv", "--truth", d / "aff.csv", "--plot", d / "plot.csv",
                "--top_k", "5"});
    bad += cli({"eval", "--ranking", d / "r.csv", "--truth", d / "aff.csv", "--out",
                d / "eval.txt"});
    for (const char* method : {"dc", "bc", "pagerank"}) {
      const std::string file = std::string(method == std::string("pagerank") ? "pr" : method);
      bad += cli({"baseline", "--method", method, "--network", net, "--out", d / (file + ".csv")});
    }
    bad += cli({"gradcheck", "--seed", "4", "--out", d / "grad.txt"});
    return bad;
  };
  testing::TempDir a, b;
  if (pipeline(a) != 0 || pipeline(b) != 0) return {false, "a pipeline stage failed"};
  std::size_t differing = 0;
  std::string which;
  for (const auto& f : outputs) {
    if (text::read_file(a / f) != text::read_file(b / f)) {
      ++differing;
      which += " " + f;
    }
  }
  return {differing == 0, std::to_string(outputs.size() - differing) + "/" +
                              std::to_string(outputs.size()) + " stage outputs byte-identical" +
                              (which.empty() ? "" : "; differ:" + which)};
}

}  // namespace
}  // namespace roadrank

int main() {
  using namespace roadrank;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"sampler law", sampler_law},
      {"alias exactness", alias_exactness},
      {"metric oracles", metric_oracles},
      {"baseline oracles", baseline_oracles},
      {"importance score oracle", importance_oracle},
      {"learnable-task threshold", learnable_task},
      {"ablation ordering", ablation_ordering},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << "criterion " << k + 1 << " " << (v.pass ? "PASS" : "FAIL") << " "
              << criteria[k].first << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
