#include "cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "roadrank/baselines.hpp"
#include "roadrank/cascade.hpp"
#include "roadrank/checkpoint.hpp"
#include "roadrank/metrics.hpp"
#include "roadrank/multigraph_walk.hpp"
#include "roadrank/report.hpp"
#include "roadrank/synth.hpp"
#include "roadrank/trainer.hpp"

namespace roadrank::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kToolVersion = "0.3.0";

const std::set<std::string> kSubcommands = {"generate", "sample", "train",     "rank",
                                            "eval",     "baseline", "gradcheck", "synth"};

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) {
    ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return ss.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Records what a run read and wrote; serialized next to the main output.
class Manifest {
 public:
  Manifest(std::string subcommand, std::vector<std::string> argv)
      : subcommand_(std::move(subcommand)), argv_(std::move(argv)), started_(utc_now()) {}

  void input(const fs::path& p) {
    if (fs::is_directory(p)) {
      for (const auto* name : {"edges.csv", "attributes.csv"}) input(p / name);
      return;
    }
    if (fs::exists(p)) digests_[p.string()] = sha256_hex(text::read_file(p.string()));
  }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  void seed(std::uint64_t s) { seed_ = s; }
  void config(const CLI::App& sub) {
    for (const auto* opt : sub.get_options()) {
      if (opt->get_lnames().empty()) continue;
      const auto& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      const auto& res = opt->results();
      config_[name] = res.empty() ? opt->get_default_str() : res.back();
    }
  }
  void note(const std::string& key, const std::string& value) { notes_[key] = value; }

  void write(const fs::path& path) const {
    json j;
    j["tool"] = "roadrank";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand_;
    j["argv"] = argv_;
    j["config"] = config_;
    if (seed_) j["seed"] = *seed_;
    j["inputs"] = digests_;
    j["outputs"] = outputs_;
    if (!notes_.empty()) j["notes"] = notes_;
    j["started"] = started_;
    j["finished"] = utc_now();
    auto out = text::open_output(path.string());
    out << j.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  std::vector<std::string> argv_;
  std::string started_;
  std::map<std::string, std::string> config_;
  std::map<std::string, std::string> digests_;
  std::map<std::string, std::string> notes_;
  std::vector<std::string> outputs_;
  std::optional<std::uint64_t> seed_;
};

fs::path manifest_path_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

/// Splices `--key=value` tokens from a `--config` file in right after the
/// subcommand so explicit flags, which come later, take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::size_t sub = 0;
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (kSubcommands.count(args[k])) {
      sub = k;
      break;
    }
  }
  if (sub == 0) return args;
  std::optional<std::string> path;
  for (std::size_t k = sub + 1; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (!path) return args;
  auto in = text::open_input(*path);
  const auto kv = text::parse_key_values(in, *path);
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1);
  for (const auto& [k, v] : kv) out.push_back("--" + k + "=" + v);
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, args.end());
  return out;
}

void write_text_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto out = text::open_output(path.string());
  body(out);
  if (!out) throw Error(ErrorKind::kMissingInput, "failed writing '" + path.string() + "'");
}

SampleSet load_samples(const std::string& path) {
  auto in = text::open_input(path);
  return read_samples(in, path);
}

SplitAssignment load_split(const std::string& path) {
  auto in = text::open_input(path);
  return read_split(in, path);
}

SplitPart parse_part(const std::string& s) {
  if (s == "train") return SplitPart::kTrain;
  if (s == "val") return SplitPart::kVal;
  if (s == "test") return SplitPart::kTest;
  throw usage_error("unknown split '" + s + "' (expected train, val or test)");
}

void print_report(const MetricReport& r, std::ostream& out) {
  out << "micro_f1=" << text::format_double(r.micro_f1) << '\n'
      << "macro_f1=" << text::format_double(r.macro_f1) << '\n'
      << "diff=" << text::format_double(r.diff) << '\n'
      << "pairs=" << r.pairs << '\n'
      << "tp=" << r.tp << '\n'
      << "fp=" << r.fp << '\n'
      << "tn=" << r.tn << '\n'
      << "fn=" << r.fn << '\n';
}

// --------------------------------------------------------------------------
// Subcommands. Each registers its options and returns the action to run.

using Action = std::function<void(Manifest&)>;

Action add_synth(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("synth", "Write a reproducible synthetic grid network");
  auto cfg = std::make_shared<SynthConfig>();
  auto dir = std::make_shared<std::string>();
  sub->add_option("--rows", cfg->rows, "grid rows")->capture_default_str();
  sub->add_option("--cols", cfg->cols, "grid columns")->capture_default_str();
  sub->add_option("--seed", cfg->seed, "generator seed")->capture_default_str();
  sub->add_option("--min_load", cfg->min_load, "lowest demand/capacity ratio")->capture_default_str();
  sub->add_option("--max_load", cfg->max_load, "highest demand/capacity ratio")->capture_default_str();
  sub->add_option("--out", *dir, "output network directory")->required();
  return [=, &out](Manifest& m) {
    const auto net = synth_grid(*cfg);
    save_network(net, *dir);
    m.seed(cfg->seed);
    m.output(fs::path(*dir) / "edges.csv");
    m.output(fs::path(*dir) / "attributes.csv");
    out << "wrote " << net.num_nodes() << " nodes, " << net.edges().size() << " edges to " << *dir
        << '\n';
    m.write(fs::path(*dir) / "manifest.json");
  };
}

Action add_generate(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("generate", "Simulate cascades and write ground-truth scores");
  auto cfg = std::make_shared<CascadeConfig>();
  auto network = std::make_shared<std::string>();
  auto path = std::make_shared<std::string>();
  auto threads = std::make_shared<std::size_t>(1);
  sub->add_option("--network", *network, "network directory")->required();
  sub->add_option("--gamma", cfg->gamma, "per-period decay")->capture_default_str();
  sub->add_option("--periods", cfg->periods, "number of periods Q")->capture_default_str();
  sub->add_option("--capacity_reduction", cfg->capacity_reduction)->capture_default_str();
  sub->add_option("--failure_speed_fraction", cfg->failure_speed_fraction)->capture_default_str();
  sub->add_option("--spillback_rate", cfg->spillback_rate)->capture_default_str();
  sub->add_option("--period_length", cfg->period_length)->capture_default_str();
  sub->add_option("--kappa", cfg->kappa, "flow per lane per speed unit")->capture_default_str();
  sub->add_option("--window", cfg->observation_window, "observation window")->capture_default_str();
  sub->add_option("--threads", *threads)->capture_default_str();
  sub->add_option("--out", *path, "scores CSV")->required();
  return [=, &out](Manifest& m) {
    m.input(*network);
    const auto net = load_network(fs::path(*network));
    const auto scores = generate_ground_truth(net, *cfg, *threads);
    write_text_file(*path, [&](std::ostream& o) { write_score_csv(o, scores.aff, "aff"); });
    m.output(*path);
    std::size_t nonzero = 0;
    for (double v : scores.aff) nonzero += v > 0.0;
    out << "scored " << scores.size() << " segments (" << nonzero << " with failures)\n";
    m.write(manifest_path_for(*path));
  };
}

Action add_sample(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("sample", "Sample multi-graph walks for every node");
  auto cfg = std::make_shared<WalkConfig>();
  auto network = std::make_shared<std::string>();
  auto path = std::make_shared<std::string>();
  auto threads = std::make_shared<std::size_t>(1);
  sub->add_option("--network", *network, "network directory")->required();
  sub->add_option("--alpha", cfg->alpha, "adjacency-step probability")->capture_default_str();
  sub->add_option("--num", cfg->num, "sequences per node")->capture_default_str();
  sub->add_option("--len", cfg->length, "sequence length")->capture_default_str();
  sub->add_option("--seed", cfg->seed, "sampling seed")->capture_default_str();
  sub->add_option("--threads", *threads)->capture_default_str();
  sub->add_option("--out", *path, "sample file")->required();
  return [=, &out](Manifest& m) {
    m.input(*network);
    m.seed(cfg->seed);
    const auto net = load_network(fs::path(*network));
    if (net.self_loops_added()) {
      out << "added " << net.self_loops_added() << " self-loops to sink segments\n";
    }
    const NormalizedViews views(net);
    for (auto k : views.attrs.zero_attributes) {
      out << "warning: attribute '" << net.attr_names()[k] << "' is all zero\n";
    }
    const auto samples = sample_walks(net, views, *cfg, *threads);
    write_text_file(*path, [&](std::ostream& o) { write_samples(samples, o); });
    m.output(*path);
    out << "sampled " << net.num_nodes() * cfg->num << " sequences of length " << cfg->length
        << '\n';
    m.write(manifest_path_for(*path));
  };
}

Action add_train(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* sub = app.add_subcommand("train", "Train the encoder and pairwise ranker");
  auto cfg = std::make_shared<TrainConfig>();
  auto walk = std::make_shared<WalkConfig>();
  auto network = std::make_shared<std::string>();
  auto scores_path = std::make_shared<std::string>();
  auto samples_path = std::make_shared<std::string>();
  auto path = std::make_shared<std::string>();
  auto history_path = std::make_shared<std::string>();
  auto split_path = std::make_shared<std::string>();
  auto ablation = std::make_shared<std::string>("full");
  sub->add_option("--network", *network, "network directory")->required();
  sub->add_option("--scores", *scores_path, "ground-truth scores CSV")->required();
  sub->add_option("--samples", *samples_path, "sample file (sampled here when omitted)");
  sub->add_option("--out", *path, "checkpoint path")->required();
  sub->add_option("--history", *history_path, "history CSV [<out>.history.csv]");
  sub->add_option("--splits", *split_path, "split CSV [<out>.splits.csv]");
  sub->add_option("--lr", cfg->lr)->capture_default_str();
  sub->add_option("--dropout", cfg->dropout)->capture_default_str();
  sub->add_option("--batch", cfg->batch)->capture_default_str();
  sub->add_option("--epochs", cfg->epochs)->capture_default_str();
  sub->add_option("--train_frac", cfg->train_frac)->capture_default_str();
  sub->add_option("--val_frac", cfg->val_frac)->capture_default_str();
  sub->add_option("--test_frac", cfg->test_frac)->capture_default_str();
  sub->add_option("--strata", cfg->strata)->capture_default_str();
  sub->add_option("--beta1", cfg->beta1)->capture_default_str();
  sub->add_option("--beta2", cfg->beta2)->capture_default_str();
  sub->add_option("--eps", cfg->eps)->capture_default_str();
  sub->add_option("--seed", cfg->seed)->capture_default_str();
  sub->add_option("--ablation", *ablation, "full, NoMG, NoBiLSTM or NoEmb")->capture_default_str();
  sub->add_option("--x", cfg->x, "initial encoding width")->capture_default_str();
  sub->add_option("--hdim", cfg->hdim, "embedding width (multiple of 4)")->capture_default_str();
  sub->add_option("--f1", cfg->f1)->capture_default_str();
  sub->add_option("--f2", cfg->f2)->capture_default_str();
  sub->add_option("--rdim", cfg->rdim)->capture_default_str();
  sub->add_flag("--antisymmetric", cfg->antisymmetric, "tie the projection to (u, -u)");
  sub->add_option("--threads", cfg->threads)->capture_default_str();
  sub->add_option("--alpha", walk->alpha, "alpha when sampling here")->capture_default_str();
  sub->add_option("--num", walk->num, "num when sampling here")->capture_default_str();
  sub->add_option("--len", walk->length, "length when sampling here")->capture_default_str();
  return [=, &out, &err](Manifest& m) {
    cfg->ablation = parse_ablation(*ablation);
    cfg->validate();
    m.seed(cfg->seed);
    m.input(*network);
    m.input(*scores_path);
    const auto net = load_network(fs::path(*network));
    const auto scores = import_scores(*scores_path, net.num_nodes());
    const auto variant = apply_ablation(cfg->ablation);

    std::optional<SampleSet> samples;
    if (variant.use_embedding) {
      if (!samples_path->empty()) {
        m.input(*samples_path);
        samples = load_samples(*samples_path);
        if (!variant.attribute_walks && samples->config.alpha != 1.0) {
          err << "note: NoMG resamples with alpha=1 (num=" << samples->config.num
              << ", len=" << samples->config.length << ")\n";
          m.note("resampled", "alpha=1");
          auto wc = walk_config_for(cfg->ablation, samples->config);
          const NormalizedViews views(net);
          samples = sample_walks(net, views, wc, cfg->threads);
        }
      } else {
        auto wc = walk_config_for(cfg->ablation, *walk);
        wc.seed = derive_seed(cfg->seed, static_cast<std::uint64_t>(Stage::kSampling));
        const NormalizedViews views(net);
        samples = sample_walks(net, views, wc, cfg->threads);
        m.note("sampled_seed", std::to_string(wc.seed));
      }
    }

    const auto split = stratified_split(scores, *cfg);
    for (const auto& w : split.warnings) err << "warning: " << w << '\n';
    const auto result = train_model(net, samples ? &*samples : nullptr, scores, split, *cfg);

    const fs::path ckpt(*path);
    const auto hist = history_path->empty() ? fs::path(*path + ".history.csv") : fs::path(*history_path);
    const auto splits = split_path->empty() ? fs::path(*path + ".splits.csv") : fs::path(*split_path);
    write_text_file(ckpt, [&](std::ostream& o) { write_checkpoint(result.model, cfg->seed, o); });
    write_text_file(hist, [&](std::ostream& o) {
      write_history(result.history, *cfg, result.best_epoch, o);
    });
    write_text_file(splits, [&](std::ostream& o) { write_split(split, o); });
    m.output(ckpt);
    m.output(hist);
    m.output(splits);

    const auto data = make_training_data(net, samples ? &*samples : nullptr, cfg->threads);
    const auto test = evaluate_nodes(result.model, data, split.test, scores.aff);
    const auto& best = result.history[result.best_epoch];
    out << "best epoch " << result.best_epoch << ": val micro-F1 "
        << text::format_double(best.val_micro_f1) << '\n';
    if (test.valid) {
      out << "test micro-F1 " << text::format_double(test.report.micro_f1) << ", macro-F1 "
          << text::format_double(test.report.macro_f1) << ", diff "
          << text::format_double(test.report.diff) << '\n';
    }
    m.write(manifest_path_for(ckpt));
  };
}

Action add_rank(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("rank", "Rank nodes with a trained checkpoint");
  auto network = std::make_shared<std::string>();
  auto ckpt = std::make_shared<std::string>();
  auto samples_path = std::make_shared<std::string>();
  auto pairs = std::make_shared<std::string>();
  auto subset = std::make_shared<std::string>("test");
  auto path = std::make_shared<std::string>();
  auto ratings_path = std::make_shared<std::string>();
  auto truth = std::make_shared<std::string>();
  auto plot = std::make_shared<std::string>();
  auto top_k = std::make_shared<std::size_t>(20);
  auto threads = std::make_shared<std::size_t>(1);
  sub->add_option("--network", *network, "network directory")->required();
  sub->add_option("--checkpoint", *ckpt, "checkpoint from train")->required();
  sub->add_option("--samples", *samples_path, "sample file (not needed for NoEmb)");
  sub->add_option("--pairs", *pairs, "split CSV restricting the ranked nodes");
  sub->add_option("--subset", *subset, "split to rank with --pairs")->capture_default_str();
  sub->add_option("--out", *path, "ranking CSV")->required();
  sub->add_option("--ratings", *ratings_path, "also dump i,j,rating");
  sub->add_option("--truth", *truth, "scores CSV for top-k plot data");
  sub->add_option("--plot", *plot, "top-k plot-data CSV (needs --truth)");
  sub->add_option("--top_k", *top_k, "k for plot data")->capture_default_str();
  sub->add_option("--threads", *threads)->capture_default_str();
  return [=, &out](Manifest& m) {
    m.input(*network);
    m.input(*ckpt);
    const auto net = load_network(fs::path(*network));
    auto cin = text::open_input(*ckpt);
    const auto loaded = read_checkpoint(cin, *ckpt);
    m.seed(loaded.seed);
    std::optional<SampleSet> samples;
    if (loaded.model.embed) {
      if (samples_path->empty()) throw usage_error("--samples is required for this checkpoint");
      m.input(*samples_path);
      samples = load_samples(*samples_path);
    }
    if (loaded.model.embed && loaded.model.embed->dims.m != net.num_attributes()) {
      throw invalid_input("checkpoint expects " + std::to_string(loaded.model.embed->dims.m) +
                          " attributes");
    }
    std::vector<NodeId> nodes;
    if (!pairs->empty()) {
      m.input(*pairs);
      nodes = load_split(*pairs).nodes(parse_part(*subset));
    } else {
      for (NodeId i = 0; i < net.num_nodes(); ++i) nodes.push_back(i);
    }
    if (nodes.size() < 2) throw invalid_input("ranking needs at least two nodes");
    const auto data = make_training_data(net, samples ? &*samples : nullptr, *threads);
    const auto inputs = node_inputs(loaded.model, data, nodes);
    const auto ratings = score_pairs(loaded.model, inputs, nodes);
    const auto ranking = rank_nodes(ratings);
    write_text_file(*path, [&](std::ostream& o) { write_ranking(ranking, o); });
    m.output(*path);
    if (!ratings_path->empty()) {
      write_text_file(*ratings_path, [&](std::ostream& o) { write_pair_ratings(ratings, o); });
      m.output(*ratings_path);
    }
    if (!ranking.ties.empty()) out << ranking.ties.size() << " tie group(s) broken by node id\n";
    if (!plot->empty()) {
      if (truth->empty()) throw usage_error("--plot needs --truth");
      m.input(*truth);
      const auto scores = import_scores(*truth, net.num_nodes());
      TopKOverlap t;
      write_text_file(*plot, [&](std::ostream& o) {
        t = export_plotdata(ranking.order, scores.aff, *top_k, o);
      });
      m.output(*plot);
      out << "top-" << *top_k << " overlap: " << t.overlap << '\n';
    }
    out << "ranked " << nodes.size() << " nodes\n";
    m.write(manifest_path_for(*path));
  };
}

Action add_eval(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("eval", "Score a ranking or baseline against ground truth");
  auto ranking = std::make_shared<std::string>();
  auto truth = std::make_shared<std::string>();
  auto pairs = std::make_shared<std::string>();
  auto subset = std::make_shared<std::string>("test");
  auto path = std::make_shared<std::string>();
  sub->add_option("--ranking", *ranking, "ranking CSV or node_id,score CSV")->required();
  sub->add_option("--truth", *truth, "ground-truth scores CSV")->required();
  sub->add_option("--pairs", *pairs, "split CSV; evaluate only --subset nodes");
  sub->add_option("--subset", *subset, "split to evaluate with --pairs")->capture_default_str();
  sub->add_option("--out", *path, "report file (stdout always)");
  return [=, &out](Manifest& m) {
    m.input(*ranking);
    m.input(*truth);
    const auto scores = import_scores(*truth);
    std::string head;
    {
      auto in = text::open_input(*ranking);
      std::getline(in, head);
    }
    // either a ranking (order given) or a score vector (order derived)
    std::vector<NodeId> order;
    std::optional<std::vector<double>> predicted_scores;
    auto in = text::open_input(*ranking);
    if (text::trim(head).rfind("rank,", 0) == 0) {
      order = read_ranking(in, *ranking);
    } else {
      predicted_scores = read_score_csv(in, *ranking, 0, false);
      for (NodeId i = 0; i < predicted_scores->size(); ++i) order.push_back(i);
    }
    for (auto v : order) {
      if (v >= scores.size()) throw invalid_input("no ground truth for node " + std::to_string(v));
    }
    if (!pairs->empty()) {
      m.input(*pairs);
      const auto split = load_split(*pairs);
      const auto& keep = split.nodes(parse_part(*subset));
      const std::set<NodeId> keep_set(keep.begin(), keep.end());
      std::erase_if(order, [&](NodeId v) { return !keep_set.count(v); });
    }
    if (predicted_scores) order = descending_by_score(order, *predicted_scores);
    if (order.size() < 2) throw invalid_input("evaluation needs at least two nodes");
    std::vector<std::size_t> pos(scores.size(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
    std::vector<int> predicted, truth_labels;
    for (auto i : order) {
      for (auto j : order) {
        if (i == j) continue;
        predicted.push_back(predicted_scores ? pair_label((*predicted_scores)[i], (*predicted_scores)[j])
                                             : (pos[i] < pos[j] ? 1 : 0));
        truth_labels.push_back(pair_label(scores[i], scores[j]));
      }
    }
    MetricReport report;
    micro_macro_f1(predicted, truth_labels, &report);
    report.diff = diff_metric(order, scores.aff);
    print_report(report, out);
    if (!path->empty()) {
      write_text_file(*path, [&](std::ostream& o) { print_report(report, o); });
      m.output(*path);
      m.write(manifest_path_for(*path));
    }
  };
}

Action add_baseline(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("baseline", "Compute a centrality baseline");
  auto method = std::make_shared<std::string>();
  auto network = std::make_shared<std::string>();
  auto path = std::make_shared<std::string>();
  auto damping = std::make_shared<double>(0.85);
  sub->add_option("--method", *method, "dc, bc or pagerank")
      ->required()
      ->check(CLI::IsMember({"dc", "bc", "pagerank"}));
  sub->add_option("--network", *network, "network directory")->required();
  sub->add_option("--damping", *damping, "PageRank damping")->capture_default_str();
  sub->add_option("--out", *path, "scores CSV")->required();
  return [=, &out](Manifest& m) {
    m.input(*network);
    const auto net = load_network(fs::path(*network));
    ScoreVector s;
    if (*method == "dc") s = degree_centrality(net);
    else if (*method == "bc") s = betweenness_centrality(net);
    else s = pagerank(net, *damping);
    write_text_file(*path, [&](std::ostream& o) { write_score_csv(o, s.values, s.method); });
    m.output(*path);
    out << "wrote " << s.method << " scores for " << s.values.size() << " nodes\n";
    m.write(manifest_path_for(*path));
  };
}

Action add_gradcheck(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("gradcheck", "Finite-difference check of the training gradients");
  auto cfg = std::make_shared<TrainConfig>();
  auto nodes = std::make_shared<std::size_t>(8);
  auto num = std::make_shared<std::size_t>(3);
  auto len = std::make_shared<std::size_t>(4);
  auto alpha = std::make_shared<double>(0.5);
  auto tol = std::make_shared<double>(1e-4);
  auto ablation = std::make_shared<std::string>("full");
  auto report_path = std::make_shared<std::string>();
  sub->add_option("--seed", cfg->seed)->capture_default_str();
  sub->add_option("--nodes", *nodes, "instance size (<= 10)")->capture_default_str();
  sub->add_option("--num", *num)->capture_default_str();
  sub->add_option("--len", *len)->capture_default_str();
  sub->add_option("--alpha", *alpha)->capture_default_str();
  sub->add_option("--hdim", cfg->hdim)->capture_default_str();
  sub->add_option("--ablation", *ablation)->capture_default_str();
  sub->add_option("--tol", *tol, "fail above this relative error")->capture_default_str();
  sub->add_option("--out", *report_path, "write the per-tensor report here");
  return [=, &out](Manifest& m) {
    cfg->ablation = parse_ablation(*ablation);
    if (*nodes < 2 || *nodes > 10) throw usage_error("--nodes must lie in [2, 10]");
    m.seed(cfg->seed);
    SynthConfig sc{1, *nodes, cfg->seed};
    const auto net = synth_grid(sc);
    const NormalizedViews views(net);
    WalkConfig wc{*alpha, *num, *len, cfg->seed};
    const auto samples = sample_walks(net, views, walk_config_for(cfg->ablation, wc));
    const auto data = make_training_data(net, &samples);
    const auto model = Model::initialized(*cfg, net.num_attributes(), cfg->seed);
    std::vector<NodeId> all;
    std::vector<double> truth;
    for (NodeId i = 0; i < net.num_nodes(); ++i) {
      all.push_back(i);
      truth.push_back(net.attributes()(i, 3));
    }
    const auto pairs = make_pairs(all, truth);
    const auto report = gradient_check(model, data, pairs);
    std::ostringstream body;
    for (const auto& [name, e] : report.per_tensor) body << name << ' ' << e << '\n';
    body << "max_rel_error " << report.max_rel_error << '\n';
    out << body.str();
    if (!report_path->empty()) {
      write_text_file(*report_path, [&](std::ostream& o) { o << body.str(); });
      m.output(*report_path);
      m.write(manifest_path_for(*report_path));
    }
    if (report.max_rel_error >= *tol) {
      throw numerical_error("gradient check failed: " + std::to_string(report.max_rel_error));
    }
  };
}

int run_parsed(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               int depth);

int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err, int depth) {
  if (depth > 0) throw usage_error("a replayed manifest cannot replay another");
  const json j = json::parse(text::read_file(manifest_path), nullptr, false);
  if (j.is_discarded() || !j.contains("argv") || !j["argv"].is_array()) {
    throw invalid_input(manifest_path + ": not a run manifest");
  }
  return run_parsed(j["argv"].get<std::vector<std::string>>(), out, err, depth + 1);
}

int run_parsed(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err,
               int depth) {
  CLI::App app{"roadrank: node-importance ranking for road networks"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(0, 1);
  std::string replay_path;
  app.add_option("--replay", replay_path, "re-run the command recorded in a manifest");
  app.set_version_flag("--version", kToolVersion);

  std::map<std::string, Action> actions;
  actions["synth"] = add_synth(app, out);
  actions["generate"] = add_generate(app, out);
  actions["sample"] = add_sample(app, out);
  actions["train"] = add_train(app, out, err);
  actions["rank"] = add_rank(app, out);
  actions["eval"] = add_eval(app, out);
  actions["baseline"] = add_baseline(app, out);
  actions["gradcheck"] = add_gradcheck(app, out);
  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--config", "key=value file; explicit flags override it");
  }

  const auto args = expand_config(raw_args);
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (!replay_path.empty()) return replay(replay_path, out, err, depth);
  const auto chosen = app.get_subcommands();
  if (chosen.empty()) {
    err << app.help();
    return kUsage;
  }
  const auto name = chosen.front()->get_name();
  Manifest manifest(name, raw_args);
  manifest.config(*chosen.front());
  if (const auto* c = chosen.front()->get_option("--config"); c->count()) {
    manifest.input(c->results().back());
  }
  actions.at(name)(manifest);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run_parsed(args, out, err, 0);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kUsage: return kUsage;
      case ErrorKind::kMissingInput: return kMissingInput;
      case ErrorKind::kInvalidInput: return kInvalidInput;
      case ErrorKind::kNumerical: return kNumerical;
    }
    return kUnexpected;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
}

}  // namespace roadrank::cli
