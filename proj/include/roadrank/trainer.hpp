#pragma once

// Stratified splitting, pair construction, and the mini-batch training loop
// for the encoder + pairwise ranker, with finite-difference gradient checks
// and the ablation variants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadrank/embed.hpp"
#include "roadrank/error.hpp"
#include "roadrank/metrics.hpp"
#include "roadrank/multigraph_walk.hpp"
#include "roadrank/parallel.hpp"
#include "roadrank/ranker.hpp"
#include "roadrank/rng.hpp"
#include "roadrank/scores.hpp"
#include "roadrank/text.hpp"

namespace roadrank {

enum class Ablation { kFull, kNoMG, kNoBiLSTM, kNoEmb };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoMG: return "NoMG";
    case Ablation::kNoBiLSTM: return "NoBiLSTM";
    case Ablation::kNoEmb: return "NoEmb";
  }
  return "full";
}

inline Ablation parse_ablation(std::string_view s) {
  if (s == "full") return Ablation::kFull;
  if (s == "NoMG" || s == "nomg") return Ablation::kNoMG;
  if (s == "NoBiLSTM" || s == "nobilstm") return Ablation::kNoBiLSTM;
  if (s == "NoEmb" || s == "noemb") return Ablation::kNoEmb;
  throw usage_error("unknown ablation mode '" + std::string(s) + "'");
}

/// What each ablation switches off.
struct PipelineVariant {
  bool attribute_walks = true;  // false: plain random walk (alpha forced to 1)
  bool use_lstm = true;         // false: pooled initial encodings feed the ranker
  bool use_embedding = true;    // false: scaled raw attributes feed the ranker
};

inline PipelineVariant apply_ablation(Ablation a) {
  switch (a) {
    case Ablation::kFull: return {};
    case Ablation::kNoMG: return {false, true, true};
    case Ablation::kNoBiLSTM: return {true, false, true};
    case Ablation::kNoEmb: return {true, true, false};
  }
  throw usage_error("unknown ablation mode");
}

inline WalkConfig walk_config_for(Ablation a, WalkConfig cfg) {
  if (!apply_ablation(a).attribute_walks) cfg.alpha = 1.0;
  return cfg;
}

struct TrainConfig {
  double lr = 0.001;
  double dropout = 0.45;
  std::size_t batch = 64;
  std::size_t epochs = 100;
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::size_t strata = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kFull;
  std::size_t x = 8;
  std::size_t hdim = 8;
  std::size_t f1 = 32;
  std::size_t f2 = 16;
  std::size_t rdim = 8;
  bool antisymmetric = false;
  std::size_t threads = 1;

  void validate() const {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9 || train_frac < 0 ||
        val_frac < 0 || test_frac < 0) {
      throw usage_error("split fractions must be non-negative and sum to 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw usage_error("dropout must lie in [0, 1)");
    if (!(lr >= 0.0)) throw usage_error("lr must be non-negative");
    if (batch < 1) throw usage_error("batch must be >= 1");
    if (strata < 1) throw usage_error("strata must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
      throw usage_error("bad optimizer hyperparameters");
    }
    EmbedDims::from_hdim(1, x, hdim);
    if (f1 < 1 || f2 < 1 || rdim < 1) throw usage_error("ranker widths must be >= 1");
  }

  std::map<std::string, std::string> to_key_values() const {
    using text::format_double;
    return {{"lr", format_double(lr)},
            {"dropout", format_double(dropout)},
            {"batch", std::to_string(batch)},
            {"epochs", std::to_string(epochs)},
            {"train_frac", format_double(train_frac)},
            {"val_frac", format_double(val_frac)},
            {"test_frac", format_double(test_frac)},
            {"strata", std::to_string(strata)},
            {"beta1", format_double(beta1)},
            {"beta2", format_double(beta2)},
            {"eps", format_double(eps)},
            {"seed", std::to_string(seed)},
            {"ablation", to_string(ablation)},
            {"x", std::to_string(x)},
            {"hdim", std::to_string(hdim)},
            {"f1", std::to_string(f1)},
            {"f2", std::to_string(f2)},
            {"rdim", std::to_string(rdim)},
            {"antisymmetric", antisymmetric ? "1" : "0"},
            {"threads", std::to_string(threads)}};
  }

  /// Applies known keys; unknown keys are an error.
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv) {
    TrainConfig cfg;
    auto num = [](const std::string& k, const std::string& v) {
      const auto d = text::parse_double(v);
      if (!d) throw usage_error("config key '" + k + "': not a number: " + v);
      return *d;
    };
    auto count = [](const std::string& k, const std::string& v) {
      const auto u = text::parse_uint(v);
      if (!u) throw usage_error("config key '" + k + "': not a non-negative integer: " + v);
      return static_cast<std::size_t>(*u);
    };
    for (const auto& [k, v] : kv) {
      if (k == "lr") cfg.lr = num(k, v);
      else if (k == "dropout") cfg.dropout = num(k, v);
      else if (k == "batch") cfg.batch = count(k, v);
      else if (k == "epochs") cfg.epochs = count(k, v);
      else if (k == "train_frac") cfg.train_frac = num(k, v);
      else if (k == "val_frac") cfg.val_frac = num(k, v);
      else if (k == "test_frac") cfg.test_frac = num(k, v);
      else if (k == "strata") cfg.strata = count(k, v);
      else if (k == "beta1") cfg.beta1 = num(k, v);
      else if (k == "beta2") cfg.beta2 = num(k, v);
      else if (k == "eps") cfg.eps = num(k, v);
      else if (k == "seed") cfg.seed = count(k, v);
      else if (k == "ablation") cfg.ablation = parse_ablation(v);
      else if (k == "x") cfg.x = count(k, v);
      else if (k == "hdim") cfg.hdim = count(k, v);
      else if (k == "f1") cfg.f1 = count(k, v);
      else if (k == "f2") cfg.f2 = count(k, v);
      else if (k == "rdim") cfg.rdim = count(k, v);
      else if (k == "antisymmetric") cfg.antisymmetric = count(k, v) != 0;
      else if (k == "threads") cfg.threads = count(k, v);
      else throw usage_error("unknown config key '" + k + "'");
    }
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Splits and pairs

enum class SplitPart : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline std::string to_string(SplitPart p) {
  return p == SplitPart::kTrain ? "train" : p == SplitPart::kVal ? "val" : "test";
}

struct SplitAssignment {
  std::vector<NodeId> train, val, test;  // ascending ids
  std::vector<std::size_t> stratum;      // per node
  std::vector<SplitPart> part;           // per node
  std::size_t strata = 1;
  std::vector<std::string> warnings;

  const std::vector<NodeId>& nodes(SplitPart p) const {
    return p == SplitPart::kTrain ? train : p == SplitPart::kVal ? val : test;
  }
};

inline constexpr std::size_t kMinNodesPerStratum = 3;

/// Quantile-binned stratified split. Each bin gets floor(fraction·size) per
/// part; the leftover slots go to whichever part is furthest below its global
/// largest-remainder quota, so both per-bin and total sizes stay within one
/// node of the fractions.
inline SplitAssignment stratified_split(const ImportanceScores& scores, const TrainConfig& cfg) {
  const auto n = scores.size();
  if (n == 0) throw invalid_input("cannot split an empty node set");
  SplitAssignment out;
  std::size_t strata = cfg.strata;
  if (strata < 1) throw usage_error("strata must be >= 1");
  if (n < strata * kMinNodesPerStratum) {
    const auto reduced = std::max<std::size_t>(1, n / kMinNodesPerStratum);
    out.warnings.push_back("too few nodes for " + std::to_string(strata) +
                           " strata; using " + std::to_string(reduced));
    strata = reduced;
  }
  out.strata = strata;

  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });

  const double fr[3] = {cfg.train_frac, cfg.val_frac, cfg.test_frac};
  // global quotas by largest remainder
  std::size_t quota[3];
  double rem[3];
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double exact = fr[p] * static_cast<double>(n);
    quota[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[p] = exact - static_cast<double>(quota[p]);
    assigned += quota[p];
  }
  while (assigned < n) {
    int best = 0;
    for (int p = 1; p < 3; ++p) {
      if (rem[p] > rem[best]) best = p;
    }
    ++quota[best];
    rem[best] = -1.0;
    ++assigned;
  }

  struct Bin {
    std::vector<NodeId> members;
    std::size_t take[3];
    std::size_t leftover;
  };
  std::vector<Bin> bins(strata);
  std::size_t need[3] = {quota[0], quota[1], quota[2]};
  for (std::size_t b = 0; b < strata; ++b) {
    const auto lo = b * n / strata, hi = (b + 1) * n / strata;
    auto& bin = bins[b];
    bin.members.assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                       order.begin() + static_cast<std::ptrdiff_t>(hi));
    const auto k = bin.members.size();
    std::size_t used = 0;
    for (int p = 0; p < 3; ++p) {
      bin.take[p] = static_cast<std::size_t>(std::floor(fr[p] * static_cast<double>(k) + 1e-9));
      used += bin.take[p];
      need[p] -= std::min(need[p], bin.take[p]);
    }
    bin.leftover = k - used;
  }
  for (auto& bin : bins) {
    bool extra[3] = {false, false, false};
    for (std::size_t s = 0; s < bin.leftover; ++s) {
      int best = -1;
      for (int p = 0; p < 3; ++p) {
        if (extra[p] || fr[p] <= 0.0) continue;
        if (best < 0 || need[p] > need[best]) best = p;
      }
      if (best < 0) best = 0;
      extra[best] = true;
      ++bin.take[best];
      if (need[best] > 0) --need[best];
    }
  }

  Rng rng(stage_seed(cfg.seed, Stage::kSplit));
  out.stratum.assign(n, 0);
  out.part.assign(n, SplitPart::kTrain);
  for (std::size_t b = 0; b < strata; ++b) {
    auto& bin = bins[b];
    rng.shuffle(bin.members);
    std::size_t k = 0;
    for (int p = 0; p < 3; ++p) {
      for (std::size_t c = 0; c < bin.take[p]; ++c, ++k) {
        const auto v = bin.members[k];
        out.stratum[v] = b;
        out.part[v] = static_cast<SplitPart>(p);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = out.part[i] == SplitPart::kTrain ? out.train
                : out.part[i] == SplitPart::kVal ? out.val
                                                 : out.test;
    dst.push_back(static_cast<NodeId>(i));
  }
  return out;
}

inline void write_split(const SplitAssignment& s, std::ostream& out) {
  out << "node_id,split,stratum\n";
  for (std::size_t i = 0; i < s.part.size(); ++i) {
    out << i << ',' << to_string(s.part[i]) << ',' << s.stratum[i] << '\n';
  }
}

inline SplitAssignment read_split(std::istream& in, const std::string& origin) {
  SplitAssignment s;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::size_t, std::pair<SplitPart, std::size_t>>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || lineno == 1) continue;
    const auto cols = text::split(line, ',');
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    if (cols.size() != 3) throw invalid_input(where + "expected node_id,split,stratum");
    const auto id = text::parse_uint(cols[0]);
    const auto st = text::parse_uint(cols[2]);
    if (!id || !st) throw invalid_input(where + "bad number");
    SplitPart p;
    if (cols[1] == "train") p = SplitPart::kTrain;
    else if (cols[1] == "val") p = SplitPart::kVal;
    else if (cols[1] == "test") p = SplitPart::kTest;
    else throw invalid_input(where + "unknown split '" + std::string(cols[1]) + "'");
    rows.push_back({*id, {p, *st}});
  }
  std::sort(rows.begin(), rows.end());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != k) throw invalid_input(origin + ": node ids must be dense from 0");
    s.part.push_back(rows[k].second.first);
    s.stratum.push_back(rows[k].second.second);
    s.strata = std::max(s.strata, rows[k].second.second + 1);
    auto& dst = rows[k].second.first == SplitPart::kTrain ? s.train
                : rows[k].second.first == SplitPart::kVal ? s.val
                                                          : s.test;
    dst.push_back(static_cast<NodeId>(k));
  }
  return s;
}

struct LabeledPair {
  NodeId i = 0;
  NodeId j = 0;
  int label = 0;
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// All ordered pairs i ≠ j of `nodes`, labelled from the scores.
inline std::vector<LabeledPair> make_pairs(std::span<const NodeId> nodes,
                                           std::span<const double> scores) {
  if (nodes.size() < 2) throw invalid_input("pairs need at least two nodes");
  std::vector<LabeledPair> out;
  out.reserve(nodes.size() * (nodes.size() - 1));
  for (auto i : nodes) {
    for (auto j : nodes) {
      if (i == j) continue;
      out.push_back({i, j, pair_label(scores[i], scores[j])});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

struct Model {
  Ablation ablation = Ablation::kFull;
  std::optional<EmbedParams> embed;  // absent for NoEmb
  RankerParams ranker;

  static Model initialized(const TrainConfig& cfg, std::size_t m, std::uint64_t seed) {
    cfg.validate();
    const auto variant = apply_ablation(cfg.ablation);
    Rng rng(stage_seed(seed, Stage::kInit));
    Model model;
    model.ablation = cfg.ablation;
    RankerDims rd{m, cfg.f1, cfg.f2, cfg.rdim};
    if (variant.use_embedding) {
      const auto dims = EmbedDims::from_hdim(m, cfg.x, cfg.hdim);
      model.embed = EmbedParams::initialized(dims, variant.use_lstm, rng);
      rd.in = model.embed->out_width();
    }
    model.ranker = RankerParams::initialized(rd, rng);
    model.ranker.antisymmetric = cfg.antisymmetric;
    return model;
  }

  Model zeros_like() const {
    Model z = *this;
    z.for_each([](const std::string&, Matrix& t) { t.zero(); });
    return z;
  }

  std::size_t input_width() const { return ranker.dims.in; }

  template <typename F>
  void for_each(F&& f) {
    if (embed) embed->for_each(f);
    ranker.for_each(f);
  }
  template <typename F>
  void for_each(F&& f) const {
    if (embed) embed->for_each(f);
    ranker.for_each(f);
  }

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for_each([&](const std::string&, Matrix& t) { out.push_back(&t); });
    return out;
  }
};

/// Inputs shared by every forward pass: the walks and min-max scaled attributes.
struct TrainingData {
  const SampleSet* samples = nullptr;  // unused by NoEmb
  Matrix features;
  std::size_t threads = 1;

  std::size_t num_nodes() const { return features.rows; }
};

inline TrainingData make_training_data(const RoadNetwork& net, const SampleSet* samples,
                                       std::size_t threads = 1) {
  if (samples && samples->num_nodes != net.num_nodes()) {
    throw invalid_input("sample set covers " + std::to_string(samples->num_nodes) +
                        " nodes, network has " + std::to_string(net.num_nodes()));
  }
  if (samples && samples->num_attributes != net.num_attributes()) {
    throw invalid_input("sample set and network disagree on attribute count");
  }
  return {samples, minmax_scale(net.attributes()), threads};
}

/// Ranker inputs (embeddings or scaled attributes) for `nodes`, one row each.
inline Matrix node_inputs(const Model& model, const TrainingData& data,
                          std::span<const NodeId> nodes) {
  Matrix out(nodes.size(), model.input_width());
  if (!model.embed) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto r = data.features.row(nodes[k]);
      std::copy(r.begin(), r.end(), out.row(k).begin());
    }
    return out;
  }
  if (!data.samples) throw invalid_input("embedding model needs a sample set");
  parallel_for(nodes.size(), data.threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t k = b; k < e; ++k) {
      const auto tr = embed_node(*data.samples, nodes[k], data.features, *model.embed);
      std::copy(tr.embedding.begin(), tr.embedding.end(), out.row(k).begin());
    }
  });
  return out;
}

/// Ratings for every ordered pair of `nodes` in inference mode.
inline PairwiseRatings score_pairs(const Model& model, const Matrix& inputs,
                                   std::vector<NodeId> nodes) {
  PairwiseRatings out(std::move(nodes));
  const auto z = out.nodes.size();
  std::vector<BranchTrace> branches;
  branches.reserve(z);
  for (std::size_t k = 0; k < z; ++k) branches.push_back(branch_forward(inputs.row(k), model.ranker));
  for (std::size_t a = 0; a < z; ++a) {
    for (std::size_t b = 0; b < z; ++b) {
      if (a != b) out.values(a, b) = sigmoid(pair_logit(branches[a], branches[b], model.ranker));
    }
  }
  return out;
}

/// Mean BCE over `pairs`; with `grad` set, accumulates its gradient. With a
/// dropout generator and rate > 0, inverted dropout masks each ranker input.
inline double forward_backward(const Model& model, const TrainingData& data,
                               std::span<const LabeledPair> pairs, Model* grad = nullptr,
                               Rng* dropout_rng = nullptr, double dropout = 0.0) {
  if (pairs.empty()) throw invalid_input("empty pair batch");
  std::vector<NodeId> nodes;
  for (const auto& p : pairs) {
    nodes.push_back(p.i);
    nodes.push_back(p.j);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<std::uint32_t> slot(data.num_nodes(), 0);
  for (std::size_t k = 0; k < nodes.size(); ++k) slot[nodes[k]] = static_cast<std::uint32_t>(k);

  const auto width = model.input_width();
  std::vector<NodeTrace> traces;
  Matrix inputs(nodes.size(), width);
  if (model.embed) {
    if (!data.samples) throw invalid_input("embedding model needs a sample set");
    traces.resize(nodes.size());
    parallel_for(nodes.size(), data.threads, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t k = b; k < e; ++k) {
        traces[k] = embed_node(*data.samples, nodes[k], data.features, *model.embed);
      }
    });
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      std::copy(traces[k].embedding.begin(), traces[k].embedding.end(), inputs.row(k).begin());
    }
  } else {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto r = data.features.row(nodes[k]);
      std::copy(r.begin(), r.end(), inputs.row(k).begin());
    }
  }

  const bool use_dropout = dropout_rng && dropout > 0.0;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout) : 1.0;
  const double inv_batch = 1.0 / static_cast<double>(pairs.size());
  Matrix d_inputs(nodes.size(), width);
  std::vector<double> hi(width), hj(width), mi(width, 1.0), mj(width, 1.0), dhi(width), dhj(width);
  double loss = 0.0;
  PairTrace tr;
  for (const auto& p : pairs) {
    const auto a = slot[p.i], b = slot[p.j];
    for (std::size_t c = 0; c < width; ++c) {
      if (use_dropout) {
        mi[c] = dropout_rng->uniform() < dropout ? 0.0 : keep_scale;
        mj[c] = dropout_rng->uniform() < dropout ? 0.0 : keep_scale;
      }
      hi[c] = inputs(a, c) * mi[c];
      hj[c] = inputs(b, c) * mj[c];
    }
    const double rating = siamese_forward(hi, hj, model.ranker, &tr);
    loss += bce_term(rating, p.label);
    if (!grad) continue;
    std::fill(dhi.begin(), dhi.end(), 0.0);
    std::fill(dhj.begin(), dhj.end(), 0.0);
    const double d_logit = (rating - static_cast<double>(p.label)) * inv_batch;
    siamese_backward(tr, d_logit, model.ranker, grad->ranker, dhi, dhj);
    for (std::size_t c = 0; c < width; ++c) {
      d_inputs(a, c) += dhi[c] * mi[c];
      d_inputs(b, c) += dhj[c] * mj[c];
    }
  }
  if (grad && model.embed) {
    // per-node buffers summed in node order keep the result thread-count independent
    std::vector<EmbedParams> partial(nodes.size());
    parallel_for(nodes.size(), data.threads, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t k = b; k < e; ++k) {
        partial[k] = EmbedParams::zeros(model.embed->dims, model.embed->has_lstm);
        embed_node_backward(traces[k], d_inputs.row(k), *data.samples, data.features,
                            *model.embed, partial[k]);
      }
    });
    for (auto& part : partial) {
      std::vector<Matrix*> dst;
      grad->embed->for_each([&](const std::string&, Matrix& t) { dst.push_back(&t); });
      std::size_t idx = 0;
      part.for_each([&](const std::string&, const Matrix& t) {
        auto& d = *dst[idx++];
        for (std::size_t q = 0; q < t.size(); ++q) d.data[q] += t.data[q];
      });
    }
  }
  return loss * inv_batch;
}

// ---------------------------------------------------------------------------
// Optimizer

/// Adaptive-moment gradient descent with bias correction.
class Adam {
 public:
  Adam(const Model& model, double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    model.for_each([&](const std::string&, const Matrix& t) {
      m_.emplace_back(t.rows, t.cols);
      v_.emplace_back(t.rows, t.cols);
    });
  }

  void step(Model& model, Model& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto params = model.tensors();
    auto grads = grad.tensors();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k]->data;
      const auto& g = grads[k]->data;
      auto& m = m_[k].data;
      auto& v = v_[k].data;
      for (std::size_t q = 0; q < p.size(); ++q) {
        m[q] = beta1_ * m[q] + (1.0 - beta1_) * g[q];
        v[q] = beta2_ * v[q] + (1.0 - beta2_) * g[q] * g[q];
        p[q] -= lr_ * (m[q] / c1) / (std::sqrt(v[q] / c2) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

// ---------------------------------------------------------------------------
// Evaluation and training

struct SplitMetrics {
  double loss = 0.0;
  MetricReport report;
  bool valid = false;  // false when the split has fewer than two nodes
};

/// Pairwise BCE, micro/macro F1 (threshold 0.5) and Diff of the Copeland
/// ranking over all ordered pairs of `nodes`.
inline SplitMetrics evaluate_nodes(const Model& model, const TrainingData& data,
                                   const std::vector<NodeId>& nodes,
                                   std::span<const double> scores) {
  SplitMetrics out;
  if (nodes.size() < 2) return out;
  const auto inputs = node_inputs(model, data, nodes);
  const auto ratings = score_pairs(model, inputs, nodes);
  std::vector<double> r;
  std::vector<int> predicted, truth;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      if (a == b) continue;
      r.push_back(ratings.values(a, b));
      predicted.push_back(ratings.values(a, b) > 0.5 ? 1 : 0);
      truth.push_back(pair_label(scores[nodes[a]], scores[nodes[b]]));
    }
  }
  out.loss = bce_loss(r, truth);
  micro_macro_f1(predicted, truth, &out.report);
  out.report.diff = diff_metric(rank_nodes(ratings).order, scores);
  out.valid = true;
  return out;
}

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_micro_f1 = 0.0;
  double val_macro_f1 = 0.0;
  double val_diff = 0.0;
  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct TrainResult {
  Model model;         // best-validation parameters
  Model final_model;   // parameters after the last epoch
  std::vector<HistoryRow> history;  // row 0 is the untrained model
  std::size_t best_epoch = 0;
};

inline void write_history(const std::vector<HistoryRow>& history, const TrainConfig& cfg,
                          std::size_t best_epoch, std::ostream& out) {
  out << "# selection=best_val_micro_f1 best_epoch=" << best_epoch << " strata=" << cfg.strata
      << " epochs=" << cfg.epochs << " ablation=" << to_string(cfg.ablation)
      << " train_loss=inference-mode BCE over all train pairs after the epoch\n";
  out << "epoch,train_loss,val_micro_f1,val_macro_f1,val_diff\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << text::format_double(h.train_loss) << ','
        << text::format_double(h.val_micro_f1) << ',' << text::format_double(h.val_macro_f1)
        << ',' << text::format_double(h.val_diff) << '\n';
  }
}

inline TrainResult train_model(const RoadNetwork& net, const SampleSet* samples,
                               const ImportanceScores& scores, const SplitAssignment& splits,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (scores.size() != net.num_nodes()) {
    throw invalid_input("scores cover " + std::to_string(scores.size()) + " nodes, network has " +
                        std::to_string(net.num_nodes()));
  }
  const auto variant = apply_ablation(cfg.ablation);
  if (variant.use_embedding && !samples) throw invalid_input("training needs a sample set");
  const auto data = make_training_data(net, variant.use_embedding ? samples : nullptr, cfg.threads);
  auto pairs = make_pairs(splits.train, scores.aff);

  Model model = Model::initialized(cfg, net.num_attributes(), cfg.seed);
  Model grad = model.zeros_like();
  Adam adam(model, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  Rng shuffle_rng(stage_seed(cfg.seed, Stage::kShuffle));
  Rng dropout_rng(stage_seed(cfg.seed, Stage::kDropout));

  auto snapshot = [&](std::size_t epoch) {
    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = evaluate_nodes(model, data, splits.train, scores.aff).loss;
    const auto val = evaluate_nodes(model, data, splits.val, scores.aff);
    if (val.valid) {
      row.val_micro_f1 = val.report.micro_f1;
      row.val_macro_f1 = val.report.macro_f1;
      row.val_diff = val.report.diff;
    } else {
      row.val_micro_f1 = row.val_macro_f1 = row.val_diff = std::nan("");
    }
    return row;
  };

  TrainResult result;
  result.history.push_back(snapshot(0));
  result.model = model;
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(pairs);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch, ++batch_index) {
      const auto count = std::min(cfg.batch, pairs.size() - start);
      grad.for_each([](const std::string&, Matrix& t) { t.zero(); });
      const double loss = forward_backward(
          model, data, std::span<const LabeledPair>(pairs).subspan(start, count), &grad,
          &dropout_rng, cfg.dropout);
      if (!std::isfinite(loss)) {
        throw numerical_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index));
      }
      adam.step(model, grad);
    }
    const auto row = snapshot(epoch);
    if (!std::isfinite(row.train_loss)) {
      throw numerical_error("non-finite train loss after epoch " + std::to_string(epoch));
    }
    result.history.push_back(row);
    // without a usable validation split the last epoch wins
    const double score = std::isnan(row.val_micro_f1) ? 0.0 : row.val_micro_f1;
    if (score > best || std::isnan(row.val_micro_f1)) {
      best = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  result.final_model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<std::pair<std::string, double>> per_tensor;  // worst error per tensor
};

/// Relative error with a 1e-6 floor on the denominator so entries whose true
/// gradient is (numerically) zero are compared absolutely.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

/// Compares backprop gradients of the pair loss with central differences.
inline GradCheckReport gradient_check(const Model& model, const TrainingData& data,
                                      std::span<const LabeledPair> pairs, double step = 1e-5) {
  Model grad = model.zeros_like();
  forward_backward(model, data, pairs, &grad);
  Model probe = model;
  auto params = probe.tensors();
  auto grads = grad.tensors();
  std::vector<std::string> names;
  probe.for_each([&](const std::string& name, Matrix&) { names.push_back(name); });
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    double worst = 0.0;
    for (std::size_t q = 0; q < params[k]->size(); ++q) {
      double& theta = params[k]->data[q];
      const double saved = theta;
      theta = saved + step;
      const double up = forward_backward(probe, data, pairs);
      theta = saved - step;
      const double down = forward_backward(probe, data, pairs);
      theta = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, relative_error(grads[k]->data[q], numeric));
    }
    report.per_tensor.emplace_back(names[k], worst);
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

}  // namespace roadrank
