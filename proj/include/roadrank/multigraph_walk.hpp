#pragma once

// Multi-graph fused random walks over the adjacency graph and the
// node–attribute bridge graph.
//
// From a node the walker flips a coin: with probability alpha it follows an
// out-edge (uniform over out-neighbours); otherwise it hops to an attribute
// of the current node (weighted by that node's normalized attribute values)
// and then to a node carrying a similar value of that attribute. Attribute
// visits are recorded in the sequence as vertex id n + k.

#include <cmath>
#include <cstdint>
#include <istream>
#include <list>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "roadrank/alias.hpp"
#include "roadrank/error.hpp"
#include "roadrank/graph.hpp"
#include "roadrank/parallel.hpp"
#include "roadrank/rng.hpp"
#include "roadrank/text.hpp"

namespace roadrank {

struct WalkConfig {
  double alpha = 0.0001;  // probability of an adjacency step
  std::size_t num = 150;  // sequences per node
  std::size_t length = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw usage_error("alpha must lie in [0, 1]");
    if (num < 1) throw usage_error("num must be >= 1");
    if (length < 2) throw usage_error("sequence length must be >= 2");
  }
};

/// Step distribution over the n nodes from node i along the adjacency graph.
inline std::vector<double> node_step_distribution(NodeId i, const NormalizedViews& views) {
  if (i >= views.mbar.size()) throw invalid_input("node id out of range");
  return views.mbar.column(i);
}

/// Distribution over the m attributes for the first half of a bridge step.
inline std::vector<double> node_to_attr_distribution(NodeId i, const NormalizedViews& views) {
  const auto& abar = views.abar();
  if (i >= abar.cols) throw invalid_input("node id out of range");
  std::vector<double> p(abar.rows);
  double total = 0.0;
  for (std::size_t k = 0; k < abar.rows; ++k) {
    p[k] = abar(k, i);
    total += p[k];
  }
  if (total <= 0.0) {
    throw invalid_input("node " + std::to_string(i) + " has no attribute mass to walk on");
  }
  for (auto& v : p) v /= total;
  return p;
}

/// Distribution over nodes for the second half of a bridge step: nodes that
/// carry attribute k are weighted by 1 - |abar[k][j] - abar[k][i]|, then
/// renormalized. Nodes with a zero value get no mass.
inline std::vector<double> attr_to_node_distribution(NodeId i, std::size_t k,
                                                     const NormalizedViews& views) {
  const auto& abar = views.abar();
  if (k >= abar.rows) throw invalid_input("attribute id out of range");
  if (i >= abar.cols) throw invalid_input("node id out of range");
  const double origin = abar(k, i);
  std::vector<double> p(abar.cols, 0.0);
  double total = 0.0;
  std::size_t support = 0;
  for (std::size_t j = 0; j < abar.cols; ++j) {
    const double v = abar(k, j);
    if (v == 0.0) continue;
    p[j] = 1.0 - std::abs(v - origin);
    total += p[j];
    ++support;
  }
  if (support == 0) {
    throw invalid_input("attribute " + std::to_string(k) + " has empty support");
  }
  if (total <= 0.0) {
    // every similarity weight vanished; fall back to uniform over the support
    for (std::size_t j = 0; j < abar.cols; ++j) {
      p[j] = abar(k, j) != 0.0 ? 1.0 : 0.0;
    }
    total = static_cast<double>(support);
  }
  for (auto& v : p) v /= total;
  return p;
}

namespace detail {

/// Small LRU map of alias tables for the (origin, attribute) distributions.
class AliasLru {
 public:
  explicit AliasLru(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

  template <typename Make>
  const AliasTable& get(std::uint64_t key, Make&& make) {
    if (auto it = index_.find(key); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    if (index_.size() >= capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    order_.emplace_front(key, make());
    index_[key] = order_.begin();
    return order_.front().second;
  }

 private:
  std::size_t capacity_;
  std::list<std::pair<std::uint64_t, AliasTable>> order_;
  std::unordered_map<std::uint64_t, std::list<std::pair<std::uint64_t, AliasTable>>::iterator>
      index_;
};

}  // namespace detail

/// Per-worker transition sampler. Adjacency and node→attribute tables are
/// built eagerly; attribute→node tables lazily through an LRU cache.
class TransitionSampler {
 public:
  TransitionSampler(const RoadNetwork& net, const NormalizedViews& views,
                    std::size_t cache_capacity = 4096)
      : net_(&net), views_(&views), bridge_cache_(cache_capacity) {
    const auto n = net.num_nodes();
    node_tables_.reserve(n);
    attr_tables_.reserve(n);
    for (NodeId i = 0; i < n; ++i) {
      const auto nb = views.mbar.support(i);
      std::vector<double> p(nb.size(), 1.0 / static_cast<double>(nb.size()));
      node_tables_.push_back(build_alias(p));
      attr_tables_.push_back(build_alias(node_to_attr_distribution(i, views)));
    }
  }

  NodeId node_step(NodeId i, Rng& rng) const {
    return net_->out_neighbors(i)[alias_draw(node_tables_[i], rng)];
  }

  std::size_t attribute_step(NodeId i, Rng& rng) const {
    return alias_draw(attr_tables_[i], rng);
  }

  NodeId bridge_step(NodeId i, std::size_t k, Rng& rng) {
    const auto key = static_cast<std::uint64_t>(i) * net_->num_attributes() + k;
    const auto& table = bridge_cache_.get(
        key, [&] { return build_alias(attr_to_node_distribution(i, k, *views_)); });
    return static_cast<NodeId>(alias_draw(table, rng));
  }

 private:
  const RoadNetwork* net_;
  const NormalizedViews* views_;
  std::vector<AliasTable> node_tables_;
  std::vector<AliasTable> attr_tables_;
  detail::AliasLru bridge_cache_;
};

/// All sampled sequences, stored flat: node i, sequence s occupies
/// [(i*num + s)*length, (i*num + s + 1)*length).
struct SampleSet {
  std::size_t num_nodes = 0;
  std::size_t num_attributes = 0;
  WalkConfig config;
  std::vector<std::uint32_t> vertices;

  std::span<const std::uint32_t> sequence(std::size_t node, std::size_t s) const {
    return {vertices.data() + (node * config.num + s) * config.length, config.length};
  }
  std::span<std::uint32_t> sequence(std::size_t node, std::size_t s) {
    return {vertices.data() + (node * config.num + s) * config.length, config.length};
  }

  bool is_attribute(std::uint32_t v) const { return v >= num_nodes; }

  friend bool operator==(const SampleSet& a, const SampleSet& b) {
    return a.num_nodes == b.num_nodes && a.num_attributes == b.num_attributes &&
           a.config.alpha == b.config.alpha && a.config.num == b.config.num &&
           a.config.length == b.config.length && a.config.seed == b.config.seed &&
           a.vertices == b.vertices;
  }
};

/// One walk of cfg.length vertices from `start`.
inline void walk_once(NodeId start, const WalkConfig& cfg, TransitionSampler& sampler,
                      std::size_t n, Rng& rng, std::span<std::uint32_t> out) {
  std::size_t pos = 0;
  out[pos++] = start;
  NodeId current = start;
  while (pos < cfg.length) {
    if (rng.uniform() < cfg.alpha) {
      current = sampler.node_step(current, rng);
      out[pos++] = current;
      continue;
    }
    const auto k = sampler.attribute_step(current, rng);
    out[pos++] = static_cast<std::uint32_t>(n + k);
    if (pos == cfg.length) break;
    current = sampler.bridge_step(current, k, rng);
    out[pos++] = current;
  }
}

/// Seed of the private stream for (node, sequence index).
inline std::uint64_t walk_stream_seed(std::uint64_t seed, std::size_t node, std::size_t s,
                                      std::size_t num) {
  return derive_seed(stage_seed(seed, Stage::kSampling),
                     static_cast<std::uint64_t>(node) * num + s);
}

inline SampleSet sample_walks(const RoadNetwork& net, const NormalizedViews& views,
                              const WalkConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  SampleSet out;
  out.num_nodes = net.num_nodes();
  out.num_attributes = net.num_attributes();
  out.config = cfg;
  out.vertices.assign(net.num_nodes() * cfg.num * cfg.length, 0);
  parallel_for(net.num_nodes(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    TransitionSampler sampler(net, views);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t s = 0; s < cfg.num; ++s) {
        Rng rng(walk_stream_seed(cfg.seed, i, s, cfg.num));
        walk_once(static_cast<NodeId>(i), cfg, sampler, net.num_nodes(), rng,
                  out.sequence(i, s));
      }
    }
  });
  return out;
}

/// Checks the structural invariants; returns an empty string when they hold.
inline std::string check_sample_set(const SampleSet& s) {
  const auto total = s.num_nodes + s.num_attributes;
  for (std::size_t i = 0; i < s.num_nodes; ++i) {
    for (std::size_t q = 0; q < s.config.num; ++q) {
      const auto seq = s.sequence(i, q);
      if (seq[0] != i) return "sequence does not start at its node " + std::to_string(i);
      for (std::size_t p = 0; p < seq.size(); ++p) {
        if (seq[p] >= total) return "vertex id out of range";
        if (p > 0 && s.is_attribute(seq[p]) && s.is_attribute(seq[p - 1])) {
          return "consecutive attribute vertices at node " + std::to_string(i);
        }
      }
    }
  }
  return {};
}

inline constexpr std::string_view kSampleFileMagic = "roadrank-samples v1";

inline void write_samples(const SampleSet& s, std::ostream& out) {
  out << kSampleFileMagic << '\n';
  out << "n=" << s.num_nodes << " m=" << s.num_attributes << " num=" << s.config.num
      << " l=" << s.config.length << " alpha=" << text::format_double(s.config.alpha)
      << " seed=" << s.config.seed << '\n';
  for (std::size_t i = 0; i < s.num_nodes; ++i) {
    for (std::size_t q = 0; q < s.config.num; ++q) {
      const auto seq = s.sequence(i, q);
      for (std::size_t p = 0; p < seq.size(); ++p) out << (p ? " " : "") << seq[p];
      out << '\n';
    }
  }
}

inline SampleSet read_samples(std::istream& in, const std::string& origin = "samples") {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kSampleFileMagic) {
    throw invalid_input(origin + ": not a sample file (bad magic line)");
  }
  if (!std::getline(in, line)) throw invalid_input(origin + ": missing header");
  std::map<std::string, std::string> header;
  for (auto field : text::split(text::trim(line), ' ')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw invalid_input(origin + ": bad header field");
    header[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
  }
  auto get_uint = [&](const char* key) {
    const auto it = header.find(key);
    const auto v = it == header.end() ? std::nullopt : text::parse_uint(it->second);
    if (!v) throw invalid_input(origin + ": header lacks " + key);
    return *v;
  };
  SampleSet s;
  s.num_nodes = get_uint("n");
  s.num_attributes = get_uint("m");
  s.config.num = get_uint("num");
  s.config.length = get_uint("l");
  s.config.seed = get_uint("seed");
  const auto alpha = header.count("alpha") ? text::parse_double(header["alpha"]) : std::nullopt;
  if (!alpha) throw invalid_input(origin + ": header lacks alpha");
  s.config.alpha = *alpha;
  s.config.validate();
  s.vertices.reserve(s.num_nodes * s.config.num * s.config.length);
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto ids = text::split(text::trim(line), ' ');
    if (ids.size() != s.config.length) {
      throw invalid_input(origin + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(s.config.length) + " vertex ids");
    }
    for (auto id : ids) {
      const auto v = text::parse_uint(id);
      if (!v) throw invalid_input(origin + ":" + std::to_string(lineno) + ": bad vertex id");
      s.vertices.push_back(static_cast<std::uint32_t>(*v));
    }
  }
  if (s.vertices.size() != s.num_nodes * s.config.num * s.config.length) {
    throw invalid_input(origin + ": sequence count does not match header");
  }
  if (auto why = check_sample_set(s); !why.empty()) throw invalid_input(origin + ": " + why);
  return s;
}

}  // namespace roadrank
