#pragma once

// Road-network data model: a directed, unweighted graph over road segments
// with a non-negative attribute matrix, plus the two l1-normalized views that
// drive every sampling probability.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/matrix.hpp"
#include "roadrank/text.hpp"

namespace roadrank {

using NodeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed attributed road network. Immutable once built.
///
/// Nodes are dense ids 0..n-1. In the combined vertex space used by the
/// walker and encoder, attribute k has id n + k.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Validates and builds a network. Nodes without out-edges get a self-loop
  /// so every node has out-degree >= 1; the count is kept in
  /// self_loops_added().
  static RoadNetwork build(std::size_t n, std::vector<Edge> edges, Matrix attributes,
                           std::vector<std::string> attr_names) {
    if (attributes.rows != n) {
      throw invalid_input("attribute matrix has " + std::to_string(attributes.rows) +
                          " rows for " + std::to_string(n) + " nodes");
    }
    if (attributes.cols != attr_names.size()) {
      throw invalid_input("attribute name count does not match attribute columns");
    }
    if (attributes.cols == 0) throw invalid_input("network needs at least one attribute");
    for (std::size_t i = 0; i < n; ++i) {
      bool positive = false;
      for (double v : attributes.row(i)) {
        if (!std::isfinite(v) || v < 0.0) {
          throw invalid_input("node " + std::to_string(i) +
                              " has a negative or non-finite attribute");
        }
        positive = positive || v > 0.0;
      }
      if (!positive) {
        throw invalid_input("node " + std::to_string(i) + " has no positive attribute");
      }
    }
    std::sort(edges.begin(), edges.end());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].src >= n || edges[e].dst >= n) {
        throw invalid_input("edge endpoint out of range");
      }
      if (e > 0 && edges[e] == edges[e - 1]) {
        throw invalid_input("duplicate edge " + std::to_string(edges[e].src) + "->" +
                            std::to_string(edges[e].dst));
      }
    }

    RoadNetwork net;
    net.n_ = n;
    net.attributes_ = std::move(attributes);
    net.attr_names_ = std::move(attr_names);

    std::vector<std::size_t> outdeg(n, 0);
    for (const auto& e : edges) ++outdeg[e.src];
    net.added_loop_.assign(n, false);
    for (NodeId i = 0; i < n; ++i) {
      if (outdeg[i] == 0) {
        edges.push_back({i, i});
        net.added_loop_[i] = true;
        ++net.self_loops_added_;
      }
    }
    std::sort(edges.begin(), edges.end());
    net.edges_ = std::move(edges);

    net.out_offsets_.assign(n + 1, 0);
    net.in_offsets_.assign(n + 1, 0);
    for (const auto& e : net.edges_) {
      ++net.out_offsets_[e.src + 1];
      ++net.in_offsets_[e.dst + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      net.out_offsets_[i + 1] += net.out_offsets_[i];
      net.in_offsets_[i + 1] += net.in_offsets_[i];
    }
    net.out_targets_.resize(net.edges_.size());
    net.in_sources_.resize(net.edges_.size());
    std::vector<std::size_t> out_fill(net.out_offsets_.begin(), net.out_offsets_.end() - 1);
    std::vector<std::size_t> in_fill(net.in_offsets_.begin(), net.in_offsets_.end() - 1);
    for (const auto& e : net.edges_) {
      net.out_targets_[out_fill[e.src]++] = e.dst;
      net.in_sources_[in_fill[e.dst]++] = e.src;
    }
    return net;
  }

  std::size_t num_nodes() const { return n_; }
  std::size_t num_attributes() const { return attributes_.cols; }
  std::size_t num_vertices() const { return n_ + attributes_.cols; }

  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& attributes() const { return attributes_; }
  const std::vector<std::string>& attr_names() const { return attr_names_; }
  std::size_t self_loops_added() const { return self_loops_added_; }
  /// True when e is a self-loop inserted by build() rather than an input edge.
  bool is_added_loop(const Edge& e) const { return e.src == e.dst && added_loop_[e.src]; }

  std::span<const NodeId> out_neighbors(NodeId i) const {
    return {out_targets_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
  }
  std::span<const NodeId> in_neighbors(NodeId i) const {
    return {in_sources_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
  }
  std::size_t out_degree(NodeId i) const { return out_offsets_[i + 1] - out_offsets_[i]; }

  bool has_edge(NodeId i, NodeId j) const {
    const auto nb = out_neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  std::optional<std::size_t> attribute_index(std::string_view name) const {
    const auto it = std::find(attr_names_.begin(), attr_names_.end(), name);
    if (it == attr_names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - attr_names_.begin());
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  Matrix attributes_;
  std::vector<std::string> attr_names_;
  std::size_t self_loops_added_ = 0;
  std::vector<bool> added_loop_;
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<NodeId> out_targets_, in_sources_;
};

namespace detail {

inline std::string at_line(const std::string& file, std::size_t line) {
  return file + ":" + std::to_string(line) + ": ";
}

}  // namespace detail

/// Reads an edge CSV ("src,dst") and attribute CSV ("node_id,<attr>...").
inline RoadNetwork load_network(const std::string& edge_file, const std::string& attr_file) {
  using detail::at_line;

  auto ain = text::open_input(attr_file);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> names;
  while (std::getline(ain, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line, ',');
    if (cols.size() < 2 || cols[0] != "node_id") {
      throw invalid_input(at_line(attr_file, lineno) +
                          "header must be node_id,<attr_1>,...,<attr_m>");
    }
    for (std::size_t c = 1; c < cols.size(); ++c) names.emplace_back(cols[c]);
    break;
  }
  if (names.empty()) throw invalid_input(attr_file + ": missing header");
  const std::size_t m = names.size();

  struct Row {
    std::int64_t id;
    std::vector<double> values;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(ain, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line, ',');
    if (cols.size() != m + 1) {
      throw invalid_input(at_line(attr_file, lineno) + "expected " + std::to_string(m + 1) +
                          " columns, got " + std::to_string(cols.size()));
    }
    const auto id = text::parse_int(cols[0]);
    if (!id || *id < 0) throw invalid_input(at_line(attr_file, lineno) + "bad node id");
    Row r{*id, {}, lineno};
    for (std::size_t c = 1; c <= m; ++c) {
      const auto v = text::parse_double(cols[c]);
      if (!v || !std::isfinite(*v)) {
        throw invalid_input(at_line(attr_file, lineno) + "bad value for attribute '" +
                            names[c - 1] + "'");
      }
      if (*v < 0.0) {
        throw invalid_input(at_line(attr_file, lineno) + "negative value for attribute '" +
                            names[c - 1] + "'");
      }
      r.values.push_back(*v);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw invalid_input(attr_file + ": no node rows");

  std::int64_t max_id = 0;
  for (const auto& r : rows) max_id = std::max(max_id, r.id);
  const auto n = static_cast<std::size_t>(max_id + 1);
  Matrix attrs(n, m);
  std::vector<std::size_t> seen_at(n, 0);
  for (const auto& r : rows) {
    const auto id = static_cast<std::size_t>(r.id);
    if (seen_at[id] != 0) {
      throw invalid_input(at_line(attr_file, r.line) + "duplicate node id " +
                          std::to_string(id) + " (first at line " +
                          std::to_string(seen_at[id]) + ")");
    }
    seen_at[id] = r.line;
    bool positive = false;
    for (std::size_t c = 0; c < m; ++c) {
      attrs(id, c) = r.values[c];
      positive = positive || r.values[c] > 0.0;
    }
    if (!positive) {
      throw invalid_input(at_line(attr_file, r.line) + "node " + std::to_string(id) +
                          " has no positive attribute");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen_at[i] == 0) {
      throw invalid_input(attr_file + ": missing row for node " + std::to_string(i) +
                          " (ids must cover 0.." + std::to_string(n - 1) + ")");
    }
  }

  auto ein = text::open_input(edge_file);
  lineno = 0;
  bool header_seen = false;
  std::vector<Edge> edges;
  std::vector<std::pair<Edge, std::size_t>> with_lines;
  while (std::getline(ein, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (cols.size() != 2 || cols[0] != "src" || cols[1] != "dst") {
        throw invalid_input(at_line(edge_file, lineno) + "header must be src,dst");
      }
      continue;
    }
    if (cols.size() != 2) throw invalid_input(at_line(edge_file, lineno) + "expected src,dst");
    const auto s = text::parse_int(cols[0]);
    const auto d = text::parse_int(cols[1]);
    if (!s || !d) throw invalid_input(at_line(edge_file, lineno) + "bad node id");
    if (*s < 0 || *d < 0 || *s >= static_cast<std::int64_t>(n) ||
        *d >= static_cast<std::int64_t>(n)) {
      throw invalid_input(at_line(edge_file, lineno) + "dangling edge endpoint " +
                          std::string(cols[0]) + "->" + std::string(cols[1]));
    }
    with_lines.push_back({Edge{static_cast<NodeId>(*s), static_cast<NodeId>(*d)}, lineno});
  }
  std::sort(with_lines.begin(), with_lines.end());
  for (std::size_t e = 0; e < with_lines.size(); ++e) {
    if (e > 0 && with_lines[e].first == with_lines[e - 1].first) {
      throw invalid_input(at_line(edge_file, with_lines[e].second) + "duplicate edge");
    }
    edges.push_back(with_lines[e].first);
  }
  return RoadNetwork::build(n, std::move(edges), std::move(attrs), std::move(names));
}

/// A network directory holds edges.csv and attributes.csv.
inline RoadNetwork load_network(const std::filesystem::path& dir) {
  return load_network((dir / "edges.csv").string(), (dir / "attributes.csv").string());
}

inline void save_network(const RoadNetwork& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = text::open_output((dir / "edges.csv").string());
    out << "src,dst\n";
    for (const auto& e : net.edges()) {
      if (!net.is_added_loop(e)) out << e.src << ',' << e.dst << '\n';
    }
  }
  auto out = text::open_output((dir / "attributes.csv").string());
  out << "node_id";
  for (const auto& name : net.attr_names()) out << ',' << name;
  out << '\n';
  const auto& a = net.attributes();
  for (std::size_t i = 0; i < net.num_nodes(); ++i) {
    out << i;
    for (double v : a.row(i)) out << ',' << text::format_double(v);
    out << '\n';
  }
}

/// Column-stochastic transposed adjacency: column i holds the out-edges of
/// node i, each weighted 1/outdeg(i). Stored sparsely by column.
class AdjacencyView {
 public:
  explicit AdjacencyView(const RoadNetwork& net) : net_(&net) {
    for (NodeId i = 0; i < net.num_nodes(); ++i) {
      if (net.out_degree(i) == 0) {
        throw invalid_input("node " + std::to_string(i) + " has zero out-degree");
      }
    }
  }

  std::size_t size() const { return net_->num_nodes(); }

  /// Entry (j, i) of the normalized matrix.
  double at(NodeId j, NodeId i) const {
    return net_->has_edge(i, j) ? 1.0 / static_cast<double>(net_->out_degree(i)) : 0.0;
  }

  std::span<const NodeId> support(NodeId i) const { return net_->out_neighbors(i); }

  std::vector<double> column(NodeId i) const {
    std::vector<double> col(size(), 0.0);
    const double w = 1.0 / static_cast<double>(net_->out_degree(i));
    for (NodeId j : net_->out_neighbors(i)) col[j] = w;
    return col;
  }

  Matrix dense() const {
    Matrix out(size(), size());
    for (NodeId i = 0; i < size(); ++i) {
      const double w = 1.0 / static_cast<double>(net_->out_degree(i));
      for (NodeId j : net_->out_neighbors(i)) out(j, i) = w;
    }
    return out;
  }

 private:
  const RoadNetwork* net_;
};

/// Transposed attribute matrix (m×n) with each attribute row l1-normalized.
struct AttributeView {
  Matrix abar;
  std::vector<std::size_t> zero_attributes;  // rows left all-zero
};

inline AdjacencyView normalize_adjacency(const RoadNetwork& net) { return AdjacencyView(net); }

inline AttributeView normalize_attributes(const RoadNetwork& net) {
  const auto& a = net.attributes();
  AttributeView view{Matrix(a.cols, a.rows), {}};
  for (std::size_t k = 0; k < a.cols; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) total += a(i, k);
    if (total == 0.0) {
      view.zero_attributes.push_back(k);
      continue;
    }
    for (std::size_t i = 0; i < a.rows; ++i) view.abar(k, i) = a(i, k) / total;
  }
  return view;
}

/// Both normalized views of one network. Holds a pointer to the network,
/// which must outlive it.
struct NormalizedViews {
  AdjacencyView mbar;
  AttributeView attrs;

  explicit NormalizedViews(const RoadNetwork& net)
      : mbar(normalize_adjacency(net)), attrs(normalize_attributes(net)) {}

  const Matrix& abar() const { return attrs.abar; }
};

}  // namespace roadrank
