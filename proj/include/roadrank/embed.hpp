#pragma once

// Sequence encoder: affine+tanh initial encoding of every vertex in a walk,
// a bidirectional LSTM over the encoded walk, and two-stage mean pooling into
// one fixed-width embedding per node. Forward passes keep the activations
// needed for the hand-written backward pass.

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "roadrank/error.hpp"
#include "roadrank/matrix.hpp"
#include "roadrank/multigraph_walk.hpp"
#include "roadrank/parallel.hpp"
#include "roadrank/rng.hpp"

namespace roadrank {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Min-max scales every column of `a` into [0, 1]. Constant columns map to 0.
inline Matrix minmax_scale(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (std::size_t c = 0; c < a.cols; ++c) {
    double lo = a.rows ? a(0, c) : 0.0, hi = lo;
    for (std::size_t r = 0; r < a.rows; ++r) {
      lo = std::min(lo, a(r, c));
      hi = std::max(hi, a(r, c));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < a.rows; ++r) {
      out(r, c) = span > 0.0 ? (a(r, c) - lo) / span : 0.0;
    }
  }
  return out;
}

struct EmbedDims {
  std::size_t m = 0;    // attribute count (encoder input width)
  std::size_t x = 8;    // initial encoding width
  std::size_t dim = 2;  // LSTM hidden size per direction

  std::size_t hdim() const { return 4 * dim; }

  static EmbedDims from_hdim(std::size_t m, std::size_t x, std::size_t hdim) {
    if (hdim == 0 || hdim % 4 != 0) {
      throw usage_error("hdim must be a positive multiple of 4, got " + std::to_string(hdim));
    }
    if (x == 0) throw usage_error("encoding width x must be >= 1");
    return {m, x, hdim / 4};
  }
};

/// Gate order everywhere: input, forget, candidate, output.
inline constexpr std::array<const char*, 4> kGateNames = {"i", "f", "c", "o"};

struct LstmParams {
  std::array<Matrix, 4> wx;  // x × dim
  std::array<Matrix, 4> wh;  // dim × dim
  std::array<Matrix, 4> b;   // 1 × dim

  LstmParams() = default;
  LstmParams(std::size_t x, std::size_t dim) {
    for (std::size_t g = 0; g < 4; ++g) {
      wx[g] = Matrix(x, dim);
      wh[g] = Matrix(dim, dim);
      b[g] = Matrix(1, dim);
    }
  }
  std::size_t dim() const { return wh[0].rows; }
};

struct EmbedParams {
  EmbedDims dims;
  bool has_lstm = true;
  Matrix w;  // m × x
  Matrix b;  // 1 × x
  LstmParams fwd, bwd;

  static EmbedParams zeros(const EmbedDims& d, bool with_lstm = true) {
    EmbedParams p;
    p.dims = d;
    p.has_lstm = with_lstm;
    p.w = Matrix(d.m, d.x);
    p.b = Matrix(1, d.x);
    if (with_lstm) {
      p.fwd = LstmParams(d.x, d.dim);
      p.bwd = LstmParams(d.x, d.dim);
    }
    return p;
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor.
  static EmbedParams initialized(const EmbedDims& d, bool with_lstm, Rng& rng) {
    auto p = zeros(d, with_lstm);
    p.for_each([&](const std::string& name, Matrix& t) {
      const bool encoder = name.rfind("encoder.", 0) == 0;
      const std::size_t fan_in = encoder ? d.m : d.x + d.dim;
      const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fan_in)));
      for (auto& v : t.data) v = rng.uniform(-bound, bound);
    });
    return p;
  }

  /// Width of one pooled output position (2·dim with the LSTM, x without).
  std::size_t position_width() const { return has_lstm ? 2 * dims.dim : dims.x; }
  std::size_t out_width() const { return 2 * position_width(); }

  template <typename F>
  void for_each(F&& f) {
    f(std::string("encoder.W"), w);
    f(std::string("encoder.b"), b);
    if (!has_lstm) return;
    for (auto [prefix, cell] : {std::pair{"fwd", &fwd}, std::pair{"bwd", &bwd}}) {
      for (std::size_t g = 0; g < 4; ++g) {
        f(std::string(prefix) + ".W_x" + kGateNames[g], cell->wx[g]);
        f(std::string(prefix) + ".W_h" + kGateNames[g], cell->wh[g]);
        f(std::string(prefix) + ".b_" + kGateNames[g], cell->b[g]);
      }
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<EmbedParams*>(this)->for_each(
        [&](const std::string& name, Matrix& t) { f(name, static_cast<const Matrix&>(t)); });
  }
};

/// Encodes each vertex of a walk: node ids use their feature row, attribute
/// ids a one-hot. Result is length × x.
inline Matrix initial_encode(std::span<const std::uint32_t> seq, const Matrix& features,
                             const EmbedParams& p) {
  const auto n = features.rows;
  const auto m = features.cols;
  if (m != p.dims.m) throw invalid_input("feature width does not match encoder input width");
  Matrix out(seq.size(), p.dims.x);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto v = seq[t];
    auto row = out.row(t);
    std::copy(p.b.data.begin(), p.b.data.end(), row.begin());
    if (v < n) {
      add_vec_mat(features.row(v), p.w, row);
    } else if (v < n + m) {
      const auto wr = p.w.row(v - n);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += wr[c];
    } else {
      throw invalid_input("vertex id " + std::to_string(v) + " out of range");
    }
    for (auto& e : row) e = std::tanh(e);
  }
  return out;
}

/// Activations of one LSTM direction over a sequence, in processing order.
struct LstmTrace {
  Matrix gates;  // steps × 4·dim: i, f, candidate, o (post-activation)
  Matrix c;      // steps × dim
  Matrix h;      // steps × dim
};

/// Runs one LSTM direction over xs (rows in processing order), zero initial state.
inline LstmTrace lstm_run(const Matrix& xs, const LstmParams& p, bool reversed) {
  const auto steps = xs.rows;
  const auto dim = p.dim();
  LstmTrace tr{Matrix(steps, 4 * dim), Matrix(steps, dim), Matrix(steps, dim)};
  std::vector<double> pre(dim), h_prev(dim, 0.0), c_prev(dim, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto x = xs.row(reversed ? steps - 1 - s : s);
    auto gates = tr.gates.row(s);
    for (std::size_t g = 0; g < 4; ++g) {
      std::copy(p.b[g].data.begin(), p.b[g].data.end(), pre.begin());
      add_vec_mat(x, p.wx[g], pre);
      add_vec_mat(h_prev, p.wh[g], pre);
      for (std::size_t d = 0; d < dim; ++d) {
        gates[g * dim + d] = g == 2 ? std::tanh(pre[d]) : sigmoid(pre[d]);
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const double c = gates[dim + d] * c_prev[d] + gates[d] * gates[2 * dim + d];
      tr.c(s, d) = c;
      tr.h(s, d) = gates[3 * dim + d] * std::tanh(c);
      c_prev[d] = c;
      h_prev[d] = tr.h(s, d);
    }
  }
  return tr;
}

/// Backpropagates through one direction. dh holds upstream gradients per
/// step in processing order; gradients wrt inputs go to dxs (sequence order).
inline void lstm_backward(const Matrix& xs, const LstmTrace& tr, const LstmParams& p,
                          bool reversed, const Matrix& dh, LstmParams& grad, Matrix& dxs) {
  const auto steps = xs.rows;
  const auto dim = p.dim();
  std::vector<double> dh_next(dim, 0.0), dc_next(dim, 0.0), zeros(dim, 0.0);
  std::array<std::vector<double>, 4> dpre;
  for (auto& v : dpre) v.assign(dim, 0.0);
  for (std::size_t s = steps; s-- > 0;) {
    const auto gates = tr.gates.row(s);
    const auto x_row = reversed ? steps - 1 - s : s;
    const auto x = xs.row(x_row);
    const std::span<const double> h_prev = s > 0 ? tr.h.row(s - 1) : std::span<const double>(zeros);
    for (std::size_t d = 0; d < dim; ++d) {
      const double i = gates[d], f = gates[dim + d], g = gates[2 * dim + d],
                   o = gates[3 * dim + d];
      const double c = tr.c(s, d);
      const double c_prev = s > 0 ? tr.c(s - 1, d) : 0.0;
      const double tc = std::tanh(c);
      const double dhd = dh(s, d) + dh_next[d];
      const double dc = dhd * o * (1.0 - tc * tc) + dc_next[d];
      dpre[0][d] = dc * g * i * (1.0 - i);
      dpre[1][d] = dc * c_prev * f * (1.0 - f);
      dpre[2][d] = dc * i * (1.0 - g * g);
      dpre[3][d] = dhd * tc * o * (1.0 - o);
      dc_next[d] = dc * f;
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    auto dx = dxs.row(x_row);
    for (std::size_t q = 0; q < 4; ++q) {
      add_outer(x, dpre[q], grad.wx[q]);
      add_outer(h_prev, dpre[q], grad.wh[q]);
      for (std::size_t d = 0; d < dim; ++d) grad.b[q].data[d] += dpre[q][d];
      add_mat_vec(p.wx[q], dpre[q], dx);
      add_mat_vec(p.wh[q], dpre[q], dh_next);
    }
  }
}

/// Forward and backward directions concatenated per position: length × 2·dim.
inline Matrix bilstm_forward(const Matrix& xs, const EmbedParams& p,
                             LstmTrace* fwd_trace = nullptr, LstmTrace* bwd_trace = nullptr) {
  const auto dim = p.dims.dim;
  auto f = lstm_run(xs, p.fwd, false);
  auto b = lstm_run(xs, p.bwd, true);
  Matrix out(xs.rows, 2 * dim);
  for (std::size_t t = 0; t < xs.rows; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      out(t, d) = f.h(t, d);
      out(t, dim + d) = b.h(xs.rows - 1 - t, d);
    }
  }
  if (fwd_trace) *fwd_trace = std::move(f);
  if (bwd_trace) *bwd_trace = std::move(b);
  return out;
}

/// Mean over sequences per position, then [position 1] ⊕ [mean of positions 2..l].
inline std::vector<double> pool_embedding(std::span<const Matrix> hs) {
  if (hs.empty()) throw invalid_input("pooling needs at least one sequence");
  const auto len = hs[0].rows;
  const auto w = hs[0].cols;
  if (len < 2) throw invalid_input("pooling needs sequence length >= 2");
  Matrix mean(len, w);
  for (const auto& h : hs) {
    if (h.rows != len || h.cols != w) throw invalid_input("pooling: ragged sequences");
    for (std::size_t i = 0; i < h.size(); ++i) mean.data[i] += h.data[i];
  }
  for (auto& v : mean.data) v /= static_cast<double>(hs.size());
  std::vector<double> out(2 * w, 0.0);
  for (std::size_t d = 0; d < w; ++d) out[d] = mean(0, d);
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t d = 0; d < w; ++d) out[w + d] += mean(t, d);
  }
  for (std::size_t d = 0; d < w; ++d) out[w + d] /= static_cast<double>(len - 1);
  return out;
}

/// Everything the backward pass needs for one node's embedding.
struct NodeTrace {
  NodeId node = 0;
  std::vector<Matrix> inputs;   // per sequence: length × x initial encodings
  std::vector<LstmTrace> fwd, bwd;
  std::vector<Matrix> outputs;  // per sequence: length × position_width
  std::vector<double> embedding;
};

inline NodeTrace embed_node(const SampleSet& samples, NodeId node, const Matrix& features,
                            const EmbedParams& p) {
  NodeTrace tr;
  tr.node = node;
  const auto num = samples.config.num;
  tr.inputs.reserve(num);
  tr.outputs.reserve(num);
  if (p.has_lstm) {
    tr.fwd.resize(num);
    tr.bwd.resize(num);
  }
  for (std::size_t s = 0; s < num; ++s) {
    tr.inputs.push_back(initial_encode(samples.sequence(node, s), features, p));
    if (p.has_lstm) {
      tr.outputs.push_back(bilstm_forward(tr.inputs.back(), p, &tr.fwd[s], &tr.bwd[s]));
    } else {
      tr.outputs.push_back(tr.inputs.back());
    }
  }
  tr.embedding = pool_embedding(tr.outputs);
  return tr;
}

/// Accumulates d(loss)/d(params) into grad given d(loss)/d(embedding).
inline void embed_node_backward(const NodeTrace& tr, std::span<const double> d_embedding,
                                const SampleSet& samples, const Matrix& features,
                                const EmbedParams& p, EmbedParams& grad) {
  const auto num = tr.outputs.size();
  const auto len = tr.outputs[0].rows;
  const auto w = tr.outputs[0].cols;
  const auto dim = p.dims.dim;
  const auto n = features.rows;
  // gradient reaching every sequence's output at each position
  Matrix d_out(len, w);
  for (std::size_t d = 0; d < w; ++d) {
    d_out(0, d) = d_embedding[d] / static_cast<double>(num);
    const double rest = d_embedding[w + d] / static_cast<double>(num * (len - 1));
    for (std::size_t t = 1; t < len; ++t) d_out(t, d) = rest;
  }
  Matrix dh_f(len, dim), dh_b(len, dim), dxs(len, p.dims.x);
  std::vector<double> dz(p.dims.x);
  for (std::size_t s = 0; s < num; ++s) {
    const auto& xs = tr.inputs[s];
    if (p.has_lstm) {
      for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t d = 0; d < dim; ++d) {
          dh_f(t, d) = d_out(t, d);
          dh_b(len - 1 - t, d) = d_out(t, dim + d);
        }
      }
      dxs.zero();
      lstm_backward(xs, tr.fwd[s], p.fwd, false, dh_f, grad.fwd, dxs);
      lstm_backward(xs, tr.bwd[s], p.bwd, true, dh_b, grad.bwd, dxs);
    } else {
      dxs = d_out;
    }
    const auto seq = samples.sequence(tr.node, s);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < p.dims.x; ++c) {
        const double xv = xs(t, c);
        dz[c] = dxs(t, c) * (1.0 - xv * xv);
        grad.b.data[c] += dz[c];
      }
      const auto v = seq[t];
      if (v < n) {
        add_outer(features.row(v), dz, grad.w);
      } else {
        auto gr = grad.w.row(v - n);
        for (std::size_t c = 0; c < p.dims.x; ++c) gr[c] += dz[c];
      }
    }
  }
}

/// Embedding matrix (n × out_width) for every node.
inline Matrix embed_all(const SampleSet& samples, const Matrix& features, const EmbedParams& p,
                        std::size_t threads = 1) {
  if (samples.num_nodes != features.rows) {
    throw invalid_input("sample set and feature matrix disagree on node count");
  }
  Matrix out(samples.num_nodes, p.out_width());
  parallel_for(samples.num_nodes, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto tr = embed_node(samples, static_cast<NodeId>(i), features, p);
      std::copy(tr.embedding.begin(), tr.embedding.end(), out.row(i).begin());
    }
  });
  return out;
}

/// Network-level convenience: min-max scales the raw attributes first.
inline Matrix embed_all(const SampleSet& samples, const RoadNetwork& net, const EmbedParams& p,
                        std::size_t threads = 1) {
  return embed_all(samples, minmax_scale(net.attributes()), p, threads);
}

}  // namespace roadrank
