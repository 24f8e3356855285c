#pragma once

// Siamese pairwise ranking head, pair labels, binary cross-entropy, and the
// aggregation of pairwise ratings into a total order.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "roadrank/embed.hpp"
#include "roadrank/error.hpp"
#include "roadrank/graph.hpp"
#include "roadrank/matrix.hpp"
#include "roadrank/rng.hpp"

namespace roadrank {

struct RankerDims {
  std::size_t in = 8;
  std::size_t f1 = 32;
  std::size_t f2 = 16;
  std::size_t rdim = 8;
};

/// One branch network (three rectified FC layers) shared by both inputs, and
/// a projection of the concatenated branch outputs to one logit.
///
/// With `antisymmetric` set the projection is tied to (u, -u) with u the
/// first half of `proj_w` and no bias, so rating(i,j) + rating(j,i) = 1.
struct RankerParams {
  RankerDims dims;
  Matrix w1, b1, w2, b2, w3, b3;
  Matrix proj_w;  // 1 × 2·rdim
  Matrix proj_b;  // 1 × 1
  bool antisymmetric = false;

  static RankerParams zeros(const RankerDims& d) {
    RankerParams p;
    p.dims = d;
    p.w1 = Matrix(d.in, d.f1);
    p.b1 = Matrix(1, d.f1);
    p.w2 = Matrix(d.f1, d.f2);
    p.b2 = Matrix(1, d.f2);
    p.w3 = Matrix(d.f2, d.rdim);
    p.b3 = Matrix(1, d.rdim);
    p.proj_w = Matrix(1, 2 * d.rdim);
    p.proj_b = Matrix(1, 1);
    return p;
  }

  static RankerParams initialized(const RankerDims& d, Rng& rng) {
    auto p = zeros(d);
    auto fill = [&](Matrix& t, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fan_in)));
      for (auto& v : t.data) v = rng.uniform(-bound, bound);
    };
    fill(p.w1, d.in);
    fill(p.b1, d.in);
    fill(p.w2, d.f1);
    fill(p.b2, d.f1);
    fill(p.w3, d.f2);
    fill(p.b3, d.f2);
    fill(p.proj_w, 2 * d.rdim);
    fill(p.proj_b, 2 * d.rdim);
    return p;
  }

  template <typename F>
  void for_each(F&& f) {
    f(std::string("ranker.fc1.W"), w1);
    f(std::string("ranker.fc1.b"), b1);
    f(std::string("ranker.fc2.W"), w2);
    f(std::string("ranker.fc2.b"), b2);
    f(std::string("ranker.fc3.W"), w3);
    f(std::string("ranker.fc3.b"), b3);
    f(std::string("ranker.proj.W"), proj_w);
    f(std::string("ranker.proj.b"), proj_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<RankerParams*>(this)->for_each(
        [&](const std::string& name, Matrix& t) { f(name, static_cast<const Matrix&>(t)); });
  }

  double projection(std::size_t half, std::size_t r) const {
    if (!antisymmetric) return proj_w.data[half * dims.rdim + r];
    return half == 0 ? proj_w.data[r] : -proj_w.data[r];
  }
  double bias() const { return antisymmetric ? 0.0 : proj_b.data[0]; }
};

/// Post-activation values of one branch.
struct BranchTrace {
  std::vector<double> input, a1, a2, a3;
};

inline BranchTrace branch_forward(std::span<const double> h, const RankerParams& p) {
  if (h.size() != p.dims.in) {
    throw invalid_input("ranker input has width " + std::to_string(h.size()) + ", expected " +
                        std::to_string(p.dims.in));
  }
  BranchTrace tr;
  tr.input.assign(h.begin(), h.end());
  auto layer = [](std::span<const double> in, const Matrix& w, const Matrix& b) {
    std::vector<double> out(b.data);
    add_vec_mat(in, w, out);
    for (auto& v : out) v = std::max(0.0, v);
    return out;
  };
  tr.a1 = layer(tr.input, p.w1, p.b1);
  tr.a2 = layer(tr.a1, p.w2, p.b2);
  tr.a3 = layer(tr.a2, p.w3, p.b3);
  return tr;
}

/// Pushes d(loss)/d(a3) back through a branch; adds to grad and d_input.
inline void branch_backward(const BranchTrace& tr, std::vector<double> d_a3,
                            const RankerParams& p, RankerParams& grad,
                            std::span<double> d_input) {
  auto layer_back = [](std::span<const double> in, std::span<const double> out,
                       std::vector<double>& d_out, const Matrix& w, Matrix& gw, Matrix& gb,
                       std::span<double> d_in) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      if (out[c] <= 0.0) d_out[c] = 0.0;
      gb.data[c] += d_out[c];
    }
    add_outer(in, d_out, gw);
    add_mat_vec(w, d_out, d_in);
  };
  std::vector<double> d_a2(p.dims.f2, 0.0), d_a1(p.dims.f1, 0.0);
  layer_back(tr.a2, tr.a3, d_a3, p.w3, grad.w3, grad.b3, d_a2);
  layer_back(tr.a1, tr.a2, d_a2, p.w2, grad.w2, grad.b2, d_a1);
  layer_back(tr.input, tr.a1, d_a1, p.w1, grad.w1, grad.b1, d_input);
}

inline double pair_logit(const BranchTrace& bi, const BranchTrace& bj, const RankerParams& p) {
  double z = p.bias();
  for (std::size_t r = 0; r < p.dims.rdim; ++r) {
    z += p.projection(0, r) * bi.a3[r] + p.projection(1, r) * bj.a3[r];
  }
  return z;
}

struct PairRating {
  NodeId i = 0;
  NodeId j = 0;
  double rating = 0.5;
};

struct PairTrace {
  BranchTrace bi, bj;
  double logit = 0.0;
  double rating = 0.5;
};

/// Rating that the first embedding's node is more important than the second's.
inline double siamese_forward(std::span<const double> hi, std::span<const double> hj,
                              const RankerParams& p, PairTrace* trace = nullptr) {
  if (hi.size() != hj.size()) throw invalid_input("pair embeddings differ in width");
  PairTrace tr;
  tr.bi = branch_forward(hi, p);
  tr.bj = branch_forward(hj, p);
  tr.logit = pair_logit(tr.bi, tr.bj, p);
  tr.rating = sigmoid(tr.logit);
  const double r = tr.rating;
  if (trace) *trace = std::move(tr);
  return r;
}

inline PairRating siamese_forward(NodeId i, NodeId j, std::span<const double> hi,
                                  std::span<const double> hj, const RankerParams& p) {
  return {i, j, siamese_forward(hi, hj, p)};
}

/// Given d(loss)/d(logit), accumulates parameter gradients and the gradients
/// wrt both inputs.
inline void siamese_backward(const PairTrace& tr, double d_logit, const RankerParams& p,
                             RankerParams& grad, std::span<double> d_hi,
                             std::span<double> d_hj) {
  const auto r = p.dims.rdim;
  std::vector<double> d_si(r), d_sj(r);
  for (std::size_t k = 0; k < r; ++k) {
    d_si[k] = d_logit * p.projection(0, k);
    d_sj[k] = d_logit * p.projection(1, k);
    if (p.antisymmetric) {
      grad.proj_w.data[k] += d_logit * (tr.bi.a3[k] - tr.bj.a3[k]);
    } else {
      grad.proj_w.data[k] += d_logit * tr.bi.a3[k];
      grad.proj_w.data[r + k] += d_logit * tr.bj.a3[k];
    }
  }
  if (!p.antisymmetric) grad.proj_b.data[0] += d_logit;
  branch_backward(tr.bi, std::move(d_si), p, grad, d_hi);
  branch_backward(tr.bj, std::move(d_sj), p, grad, d_hj);
}

/// 1 when the first score is strictly greater; ties label 0.
inline int pair_label(double score_i, double score_j) { return score_i > score_j ? 1 : 0; }

inline constexpr double kBceClamp = 1e-12;

inline double bce_term(double rating, int label) {
  const double r = std::clamp(rating, kBceClamp, 1.0 - kBceClamp);
  return label ? -std::log(r) : -std::log(1.0 - r);
}

inline double bce_loss(std::span<const double> ratings, std::span<const int> labels) {
  if (ratings.size() != labels.size()) throw invalid_input("ratings and labels differ in length");
  if (ratings.empty()) throw invalid_input("loss over an empty pair set");
  double total = 0.0;
  for (std::size_t k = 0; k < ratings.size(); ++k) total += bce_term(ratings[k], labels[k]);
  return total / static_cast<double>(ratings.size());
}

/// Ratings over all ordered pairs of a node set: entry (a, b) rates
/// nodes[a] over nodes[b]. Missing entries are NaN.
struct PairwiseRatings {
  std::vector<NodeId> nodes;
  Matrix values;

  explicit PairwiseRatings(std::vector<NodeId> ns)
      : nodes(std::move(ns)),
        values(nodes.size(), nodes.size(), std::numeric_limits<double>::quiet_NaN()) {}
};

struct RankingResult {
  std::vector<NodeId> order;               // descending importance
  std::vector<std::size_t> copeland;       // per entry of order
  std::vector<double> rating_sum;          // per entry of order
  std::vector<std::vector<NodeId>> ties;   // groups only separated by node id
};

/// Copeland aggregation: wins (rating > 0.5), then rating sum, then node id.
inline RankingResult rank_nodes(const PairwiseRatings& ratings) {
  const auto z = ratings.nodes.size();
  std::vector<std::size_t> wins(z, 0);
  std::vector<double> sums(z, 0.0);
  for (std::size_t a = 0; a < z; ++a) {
    for (std::size_t b = 0; b < z; ++b) {
      if (a == b) continue;
      const double r = ratings.values(a, b);
      if (std::isnan(r)) {
        throw invalid_input("missing rating for pair (" + std::to_string(ratings.nodes[a]) +
                            ", " + std::to_string(ratings.nodes[b]) + ")");
      }
      if (r > 0.5) ++wins[a];
      sums[a] += r;
    }
  }
  std::vector<std::size_t> idx(z);
  for (std::size_t a = 0; a < z; ++a) idx[a] = a;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (wins[a] != wins[b]) return wins[a] > wins[b];
    if (sums[a] != sums[b]) return sums[a] > sums[b];
    return ratings.nodes[a] < ratings.nodes[b];
  });
  RankingResult res;
  for (std::size_t k = 0; k < z; ++k) {
    const auto a = idx[k];
    res.order.push_back(ratings.nodes[a]);
    res.copeland.push_back(wins[a]);
    res.rating_sum.push_back(sums[a]);
    const bool same_as_prev =
        k > 0 && wins[idx[k - 1]] == wins[a] && sums[idx[k - 1]] == sums[a];
    if (same_as_prev) {
      if (res.ties.empty() || res.ties.back().back() != ratings.nodes[idx[k - 1]]) {
        res.ties.push_back({ratings.nodes[idx[k - 1]]});
      }
      res.ties.back().push_back(ratings.nodes[a]);
    }
  }
  return res;
}

}  // namespace roadrank
