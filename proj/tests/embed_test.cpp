#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "roadrank/embed.hpp"

namespace roadrank {
namespace {

using testing::random_net;

TEST(InitialEncode, ZeroParametersGiveZeros) {
  const auto p = EmbedParams::zeros({2, 3, 1});
  Matrix features(2, 2, 0.7);
  const std::vector<std::uint32_t> seq{0, 2, 1, 3};
  const auto out = initial_encode(seq, features, p);
  EXPECT_EQ(out.rows, 4u);
  for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(InitialEncode, OneHotThroughIdentity) {
  auto p = EmbedParams::zeros({2, 3, 1});
  p.w(0, 0) = 1.0;
  p.w(1, 1) = 1.0;
  const Matrix features(4, 2, 0.0);
  const std::vector<std::uint32_t> seq{4};  // attribute 0 of a 4-node network
  const auto out = initial_encode(seq, features, p);
  EXPECT_NEAR(out(0, 0), std::tanh(1.0), 1e-15);
  EXPECT_NEAR(out(0, 0), 0.7616, 5e-5);
  EXPECT_EQ(out(0, 1), 0.0);
  EXPECT_THROW(initial_encode(std::vector<std::uint32_t>{6}, features, p), Error);
}

TEST(InitialEncode, NodeRowAndRange) {
  Rng rng(3);
  auto p = EmbedParams::initialized({3, 5, 2}, true, rng);
  for (auto& v : p.w.data) v *= 40.0;  // push towards saturation
  Matrix features(2, 3);
  features(1, 0) = 0.25;
  features(1, 2) = 1.0;
  const auto out = initial_encode(std::vector<std::uint32_t>{1, 3, 0, 4}, features, p);
  for (std::size_t c = 0; c < 5; ++c) {
    const double z = 0.25 * p.w(0, c) + 1.0 * p.w(2, c) + p.b(0, c);
    EXPECT_NEAR(out(0, c), std::tanh(z), 1e-14);
  }
  for (double v : out.data) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Lstm, ZeroParametersGiveZeroStates) {
  const auto p = EmbedParams::zeros({2, 3, 2});
  Matrix xs(4, 3, 0.9);
  const auto h = bilstm_forward(xs, p);
  EXPECT_EQ(h.rows, 4u);
  EXPECT_EQ(h.cols, 4u);
  for (double v : h.data) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, SingleStepHandValues) {
  LstmParams p(1, 1);
  for (std::size_t g = 0; g < 4; ++g) {
    p.wx[g](0, 0) = 0.5;
    p.wh[g](0, 0) = 0.5;
  }
  const Matrix xs(1, 1, 1.0);
  const auto tr = lstm_run(xs, p, false);
  const double gate = 1.0 / (1.0 + std::exp(-0.5));
  EXPECT_NEAR(tr.gates(0, 0), gate, 1e-15);
  EXPECT_NEAR(tr.gates(0, 0), 0.6225, 5e-5);
  EXPECT_NEAR(tr.gates(0, 1), 0.6225, 5e-5);
  EXPECT_NEAR(tr.gates(0, 3), 0.6225, 5e-5);
  EXPECT_NEAR(tr.c(0, 0), 0.2876, 5e-5);
  EXPECT_NEAR(tr.h(0, 0), 0.1743, 5e-5);
}

TEST(Lstm, BackwardHalfIsReversedForwardRun) {
  Rng rng(8);
  const auto p = EmbedParams::initialized({3, 4, 3}, true, rng);
  Matrix xs(5, 4);
  for (auto& v : xs.data) v = rng.uniform(-1, 1);
  const auto out = bilstm_forward(xs, p);

  Matrix rev(5, 4);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t c = 0; c < 4; ++c) rev(t, c) = xs(4 - t, c);
  }
  const auto plain = lstm_run(rev, p.bwd, false);
  const auto fwd = lstm_run(xs, p.fwd, false);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t d = 0; d < 3; ++d) {
      EXPECT_DOUBLE_EQ(out(t, d), fwd.h(t, d));
      EXPECT_DOUBLE_EQ(out(t, 3 + d), plain.h(4 - t, d));
    }
  }
}

TEST(Pooling, Examples) {
  Matrix same(3, 2);
  same(0, 0) = same(1, 0) = same(2, 0) = 0.5;
  same(0, 1) = same(1, 1) = same(2, 1) = -2.0;
  const std::vector<Matrix> one{same};
  EXPECT_EQ(pool_embedding(one), (std::vector<double>{0.5, -2.0, 0.5, -2.0}));

  // num = 2, l = 3, worked by hand:
  // position means: (1.5, 1), (2, -1), (0, 3); tail mean = (1, 1)
  Matrix u(3, 2), w(3, 2);
  u(0, 0) = 1;
  u(0, 1) = 0;
  u(1, 0) = 3;
  u(1, 1) = -1;
  u(2, 0) = 0;
  u(2, 1) = 2;
  w(0, 0) = 2;
  w(0, 1) = 2;
  w(1, 0) = 1;
  w(1, 1) = -1;
  w(2, 0) = 0;
  w(2, 1) = 4;
  const std::vector<Matrix> two{u, w};
  EXPECT_EQ(pool_embedding(two), (std::vector<double>{1.5, 1.0, 1.0, 1.0}));

  EXPECT_THROW(pool_embedding(std::vector<Matrix>{Matrix(1, 2)}), Error);
}

TEST(EmbedDims, HdimMustBeMultipleOfFour) {
  EXPECT_EQ(EmbedDims::from_hdim(5, 8, 8).dim, 2u);
  EXPECT_EQ(EmbedDims::from_hdim(5, 8, 8).hdim(), 8u);
  EXPECT_THROW(EmbedDims::from_hdim(5, 8, 6), Error);
  EXPECT_THROW(EmbedDims::from_hdim(5, 0, 8), Error);
}

TEST(EmbedAll, ZeroParametersAndShape) {
  const auto net = random_net(7, 0.3, 2, 3);
  const NormalizedViews views(net);
  const auto s = sample_walks(net, views, {0.5, 3, 4, 1});
  const auto zero = embed_all(s, net, EmbedParams::zeros(EmbedDims::from_hdim(3, 4, 8)));
  EXPECT_EQ(zero.rows, 7u);
  EXPECT_EQ(zero.cols, 8u);
  for (double v : zero.data) EXPECT_EQ(v, 0.0);
}

TEST(EmbedAll, InvariantToSequenceOrderWithinNode) {
  const auto net = random_net(7, 0.3, 2, 3);
  const NormalizedViews views(net);
  auto s = sample_walks(net, views, {0.5, 4, 4, 1});
  Rng rng(6);
  const auto p = EmbedParams::initialized(EmbedDims::from_hdim(3, 4, 8), true, rng);
  const auto a = embed_all(s, net, p);
  // reverse the sequence order of node 3
  std::vector<std::vector<std::uint32_t>> seqs;
  for (std::size_t q = 0; q < 4; ++q) {
    auto sp = s.sequence(3, q);
    seqs.emplace_back(sp.begin(), sp.end());
  }
  for (std::size_t q = 0; q < 4; ++q) {
    std::copy(seqs[3 - q].begin(), seqs[3 - q].end(), s.sequence(3, q).begin());
  }
  const auto b = embed_all(s, net, p);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(a(3, c), b(3, c), 1e-15);
  for (double v : a.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(EmbedAll, ThreadCountDoesNotChangeResult) {
  const auto net = random_net(20, 0.2, 5, 3);
  const NormalizedViews views(net);
  const auto s = sample_walks(net, views, {0.1, 5, 4, 2});
  Rng rng(1);
  const auto p = EmbedParams::initialized(EmbedDims::from_hdim(3, 8, 8), true, rng);
  EXPECT_EQ(embed_all(s, net, p, 1), embed_all(s, net, p, 3));
}

TEST(MinMaxScale, ConstantColumnsMapToZero) {
  Matrix a(3, 2);
  a(0, 0) = 2;
  a(1, 0) = 4;
  a(2, 0) = 6;
  a(0, 1) = a(1, 1) = a(2, 1) = 5;
  const auto s = minmax_scale(a);
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(1, 0), 0.5);
  EXPECT_EQ(s(2, 0), 1.0);
  EXPECT_EQ(s(1, 1), 0.0);
}

}  // namespace
}  // namespace roadrank
