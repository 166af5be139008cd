// Copyright 2026 The StreamStart Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "streamstart/kernels.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kernel_oracles.hpp"
#include "streamstart/error.hpp"
#include "test_util.hpp"

namespace streamstart::kernels {
namespace {

using testing::bit_equal;
using testing::max_abs_diff;
using testing::random_matrix;

TEST(ReceptiveField, Formula) {
  EXPECT_EQ(receptive_field(1, 3), 3);
  EXPECT_EQ(receptive_field(2, 3), 5);
  EXPECT_EQ(receptive_field(12, 2), 13);
  EXPECT_THROW(receptive_field(0, 3), ConfigError);
}

TEST(CausalConv, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int k = 1 + int(seed % 4);
    const int width = 1 + int(seed % 5);
    const bool depthwise = seed % 2 == 0;
    const Eigen::MatrixXd x = random_matrix(3 + seed % 9, width, seed);
    const Eigen::MatrixXd w = random_matrix(depthwise ? k : k * width, width, seed + 100);
    for (int lookback = 0; lookback < k; ++lookback) {
      const int lookahead = k - 1 - lookback;
      const Sequence y = causal_conv(x, w, k, lookback, lookahead, depthwise, ConvMode::kOffline);
      EXPECT_LT(max_abs_diff(y, testing::oracle_conv(x, w, k, lookback, depthwise)), 1e-13);
    }
  }
}

TEST(CausalConv, HandExample) {
  // k=2, width 1, W[0]=1 (previous frame), W[1]=10 (current frame).
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  Eigen::MatrixXd w(2, 1);
  w << 1, 10;
  const Sequence y = causal_conv(x, w, 2, 1, 0);
  EXPECT_EQ(y(0, 0), 10.0);
  EXPECT_EQ(y(1, 0), 21.0);
  EXPECT_EQ(y(2, 0), 32.0);
}

TEST(CausalConv, RejectsLookaheadWhenStreaming) {
  const Eigen::MatrixXd x = random_matrix(4, 2, 1);
  const Eigen::MatrixXd w = random_matrix(6, 2, 2);
  EXPECT_THROW(causal_conv(x, w, 3, 1, 1), ConfigError);
  EXPECT_NO_THROW(causal_conv(x, w, 3, 1, 1, false, ConvMode::kOffline));
  EXPECT_THROW(causal_conv(x, w, 3, 1, 0), ConfigError);
  EXPECT_THROW(causal_conv(x, random_matrix(5, 2, 3), 3, 2, 0), ConfigError);
}

TEST(CausalConv, ChunkedStepEqualsWholeSequence) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int k = 1 + int(seed % 4);
    const bool depthwise = seed % 3 == 0;
    const Eigen::MatrixXd x = random_matrix(17, 3, seed);
    const Eigen::MatrixXd w = random_matrix(depthwise ? k : 3 * k, 3, seed + 7);
    const Sequence whole = causal_conv(x, w, k, k - 1, 0, depthwise);
    Eigen::MatrixXd history = Eigen::MatrixXd::Zero(k - 1, 3);
    Sequence pieces(17, 3);
    Eigen::Index at = 0;
    for (Eigen::Index len : {1, 4, 2, 7, 3}) {
      pieces.middleRows(at, len) = causal_conv_step(x.middleRows(at, len), w, k, depthwise, history);
      at += len;
    }
    EXPECT_LT(max_abs_diff(whole, pieces), 1e-13);
  }
}

TEST(FoPool, ExtremeGates) {
  const Eigen::MatrixXd s = random_matrix(5, 3, 1);
  const Row h0 = random_matrix(1, 3, 2);
  const FoPoolResult copy = fo_pool(s, Eigen::MatrixXd::Zero(5, 3), h0);
  EXPECT_EQ(copy.h, s);
  const FoPoolResult hold = fo_pool(s, Eigen::MatrixXd::Ones(5, 3), h0);
  for (int t = 0; t < 5; ++t) EXPECT_EQ(hold.h.row(t), h0);
}

TEST(FoPool, HandExample) {
  Eigen::MatrixXd s(2, 1), f(2, 1);
  s << 1, 3;
  f << 0.5, 0.25;
  const FoPoolResult r = fo_pool(s, f, Row::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(r.h(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(r.h(1, 0), 0.25 * 1.5 + 0.75 * 3);
  EXPECT_EQ(r.last(0), r.h(1, 0));
}

TEST(FoPool, RejectsGatesOutsideUnitInterval) {
  const Eigen::MatrixXd s = random_matrix(2, 2, 1);
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(2, 2, 0.5);
  f(1, 0) = 1.5;
  EXPECT_THROW(fo_pool(s, f, Row::Zero(2)), NumericError);
  f(1, 0) = NAN;
  EXPECT_THROW(fo_pool(s, f, Row::Zero(2)), NumericError);
}

TEST(FoPool, MatchesOracleAndContracts) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> gate(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Eigen::MatrixXd s = random_matrix(12, 4, seed, 3.0);
    Eigen::MatrixXd f(12, 4);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = gate(rng);
    const Row h0 = random_matrix(1, 4, seed + 1000, 3.0);
    const FoPoolResult r = fo_pool(s, f, h0);
    EXPECT_LT(max_abs_diff(r.h, testing::oracle_fo_pool(s, f, h0)), 1e-14);
    const double bound = std::max(h0.cwiseAbs().maxCoeff(), s.cwiseAbs().maxCoeff());
    EXPECT_LE(r.h.cwiseAbs().maxCoeff(), bound + 1e-12);
  }
}

TEST(RotatePositions, PreservesPairNormsAndLeavesOddChannel) {
  const Eigen::MatrixXd x = random_matrix(6, 5, 9);
  const Sequence r = rotate_positions(x, 0.7, 3);
  for (int i = 0; i < 6; ++i) {
    for (int p = 0; p < 2; ++p) {
      EXPECT_NEAR(std::hypot(r(i, 2 * p), r(i, 2 * p + 1)),
                  std::hypot(x(i, 2 * p), x(i, 2 * p + 1)), 1e-14);
    }
    EXPECT_EQ(r(i, 4), x(i, 4));
  }
  EXPECT_EQ(rotate_positions(x.topRows(1), 0.7, 0), x.topRows(1));
}

AdapterConfig retention_config(int d, int dp) {
  AdapterConfig c = testing::tiny_config(AdapterKind::kRetention, d, dp);
  return c;
}

TEST(Retention, ParallelMatchesComplexOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AdapterConfig c = retention_config(6, 1 + int(seed % 6));
    AdapterParams p = init_params(c, seed);
    const Eigen::MatrixXd x = random_matrix(1 + seed % 20, c.d_prime, seed + 50);
    EXPECT_LT(max_abs_diff(retention_parallel(x, p, c),
                           testing::oracle_retention(x, p, c.gamma, c.theta)),
              1e-12);
  }
}

TEST(Retention, RecurrentMatchesParallel) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const AdapterConfig c = retention_config(16, 1 + int(seed % 16));
    const AdapterParams p = init_params(c, seed);
    const Eigen::MatrixXd x = random_matrix(1 + (seed * 7) % 64, c.d_prime, seed + 1);
    const Sequence par = retention_parallel(x, p, c);
    StreamState st = StreamState::fresh(c);
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
      const Row out = retention_recurrent(x.row(n), p, c, st);
      EXPECT_LE((out - par.row(n)).cwiseAbs().maxCoeff(), 1e-10) << n;
    }
    EXPECT_EQ(st.position, x.rows());
  }
}

TEST(Retention, ChunkMatchesRecurrent) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    AdapterConfig c = retention_config(8, 1 + int(seed % 8));
    c.parallel_cap = 1 + int(seed % 5);
    const AdapterParams p = init_params(c, seed);
    const Eigen::MatrixXd x = random_matrix(23, c.d_prime, seed + 1);
    StreamState rec = StreamState::fresh(c);
    Sequence expected(23, c.d_prime);
    for (Eigen::Index n = 0; n < 23; ++n) expected.row(n) = retention_recurrent(x.row(n), p, c, rec);
    StreamState chunked = StreamState::fresh(c);
    Sequence got(23, c.d_prime);
    Eigen::Index at = 0;
    for (Eigen::Index len : {3, 1, 8, 11}) {
      got.middleRows(at, len) = retention_chunk(x.middleRows(at, len), p, c, chunked);
      at += len;
    }
    EXPECT_LE(max_abs_diff(got, expected), 1e-10);
    EXPECT_LE(max_abs_diff(chunked.retention, rec.retention), 1e-10);
  }
}

TEST(Retention, DependsOnRelativePositionOnly) {
  const AdapterConfig c = retention_config(6, 6);
  const AdapterParams p = init_params(c, 4);
  const Eigen::MatrixXd x = random_matrix(10, 6, 5);
  EXPECT_LT(max_abs_diff(retention_parallel(x, p, c, 0), retention_parallel(x, p, c, 37)), 1e-12);
}

TEST(Retention, ParallelCapIsEnforced) {
  AdapterConfig c = retention_config(4, 4);
  c.parallel_cap = 8;
  const AdapterParams p = init_params(c, 1);
  EXPECT_THROW(retention_parallel(random_matrix(9, 4, 1), p, c), ConfigError);
  EXPECT_NO_THROW(retention_parallel(random_matrix(8, 4, 1), p, c));
}

TEST(AdapterConfig, ValidationAndSizing) {
  AdapterConfig c = testing::tiny_config(AdapterKind::kStConv);
  c.lookback = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = testing::tiny_config(AdapterKind::kRetention);
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = testing::tiny_config(AdapterKind::kVanilla, 8, 9);
  EXPECT_THROW(c.validate(), ConfigError);

  const int d = 64;
  const AdapterConfig st = AdapterConfig::make(AdapterKind::kStConv, d);
  EXPECT_EQ(st.d_prime, 32);
  const double target = double(init_params(st, 0).parameter_count());
  for (AdapterKind kind : {AdapterKind::kVanilla, AdapterKind::kQrnn, AdapterKind::kRetention}) {
    const AdapterConfig c2 = AdapterConfig::make(kind, d);
    const double count = double(init_params(c2, 0).parameter_count());
    EXPECT_LT(std::abs(count - target) / target, 0.05) << to_string(kind);
  }
}

TEST(AdapterInit, ZeroUpProjectionAndForgetBias) {
  for (AdapterKind kind : testing::kAllKinds) {
    const AdapterConfig c = testing::tiny_config(kind);
    const AdapterParams p = init_params(c, 3);
    EXPECT_TRUE((p.up_w.array() == 0.0).all());
    EXPECT_TRUE((p.up_b.array() == 0.0).all());
    if (kind == AdapterKind::kQrnn) {
      EXPECT_TRUE((p.conv_f_b.array() == -5.0).all());
      EXPECT_EQ(p.conv_s.rows(), 3 * 4);
    }
  }
}

TEST(Adapter, IdentityAtInitBitwise) {
  for (AdapterKind kind : testing::kAllKinds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const AdapterConfig c = testing::tiny_config(kind, 10, 5);
      const AdapterParams p = init_params(c, seed);
      const Eigen::MatrixXd x = random_matrix(13, 10, seed + 1);
      StreamState st = StreamState::fresh(c);
      EXPECT_TRUE(bit_equal(adapter_forward(x, p, c, st), x)) << to_string(kind);
      EXPECT_TRUE(bit_equal(adapter_forward_offline(x, p, c), x)) << to_string(kind);
    }
  }
}

TEST(Adapter, ChunkedStreamingEqualsSinglePass) {
  for (AdapterKind kind : testing::kAllKinds) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto tc = testing::random_kernel_case(seed, kind);
      const Sequence whole = adapter_forward_offline(tc.x, tc.params, tc.config);
      StreamState st = StreamState::fresh(tc.config);
      Sequence pieces(tc.x.rows(), tc.x.cols());
      Eigen::Index at = 0;
      for (Eigen::Index len : tc.cuts) {
        pieces.middleRows(at, len) = adapter_forward(tc.x.middleRows(at, len), tc.params, tc.config, st);
        at += len;
      }
      EXPECT_LE(max_abs_diff(whole, pieces), 1e-10) << to_string(kind) << " seed " << seed;
      EXPECT_EQ(st.position, tc.x.rows());
    }
  }
}

TEST(Adapter, FutureFramesDoNotChangePastOutputs) {
  for (AdapterKind kind : testing::kAllKinds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto tc = testing::random_kernel_case(seed, kind);
      if (tc.x.rows() < 2) continue;
      const Eigen::Index t = tc.x.rows() / 2;
      Eigen::MatrixXd y = tc.x;
      y.bottomRows(tc.x.rows() - t - 1) = random_matrix(tc.x.rows() - t - 1, tc.x.cols(), seed + 99, 5.0);
      const Sequence a = adapter_forward_offline(tc.x, tc.params, tc.config);
      const Sequence b = adapter_forward_offline(y, tc.params, tc.config);
      EXPECT_TRUE(bit_equal(a.topRows(t + 1), b.topRows(t + 1))) << to_string(kind);
    }
  }
}

TEST(Adapter, LookaheadIsOfflineOnly) {
  AdapterConfig c = testing::tiny_config(AdapterKind::kStConv);
  c.lookback = 1;
  c.lookahead = 1;
  AdapterParams p = init_params(c, 1);
  testing::randomize(p, 2);
  const Eigen::MatrixXd x = random_matrix(6, c.d, 3);
  StreamState st = StreamState::fresh(c);
  EXPECT_THROW(adapter_forward(x, p, c, st), ConfigError);
  // Centered conv: frame 2 sees frame 3.
  Eigen::MatrixXd y = x;
  y.row(3) *= 2.0;
  const Sequence a = adapter_forward_offline(x, p, c);
  const Sequence b = adapter_forward_offline(y, p, c);
  EXPECT_GT((a.row(2) - b.row(2)).norm(), 0.0);
}

TEST(Adapter, StateOfAnotherKindIsRejected) {
  const AdapterConfig q = testing::tiny_config(AdapterKind::kQrnn);
  StreamState st = StreamState::fresh(testing::tiny_config(AdapterKind::kRetention));
  EXPECT_THROW(adapter_forward(random_matrix(2, q.d, 1), init_params(q, 1), q, st), ConfigError);
}

TEST(Adapter, StepCostIsIndependentOfPosition) {
  for (AdapterKind kind : testing::kAllKinds) {
    const AdapterConfig c = testing::tiny_config(kind, 8, 4);
    const AdapterParams p = init_params(c, 1);
    StreamState st = StreamState::fresh(c);
    const Eigen::MatrixXd x = random_matrix(300, 8, 2);
    std::int64_t first = -1;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      adapter_forward(x.row(t), p, c, st);
      if (first < 0) first = st.last_macs;
      ASSERT_EQ(st.last_macs, first) << to_string(kind) << " t=" << t;
    }
    EXPECT_GT(first, 0);
  }
}

TEST(Adapter, VanillaUsesExactGelu) {
  EXPECT_DOUBLE_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    EXPECT_NEAR(gelu_grad(x), (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6, 1e-8);
  }
}

BlockParams random_block(const AdapterConfig& c, std::uint64_t seed) {
  BlockParams b = init_block(c, 2 * c.d, 0.5, seed, seed + 1);
  testing::randomize(b.temporal, seed + 2);
  testing::randomize(b.pre_mlp, seed + 3);
  return b;
}

TEST(Block, IdentityWhenFrozenBranchesAreZero) {
  for (AdapterKind kind : testing::kAllKinds) {
    const AdapterConfig c = testing::tiny_config(kind);
    BlockParams b = init_block(c, 16, 0.5, 1, 2);
    b.spatial_w.setZero();
    b.mlp_w1.setZero();
    b.mlp_w2.setZero();
    const Eigen::MatrixXd x = random_matrix(9, c.d, 3);
    EXPECT_TRUE(bit_equal(block_forward_offline(x, b, c), x)) << to_string(kind);
  }
}

TEST(Block, OrderingMatchesDefinition) {
  const AdapterConfig c = testing::tiny_config(AdapterKind::kVanilla);
  const BlockParams b = random_block(c, 5);
  const Eigen::MatrixXd x = random_matrix(4, c.d, 6);
  const Sequence a = adapter_forward_offline(x, b.temporal, c);
  const Sequence y = x + a * b.spatial_w;
  const Sequence t2 = adapter_forward_offline(y, b.pre_mlp, c);
  Sequence hidden = (t2 * b.mlp_w1).rowwise() + b.mlp_b1;
  hidden = hidden.unaryExpr(&gelu);
  const Sequence expected = y + ((hidden * b.mlp_w2).rowwise() + b.mlp_b2);
  EXPECT_LT(max_abs_diff(block_forward_offline(x, b, c), expected), 1e-13);
}

TEST(Block, StreamingEqualsBatch) {
  for (AdapterKind kind : testing::kAllKinds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto tc = testing::random_kernel_case(seed, kind);
      const BlockParams b = random_block(tc.config, seed);
      const Sequence whole = block_forward_offline(tc.x, b, tc.config);
      BlockState st = BlockState::fresh(tc.config);
      Sequence pieces(tc.x.rows(), tc.x.cols());
      Eigen::Index at = 0;
      for (Eigen::Index len : tc.cuts) {
        pieces.middleRows(at, len) = block_forward(tc.x.middleRows(at, len), b, tc.config, st);
        at += len;
      }
      const double scale = std::max(1.0, whole.cwiseAbs().maxCoeff());
      EXPECT_LE(max_abs_diff(whole, pieces), 1e-12 * scale) << to_string(kind);
    }
  }
}

// Each block holds two temporal adapters, so M blocks stack 2M convolutions.
TEST(Block, StackedConvReceptiveField) {
  const int k = 2;
  for (int m = 1; m <= 4; ++m) {
    const AdapterConfig c = testing::tiny_config(AdapterKind::kStConv, 6, 3, k);
    std::vector<BlockParams> blocks;
    for (int i = 0; i < m; ++i) blocks.push_back(random_block(c, 10 * i + 1));
    auto run = [&](const Eigen::MatrixXd& x) {
      Sequence h = x;
      for (const auto& b : blocks) h = block_forward_offline(h, b, c);
      return h;
    };
    const Eigen::MatrixXd x = random_matrix(30, 6, 7);
    const Sequence base = run(x);
    const Eigen::Index t = 25;
    const std::int64_t rf = receptive_field(2 * m, k);
    Eigen::MatrixXd outside = x;
    outside.row(t - rf) += Row::Constant(6, 3.0);
    for (Eigen::Index r = 0; r < t - rf; ++r) outside.row(r) *= -2.0;
    EXPECT_TRUE(bit_equal(run(outside).row(t), base.row(t))) << "M=" << m;
    Eigen::MatrixXd inside = x;
    inside.row(t - rf + 1) += Row::Constant(6, 3.0);
    EXPECT_GT((run(inside).row(t) - base.row(t)).norm(), 0.0) << "M=" << m;
  }
}

}  // namespace
}  // namespace streamstart::kernels
