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

#include "streamstart/costmodel.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "streamstart/error.hpp"

namespace streamstart::costmodel {
namespace {

using kernels::AdapterKind;

LayerSpec linear(std::int64_t d_in, std::int64_t d_out, std::int64_t count = 1) {
  return {.kind = LayerKind::kLinear, .d_in = d_in, .d_out = d_out, .count = count};
}

TEST(CountParams, LinearWithBias) {
  const Stack s = {linear(768, 768)};
  EXPECT_EQ(count_params(s), 590592);
}

TEST(CountParams, LinearWithoutBias) {
  Stack s = {linear(768, 768)};
  s[0].bias = false;
  EXPECT_EQ(count_params(s), 768 * 768);
}

TEST(CountParams, VanillaAdapter) {
  const Stack one = {linear(768, 384), linear(384, 768)};
  EXPECT_EQ(count_params(one), 590976);
  EXPECT_EQ(count_params(adapter_stack(AdapterKind::kVanilla, 768, 384, 24)), 14183424);
  // Against the 180.92 M parameter backbone.
  const double pct = overhead_pct(14183424.0, 180.92e6);
  EXPECT_NEAR(pct, 7.84, 0.005);
}

TEST(CountParams, EmptyStack) {
  EXPECT_EQ(count_params(Stack{}), 0);
  EXPECT_EQ(count_macs(Stack{}, 197), 0);
}

TEST(CountParams, PerKindFormulas) {
  const std::int64_t d = 16, k = 3;
  EXPECT_EQ(count_params(Stack{{.kind = LayerKind::kConv1d, .d_in = d, .kernel_size = k}}),
            k * d * d + d);
  EXPECT_EQ(count_params(Stack{{.kind = LayerKind::kConv1d, .d_in = d, .kernel_size = k,
                                .depthwise = true, .bias = false}}),
            k * d);
  EXPECT_EQ(count_params(Stack{{.kind = LayerKind::kRetentionStep, .d_in = d}}), 3 * d * d);
  EXPECT_EQ(count_params(Stack{{.kind = LayerKind::kLayerNorm, .d_in = d}}), 2 * d);
  EXPECT_EQ(count_params(Stack{{.kind = LayerKind::kAttention, .d_in = d}}), 4 * (d * d + d));
  EXPECT_EQ(count_params(Stack{{.kind = LayerKind::kFoPool, .d_in = d}}), 0);
}

TEST(CountMacs, LinearOver197Tokens) {
  EXPECT_EQ(count_macs(Stack{linear(768, 768)}, 197), 116195328);
}

TEST(CountMacs, PerKindFormulas) {
  const std::int64_t d = 12, k = 3, t = 5;
  EXPECT_EQ(count_macs(Stack{{.kind = LayerKind::kConv1d, .d_in = d, .kernel_size = k}}, t),
            k * d * d * t);
  EXPECT_EQ(count_macs(Stack{{.kind = LayerKind::kConv1d, .d_in = d, .kernel_size = k,
                              .depthwise = true}},
                       t),
            k * d * t);
  EXPECT_EQ(count_macs(Stack{{.kind = LayerKind::kRetentionStep, .d_in = d}}, t),
            3 * d * d * t + 2 * d * d * t);
  EXPECT_EQ(count_macs(Stack{{.kind = LayerKind::kAttention, .d_in = d}}, t),
            2 * t * t * d + 4 * t * d * d);
}

TEST(CountMacs, RejectsBadInput) {
  EXPECT_THROW(count_macs(Stack{linear(4, 4)}, 0), ConfigError);
  EXPECT_THROW(count_params(Stack{linear(0, 4)}), ConfigError);
  EXPECT_THROW(count_params(Stack{linear(4, 0)}), ConfigError);
  Stack s = {linear(4, 4)};
  s[0].count = -1;
  EXPECT_THROW(count_params(s), ConfigError);
}

Stack random_stack(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 6), dim(1, 64), n(0, 4), k(1, 5), coin(0, 1);
  Stack s;
  const int len = std::uniform_int_distribution<int>(0, 6)(rng);
  for (int i = 0; i < len; ++i) {
    LayerSpec l;
    l.kind = LayerKind(kind(rng));
    l.d_in = dim(rng);
    l.d_out = dim(rng);
    l.kernel_size = k(rng);
    l.depthwise = coin(rng);
    l.bias = coin(rng);
    l.count = n(rng);
    s.push_back(l);
  }
  return s;
}

TEST(CostProperties, AdditiveOverConcatenationAndLinearInCount) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Stack a = random_stack(rng), b = random_stack(rng);
    const std::int64_t t = std::uniform_int_distribution<int>(1, 200)(rng);
    Stack ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    EXPECT_EQ(count_macs(ab, t), count_macs(a, t) + count_macs(b, t));
    EXPECT_EQ(count_params(ab), count_params(a) + count_params(b));

    Stack tripled = a;
    for (auto& l : tripled) l.count *= 3;
    EXPECT_EQ(count_macs(tripled, t), 3 * count_macs(a, t));
    EXPECT_EQ(count_params(tripled), 3 * count_params(a));

    const CostReport r = make_report("r", ab, t);
    EXPECT_EQ(r.flops_per_frame, 2 * r.macs_per_frame);
  }
}

TEST(CostReport, JsonAndBaseline) {
  const CostReport base = make_report("backbone", vit_backbone_stack(), 197);
  const CostReport ad =
      with_baseline(make_report("adapter", adapter_stack(AdapterKind::kVanilla, 768, 384, 24), 197),
                    base);
  EXPECT_EQ(ad.baseline, "backbone");
  EXPECT_DOUBLE_EQ(ad.mac_overhead_pct, 100.0 * double(ad.macs_per_frame) / double(base.macs_per_frame));
  const auto j = ad.to_json();
  EXPECT_EQ(j.at("flops_per_frame").get<std::int64_t>(), 2 * ad.macs_per_frame);
  EXPECT_EQ(j.at("baseline"), "backbone");
  EXPECT_FALSE(base.to_json().contains("baseline"));
  EXPECT_THROW(overhead_pct(1.0, 0.0), ConfigError);
}

// Hand count of a 12-block, d=768, 197-token pre-norm encoder.
std::int64_t hand_encoder_macs() {
  const std::int64_t t = 197, d = 768, h = 4 * d;
  std::int64_t per_block = 0;
  per_block += 2 * (2 * t * d);                 // two layernorms
  per_block += 2 * t * t * d + 4 * t * d * d;   // attention
  per_block += t * d * h + t * h + t * h * d;   // MLP with activation
  return t * 768 * d + 12 * per_block + 2 * t * d;
}

TEST(EncoderOverhead, AdapterMacsInBand) {
  const std::int64_t backbone = count_macs(vit_backbone_stack(12, 768, 768, 4), 197);
  EXPECT_EQ(backbone, hand_encoder_macs());
  for (AdapterKind kind : {AdapterKind::kVanilla, AdapterKind::kStConv}) {
    const std::int64_t adapters = count_macs(adapter_stack(kind, 768, 384, 24, 3, true), 197);
    const double pct = overhead_pct(double(adapters), double(backbone));
    EXPECT_GT(pct, 11.0) << kernels::to_string(kind);
    EXPECT_LT(pct, 16.0) << kernels::to_string(kind);
  }
}

TEST(SlidingWindow, Overheads) {
  EXPECT_EQ(sliding_window_overhead(1000, 4), 300.0);
  EXPECT_EQ(sliding_window_overhead(1000, 1), 0.0);
  EXPECT_EQ(sliding_window_overhead(1000, 8), 700.0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t macs = std::uniform_int_distribution<std::int64_t>(1, 1'000'000'000)(rng);
    const std::int64_t w = std::uniform_int_distribution<std::int64_t>(1, 64)(rng);
    EXPECT_EQ(sliding_window_overhead(macs, w), double(w - 1) * 100.0);
  }
  EXPECT_THROW(sliding_window_overhead(1000, 0), ConfigError);
}

class AdapterStackTest : public ::testing::TestWithParam<AdapterKind> {};

TEST_P(AdapterStackTest, ParamsMatchModel) {
  for (bool depthwise : {false, true}) {
    kernels::AdapterConfig c;
    c.kind = GetParam();
    c.d = 24;
    c.d_prime = 8;
    c.kernel_size = 3;
    c.lookback = 2;
    c.depthwise = depthwise;
    const kernels::AdapterParams p = kernels::init_params(c, 1);
    EXPECT_EQ(count_params(adapter_stack(c.kind, 24, 8, 1, 3, depthwise)),
              std::int64_t(p.parameter_count()))
        << "depthwise=" << depthwise;
  }
}

TEST_P(AdapterStackTest, DetectorStackCountsTwoPerBlock) {
  detector::DetectorConfig cfg;
  cfg.adapter.kind = GetParam();
  cfg.adapter.d = 16;
  cfg.adapter.d_prime = 8;
  cfg.d_in = 16;
  cfg.n_blocks = 3;
  cfg.mlp_hidden = 32;
  const detector::DetectorModel m = detector::DetectorModel::create(cfg, 2);
  std::int64_t trainable = 0;
  m.for_each_trainable([&](const std::string&, std::span<const double> s) {
    trainable += std::int64_t(s.size());
  });
  EXPECT_EQ(count_params(detector_adapter_stack(cfg)), trainable);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, AdapterStackTest,
                         ::testing::Values(AdapterKind::kVanilla, AdapterKind::kStConv,
                                           AdapterKind::kQrnn, AdapterKind::kRetention),
                         [](const auto& info) { return kernels::to_string(info.param); });

TEST(BenchLatency, ShapesAndConstantStepCost) {
  detector::DetectorConfig cfg;
  cfg.adapter.kind = AdapterKind::kQrnn;
  cfg.adapter.d = 16;
  cfg.adapter.d_prime = 8;
  cfg.d_in = 16;
  cfg.n_blocks = 2;
  cfg.mlp_hidden = 32;
  const detector::DetectorModel m = detector::DetectorModel::create(cfg, 4);
  LatencyOptions o;
  o.stream_length = 300;
  o.repetitions = 2;
  o.probes = {10, 200, 1000};
  const LatencyReport r = bench_latency(m, o);
  ASSERT_EQ(r.streaming.size(), 2u);
  ASSERT_EQ(r.sliding.size(), 2u);
  ASSERT_EQ(r.probe_median_ns.size(), 3u);
  EXPECT_FALSE(std::isnan(r.probe_median_ns[0]));
  EXPECT_TRUE(std::isnan(r.probe_median_ns[2]));
  EXPECT_EQ(r.probe_macs[0], r.probe_macs[1]);
  EXPECT_GT(r.probe_macs[0], 0);
  EXPECT_GT(r.timer_resolution_ns, 0.0);
  for (const auto& s : r.streaming) {
    EXPECT_LE(s.p50_ns, s.p99_ns);
    EXPECT_GT(s.total_ns, 0.0);
  }
  const auto j = r.to_json();
  EXPECT_TRUE(j.at("probes")[2].at("median_ns").is_null());
  EXPECT_EQ(j.at("repetitions"), 2);

  o.window = 0;
  EXPECT_THROW(bench_latency(m, o), ConfigError);
}

}  // namespace
}  // namespace streamstart::costmodel
