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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamstart/detector.hpp"
#include "streamstart/kernels.hpp"

namespace streamstart::costmodel {

enum class LayerKind {
  kLinear,
  kAttention,
  kConv1d,
  kFoPool,
  kRetentionStep,
  kLayerNorm,
  kPointwise,
};

std::string to_string(LayerKind kind);

// One layer type repeated `count` times. Widths follow the kind: linear uses
// d_in -> d_out, every other kind uses d_in as its width.
struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  std::int64_t d_in = 0;
  std::int64_t d_out = 0;
  std::int64_t kernel_size = 1;  // conv1d
  bool depthwise = false;        // conv1d
  bool bias = true;              // linear, conv1d
  std::int64_t count = 1;

  // Throws ConfigError on nonpositive dimensions.
  void validate() const;
};

using Stack = std::vector<LayerSpec>;

std::int64_t count_params(std::span<const LayerSpec> stack);
// Multiply-accumulates to process one frame of `tokens` tokens.
std::int64_t count_macs(std::span<const LayerSpec> stack, std::int64_t tokens);

struct CostReport {
  std::string name;
  std::int64_t tokens = 0;
  std::int64_t params = 0;
  std::int64_t macs_per_frame = 0;
  std::int64_t flops_per_frame = 0;  // always 2 * macs_per_frame
  std::optional<std::string> baseline;
  double param_overhead_pct = 0.0;
  double mac_overhead_pct = 0.0;

  nlohmann::json to_json() const;
};

CostReport make_report(const std::string& name, std::span<const LayerSpec> stack,
                       std::int64_t tokens);
// Fills the overhead fields of `report` relative to `baseline`.
CostReport with_baseline(CostReport report, const CostReport& baseline);

double overhead_pct(double extra, double baseline);

// ((w * macs) - macs) / macs * 100, which is exactly (w - 1) * 100.
double sliding_window_overhead(std::int64_t backbone_macs_per_frame, std::int64_t window);

// Approximate ViT encoder: patch embedding plus `blocks` pre-norm blocks of
// attention and a 4x MLP.
Stack vit_backbone_stack(std::int64_t blocks = 12, std::int64_t d = 768,
                         std::int64_t patch_dim = 768, std::int64_t mlp_ratio = 4);

// `insertions` adapters of one kind (down, core, up).
Stack adapter_stack(kernels::AdapterKind kind, std::int64_t d, std::int64_t d_prime,
                    std::int64_t insertions, std::int64_t kernel_size = 3,
                    bool depthwise = false);

// Stack matching a detector model's adapters (two per block, one token).
Stack detector_adapter_stack(const detector::DetectorConfig& config);

struct LatencyOptions {
  std::int64_t stream_length = 1000;
  int repetitions = 3;
  std::int64_t warmup = 10;
  std::int64_t window = 4;        // sliding-window comparator
  std::int64_t probe_span = 50;   // frames per windowed median
  std::vector<std::int64_t> probes = {10, 1000};
  std::uint64_t seed = 0;
};

struct TimingStats {
  double mean_ns = 0.0;
  double p50_ns = 0.0;
  double p99_ns = 0.0;
  double total_ns = 0.0;
};

struct LatencyReport {
  LatencyOptions options;
  double timer_resolution_ns = 0.0;
  std::vector<TimingStats> streaming;  // one entry per repetition
  std::vector<TimingStats> sliding;
  // Median per-frame streaming time over [probe, probe + probe_span), pooled
  // across repetitions; NaN when the probe lies past the stream.
  std::vector<double> probe_median_ns;
  // Adapter multiply-adds at each probe frame, from the step counter.
  std::vector<std::int64_t> probe_macs;

  double streaming_total_mean() const;
  double sliding_total_mean() const;
  nlohmann::json to_json() const;
};

// Streams random frames through `model` one at a time, then re-runs the
// sliding-window comparator (fresh states over the last `window` frames on
// every arrival) on the same weights. Single-threaded.
LatencyReport bench_latency(const detector::DetectorModel& model, const LatencyOptions& options);

}  // namespace streamstart::costmodel
