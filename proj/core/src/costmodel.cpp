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

#include <fmt/format.h>

#include "streamstart/error.hpp"

namespace streamstart::costmodel {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kAttention: return "attention";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kFoPool: return "fo_pool";
    case LayerKind::kRetentionStep: return "retention_step";
    case LayerKind::kLayerNorm: return "layernorm";
    case LayerKind::kPointwise: return "pointwise";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  if (d_in < 1) throw ConfigError(fmt::format("{}: d_in must be >= 1", to_string(kind)));
  if (kind == LayerKind::kLinear && d_out < 1) throw ConfigError("linear: d_out must be >= 1");
  if (kernel_size < 1) throw ConfigError("conv1d: kernel_size must be >= 1");
  if (count < 0) throw ConfigError("count must be >= 0");
}

namespace {

std::int64_t layer_params(const LayerSpec& l) {
  const std::int64_t d = l.d_in;
  switch (l.kind) {
    case LayerKind::kLinear: return d * l.d_out + (l.bias ? l.d_out : 0);
    case LayerKind::kAttention: return 4 * (d * d + d);
    case LayerKind::kConv1d:
      return (l.depthwise ? l.kernel_size * d : l.kernel_size * d * d) + (l.bias ? d : 0);
    case LayerKind::kRetentionStep: return 3 * d * d;
    case LayerKind::kLayerNorm: return 2 * d;
    case LayerKind::kFoPool:
    case LayerKind::kPointwise: return 0;
  }
  return 0;
}

std::int64_t layer_macs(const LayerSpec& l, std::int64_t t) {
  const std::int64_t d = l.d_in;
  switch (l.kind) {
    case LayerKind::kLinear: return t * d * l.d_out;
    // QK^T and AV, plus the four d x d projections.
    case LayerKind::kAttention: return 2 * t * t * d + 4 * t * d * d;
    case LayerKind::kConv1d: return l.depthwise ? l.kernel_size * d * t : l.kernel_size * d * d * t;
    case LayerKind::kFoPool: return 2 * t * d;
    // Q, K, V projections, then the state update and the readout.
    case LayerKind::kRetentionStep: return 5 * d * d * t;
    case LayerKind::kLayerNorm: return 2 * t * d;
    case LayerKind::kPointwise: return t * d;
  }
  return 0;
}

}  // namespace

std::int64_t count_params(std::span<const LayerSpec> stack) {
  std::int64_t n = 0;
  for (const LayerSpec& l : stack) {
    l.validate();
    n += l.count * layer_params(l);
  }
  return n;
}

std::int64_t count_macs(std::span<const LayerSpec> stack, std::int64_t tokens) {
  if (tokens < 1) throw ConfigError("tokens must be >= 1");
  std::int64_t n = 0;
  for (const LayerSpec& l : stack) {
    l.validate();
    n += l.count * layer_macs(l, tokens);
  }
  return n;
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json j = {{"name", name},
                      {"tokens", tokens},
                      {"params", params},
                      {"macs_per_frame", macs_per_frame},
                      {"flops_per_frame", flops_per_frame}};
  if (baseline) {
    j["baseline"] = *baseline;
    j["param_overhead_pct"] = param_overhead_pct;
    j["mac_overhead_pct"] = mac_overhead_pct;
  }
  return j;
}

CostReport make_report(const std::string& name, std::span<const LayerSpec> stack,
                       std::int64_t tokens) {
  CostReport r;
  r.name = name;
  r.tokens = tokens;
  r.params = count_params(stack);
  r.macs_per_frame = count_macs(stack, tokens);
  r.flops_per_frame = 2 * r.macs_per_frame;
  return r;
}

double overhead_pct(double extra, double baseline) {
  if (!(baseline > 0.0)) throw ConfigError("baseline must be > 0");
  return 100.0 * extra / baseline;
}

CostReport with_baseline(CostReport report, const CostReport& baseline) {
  report.baseline = baseline.name;
  report.param_overhead_pct = overhead_pct(double(report.params), double(baseline.params));
  report.mac_overhead_pct =
      overhead_pct(double(report.macs_per_frame), double(baseline.macs_per_frame));
  return report;
}

double sliding_window_overhead(std::int64_t backbone_macs_per_frame, std::int64_t window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  if (backbone_macs_per_frame < 1) throw ConfigError("backbone MACs must be >= 1");
  const double base = double(backbone_macs_per_frame);
  return (double(window) * base - base) / base * 100.0;
}

Stack vit_backbone_stack(std::int64_t blocks, std::int64_t d, std::int64_t patch_dim,
                         std::int64_t mlp_ratio) {
  return {
      {.kind = LayerKind::kLinear, .d_in = patch_dim, .d_out = d},
      {.kind = LayerKind::kLayerNorm, .d_in = d, .count = 2 * blocks},
      {.kind = LayerKind::kAttention, .d_in = d, .count = blocks},
      {.kind = LayerKind::kLinear, .d_in = d, .d_out = mlp_ratio * d, .count = blocks},
      {.kind = LayerKind::kPointwise, .d_in = mlp_ratio * d, .count = blocks},
      {.kind = LayerKind::kLinear, .d_in = mlp_ratio * d, .d_out = d, .count = blocks},
      {.kind = LayerKind::kLayerNorm, .d_in = d},
  };
}

Stack adapter_stack(kernels::AdapterKind kind, std::int64_t d, std::int64_t d_prime,
                    std::int64_t insertions, std::int64_t kernel_size, bool depthwise) {
  using kernels::AdapterKind;
  const std::int64_t n = insertions;
  Stack s = {
      {.kind = LayerKind::kLinear, .d_in = d, .d_out = d_prime, .count = n},
      {.kind = LayerKind::kLinear, .d_in = d_prime, .d_out = d, .count = n},
  };
  switch (kind) {
    case AdapterKind::kVanilla:
      s.push_back({.kind = LayerKind::kPointwise, .d_in = d_prime, .count = n});
      break;
    case AdapterKind::kStConv:
      s.push_back({.kind = LayerKind::kConv1d, .d_in = d_prime, .kernel_size = kernel_size,
                   .depthwise = depthwise, .bias = false, .count = n});
      break;
    case AdapterKind::kQrnn:
      s.push_back({.kind = LayerKind::kConv1d, .d_in = d_prime, .kernel_size = kernel_size,
                   .depthwise = depthwise, .bias = true, .count = 2 * n});
      s.push_back({.kind = LayerKind::kPointwise, .d_in = d_prime, .count = 2 * n});
      s.push_back({.kind = LayerKind::kFoPool, .d_in = d_prime, .count = n});
      break;
    case AdapterKind::kRetention:
      s.push_back({.kind = LayerKind::kRetentionStep, .d_in = d_prime, .count = n});
      break;
  }
  return s;
}

Stack detector_adapter_stack(const detector::DetectorConfig& config) {
  const auto& a = config.adapter;
  return adapter_stack(a.kind, a.d, a.d_prime, 2 * std::int64_t(config.n_blocks), a.kernel_size,
                       a.depthwise);
}

}  // namespace streamstart::costmodel
