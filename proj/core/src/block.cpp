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

#include "kernels_internal.hpp"
#include "random_util.hpp"
#include "streamstart/error.hpp"

namespace streamstart::kernels {

BlockState BlockState::fresh(const AdapterConfig& config) {
  return {StreamState::fresh(config), StreamState::fresh(config)};
}

BlockParams init_block(const AdapterConfig& config, int mlp_hidden, double frozen_scale,
                       std::uint64_t adapter_seed, std::uint64_t frozen_seed) {
  if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
  BlockParams b;
  b.temporal = init_params(config, streamstart::internal::mix_seed(adapter_seed, 0));
  b.pre_mlp = init_params(config, streamstart::internal::mix_seed(adapter_seed, 1));
  streamstart::internal::Rng rng(frozen_seed);
  const int d = config.d;
  b.spatial_w = Eigen::MatrixXd::Identity(d, d) +
                streamstart::internal::gaussian(d, d, frozen_scale / std::sqrt(double(d)), rng);
  b.mlp_w1 = streamstart::internal::gaussian(d, mlp_hidden, frozen_scale / std::sqrt(double(d)), rng);
  b.mlp_b1 = Row::Zero(mlp_hidden);
  b.mlp_w2 =
      streamstart::internal::gaussian(mlp_hidden, d, frozen_scale / std::sqrt(double(mlp_hidden)), rng);
  b.mlp_b2 = Row::Zero(d);
  return b;
}

namespace internal {

Sequence frozen_mlp(const Sequence& x, const BlockParams& p) {
  const Sequence hidden = ((x * p.mlp_w1).rowwise() + p.mlp_b1).unaryExpr(&gelu);
  return (hidden * p.mlp_w2).rowwise() + p.mlp_b2;
}

}  // namespace internal

Sequence block_forward(const Sequence& x, const BlockParams& params,
                       const AdapterConfig& config, BlockState& state) {
  const Sequence a = adapter_forward(x, params.temporal, config, state.temporal);
  const Sequence y = x + a * params.spatial_w;
  const Sequence b = adapter_forward(y, params.pre_mlp, config, state.pre_mlp);
  return y + internal::frozen_mlp(b, params);
}

Sequence block_forward_offline(const Sequence& x, const BlockParams& params,
                               const AdapterConfig& config) {
  const Sequence a = adapter_forward_offline(x, params.temporal, config);
  const Sequence y = x + a * params.spatial_w;
  const Sequence b = adapter_forward_offline(y, params.pre_mlp, config);
  return y + internal::frozen_mlp(b, params);
}

}  // namespace streamstart::kernels
