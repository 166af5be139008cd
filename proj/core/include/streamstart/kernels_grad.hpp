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

#include <Eigen/Dense>

#include "streamstart/kernels.hpp"

// Reverse-mode adjoints for the offline (fresh-state) adapter and block
// passes. Training windows always start from a fresh state, so these are the
// only paths that need gradients.
namespace streamstart::kernels {

struct AdapterTape {
  Sequence x;     // adapter input, width d
  Sequence z;     // Down(x)
  Sequence core;  // kind-specific core output
  Sequence s, f;  // qrnn candidate and forget activations
  Sequence q, k, v;  // retention projections, q and k rotated
};

// Same result as adapter_forward_offline, keeping what backward needs.
Sequence adapter_forward_taped(const Sequence& x, const AdapterParams& params,
                               const AdapterConfig& config, AdapterTape& tape);

// Accumulates parameter adjoints into `grad` (shaped like params) and
// returns dL/dx.
Sequence adapter_backward(const AdapterTape& tape, const Sequence& dy,
                          const AdapterParams& params, const AdapterConfig& config,
                          AdapterParams& grad);

// dL/dx of causal_conv, accumulating dL/dW into dw.
Sequence causal_conv_backward(const Sequence& x, const Sequence& dy,
                              const Eigen::MatrixXd& w, int kernel_size, int lookback,
                              int lookahead, bool depthwise, Eigen::MatrixXd& dw);

struct FoPoolGrad {
  Sequence ds;
  Sequence df;
  Row dh_init;
};

FoPoolGrad fo_pool_backward(const Sequence& s, const Sequence& f, const Sequence& h,
                            const Row& h_init, const Sequence& dh);

struct BlockTape {
  AdapterTape temporal;
  AdapterTape pre_mlp;
  Sequence a;
  Sequence mlp_pre;
};

struct BlockGrad {
  AdapterParams temporal;
  AdapterParams pre_mlp;

  static BlockGrad zeros_like(const BlockParams& params);
};

Sequence block_forward_taped(const Sequence& x, const BlockParams& params,
                             const AdapterConfig& config, BlockTape& tape);

// Frozen weights receive no adjoints; only the two adapters do.
Sequence block_backward(const BlockTape& tape, const Sequence& dout,
                        const BlockParams& params, const AdapterConfig& config,
                        BlockGrad& grad);

}  // namespace streamstart::kernels
