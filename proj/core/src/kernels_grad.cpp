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

#include "streamstart/kernels_grad.hpp"

#include <fmt/format.h>

#include "kernels_internal.hpp"
#include "streamstart/error.hpp"

namespace streamstart::kernels {

Sequence causal_conv_backward(const Sequence& x, const Sequence& dy,
                              const Eigen::MatrixXd& w, int kernel_size, int lookback,
                              int lookahead, bool depthwise, Eigen::MatrixXd& dw) {
  const Eigen::Index n = x.rows();
  const Eigen::Index width = x.cols();
  const Eigen::MatrixXd padded = internal::pad_rows(x, lookback, lookahead);
  Eigen::MatrixXd dpadded = Eigen::MatrixXd::Zero(padded.rows(), width);
  for (int j = 0; j < kernel_size; ++j) {
    const auto window = padded.middleRows(j, n);
    if (depthwise) {
      dpadded.middleRows(j, n).array() += dy.array().rowwise() * w.row(j).array();
      dw.row(j) += (window.array() * dy.array()).colwise().sum().matrix();
    } else {
      const auto tap = w.middleRows(j * width, width);
      dpadded.middleRows(j, n).noalias() += dy * tap.transpose();
      dw.middleRows(j * width, width).noalias() += window.transpose() * dy;
    }
  }
  return dpadded.middleRows(lookback, n);
}

FoPoolGrad fo_pool_backward(const Sequence& s, const Sequence& f, const Sequence& h,
                            const Row& h_init, const Sequence& dh) {
  const Eigen::Index n = s.rows();
  FoPoolGrad g;
  g.ds.resize(n, s.cols());
  g.df.resize(n, s.cols());
  Row carry = Row::Zero(s.cols());
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const Row total = dh.row(t) + carry;
    const Row prev = t > 0 ? Row(h.row(t - 1)) : h_init;
    g.ds.row(t) = total.cwiseProduct((1.0 - f.row(t).array()).matrix());
    g.df.row(t) = total.cwiseProduct(prev - s.row(t));
    carry = total.cwiseProduct(f.row(t));
  }
  g.dh_init = carry;
  return g;
}

Sequence adapter_forward_taped(const Sequence& x, const AdapterParams& params,
                               const AdapterConfig& config, AdapterTape& tape) {
  if (x.cols() != config.d) {
    throw ConfigError(fmt::format("adapter input width {} != d={}", x.cols(), config.d));
  }
  tape = AdapterTape{};
  tape.x = x;
  tape.z = (x * params.down_w).rowwise() + params.down_b;
  const Sequence& z = tape.z;
  switch (config.kind) {
    case AdapterKind::kVanilla:
      tape.core = z.unaryExpr(&gelu);
      break;
    case AdapterKind::kStConv:
      tape.core = causal_conv(z, params.conv_s, config.kernel_size, config.lookback,
                              config.lookahead, config.depthwise, ConvMode::kOffline);
      break;
    case AdapterKind::kQrnn: {
      const Sequence pre_s = causal_conv(z, params.conv_s, config.kernel_size, config.lookback,
                                         config.lookahead, config.depthwise, ConvMode::kOffline);
      const Sequence pre_f = causal_conv(z, params.conv_f, config.kernel_size, config.lookback,
                                         config.lookahead, config.depthwise, ConvMode::kOffline);
      tape.s = (pre_s.rowwise() + params.conv_s_b).array().tanh().matrix();
      tape.f = (pre_f.rowwise() + params.conv_f_b).unaryExpr(&internal::sigmoid);
      tape.core = fo_pool(tape.s, tape.f, Row::Zero(config.d_prime)).h;
      break;
    }
    case AdapterKind::kRetention: {
      if (z.rows() > config.parallel_cap) {
        throw ConfigError(fmt::format(
            "training window of {} frames exceeds the retention stability cap {}",
            z.rows(), config.parallel_cap));
      }
      tape.q = rotate_positions(z * params.wq, config.theta, 0);
      tape.k = rotate_positions(z * params.wk, config.theta, 0);
      tape.v = z * params.wv;
      tape.core = (tape.q * tape.k.transpose())
                      .cwiseProduct(internal::decay_mask(config.gamma, z.rows())) *
                  tape.v;
      break;
    }
  }
  return x + ((tape.core * params.up_w).rowwise() + params.up_b);
}

Sequence adapter_backward(const AdapterTape& tape, const Sequence& dy,
                          const AdapterParams& params, const AdapterConfig& config,
                          AdapterParams& grad) {
  grad.up_w.noalias() += tape.core.transpose() * dy;
  grad.up_b += dy.colwise().sum();
  const Sequence dcore = dy * params.up_w.transpose();

  Sequence dz;
  const Sequence& z = tape.z;
  switch (config.kind) {
    case AdapterKind::kVanilla:
      dz = dcore.cwiseProduct(z.unaryExpr(&gelu_grad));
      break;
    case AdapterKind::kStConv:
      dz = causal_conv_backward(z, dcore, params.conv_s, config.kernel_size, config.lookback,
                                config.lookahead, config.depthwise, grad.conv_s);
      break;
    case AdapterKind::kQrnn: {
      const FoPoolGrad pool = fo_pool_backward(tape.s, tape.f, tape.core,
                                               Row::Zero(config.d_prime), dcore);
      const Sequence dpre_s =
          pool.ds.cwiseProduct((1.0 - tape.s.array().square()).matrix());
      const Sequence dpre_f =
          pool.df.cwiseProduct((tape.f.array() * (1.0 - tape.f.array())).matrix());
      grad.conv_s_b += dpre_s.colwise().sum();
      grad.conv_f_b += dpre_f.colwise().sum();
      dz = causal_conv_backward(z, dpre_s, params.conv_s, config.kernel_size, config.lookback,
                                config.lookahead, config.depthwise, grad.conv_s);
      dz += causal_conv_backward(z, dpre_f, params.conv_f, config.kernel_size,
                                 config.lookback, config.lookahead, config.depthwise,
                                 grad.conv_f);
      break;
    }
    case AdapterKind::kRetention: {
      const Eigen::MatrixXd mask = internal::decay_mask(config.gamma, z.rows());
      const Eigen::MatrixXd m = (tape.q * tape.k.transpose()).cwiseProduct(mask);
      const Eigen::MatrixXd dm = (dcore * tape.v.transpose()).cwiseProduct(mask);
      const Sequence dv = m.transpose() * dcore;
      // Rotation is orthogonal; its adjoint rotates back.
      const Sequence dq = rotate_positions(dm * tape.k, -config.theta, 0);
      const Sequence dk = rotate_positions(dm.transpose() * tape.q, -config.theta, 0);
      grad.wq.noalias() += z.transpose() * dq;
      grad.wk.noalias() += z.transpose() * dk;
      grad.wv.noalias() += z.transpose() * dv;
      dz = dq * params.wq.transpose() + dk * params.wk.transpose() +
           dv * params.wv.transpose();
      break;
    }
  }
  grad.down_w.noalias() += tape.x.transpose() * dz;
  grad.down_b += dz.colwise().sum();
  return dy + dz * params.down_w.transpose();
}

BlockGrad BlockGrad::zeros_like(const BlockParams& params) {
  return {params.temporal.zeros_like(), params.pre_mlp.zeros_like()};
}

Sequence block_forward_taped(const Sequence& x, const BlockParams& params,
                             const AdapterConfig& config, BlockTape& tape) {
  tape.a = adapter_forward_taped(x, params.temporal, config, tape.temporal);
  const Sequence y = x + tape.a * params.spatial_w;
  const Sequence b = adapter_forward_taped(y, params.pre_mlp, config, tape.pre_mlp);
  tape.mlp_pre = (b * params.mlp_w1).rowwise() + params.mlp_b1;
  return y + ((tape.mlp_pre.unaryExpr(&gelu) * params.mlp_w2).rowwise() + params.mlp_b2);
}

Sequence block_backward(const BlockTape& tape, const Sequence& dout,
                        const BlockParams& params, const AdapterConfig& config,
                        BlockGrad& grad) {
  const Sequence dhidden = dout * params.mlp_w2.transpose();
  const Sequence dpre = dhidden.cwiseProduct(tape.mlp_pre.unaryExpr(&gelu_grad));
  const Sequence db = dpre * params.mlp_w1.transpose();
  const Sequence dy = dout + adapter_backward(tape.pre_mlp, db, params.pre_mlp, config,
                                              grad.pre_mlp);
  const Sequence da = dy * params.spatial_w.transpose();
  return dy + adapter_backward(tape.temporal, da, params.temporal, config, grad.temporal);
}

}  // namespace streamstart::kernels
