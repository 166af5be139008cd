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
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

namespace streamstart::kernels {

// [n_t x width] activations of one tubelet, one row per frame. Patch
// positions are folded into separate sequences by the caller.
using Sequence = Eigen::MatrixXd;
using Row = Eigen::RowVectorXd;

enum class AdapterKind : std::uint32_t {
  kVanilla = 0,
  kStConv = 1,
  kQrnn = 2,
  kRetention = 3,
};

std::string to_string(AdapterKind kind);
AdapterKind parse_kind(const std::string& text);
bool is_temporal(AdapterKind kind);

enum class ConvMode {
  kStreaming,  // lookahead must be zero
  kOffline,    // any split of the k - 1 padding
};

inline constexpr double kDefaultGamma = 0.96875;
// One full rotation every 30 positions, the retention training window.
inline constexpr double kDefaultTheta = 2.0 * std::numbers::pi / 30.0;
inline constexpr int kDefaultParallelCap = 512;

struct AdapterConfig {
  AdapterKind kind = AdapterKind::kVanilla;
  int d = 0;
  int d_prime = 0;
  int kernel_size = 3;
  int lookback = 2;
  int lookahead = 0;
  bool depthwise = false;
  double gamma = kDefaultGamma;
  double theta = kDefaultTheta;
  double forget_bias_init = -5.0;
  // Longest sequence retention_parallel accepts in one call.
  int parallel_cap = kDefaultParallelCap;

  // Throws ConfigError on violated invariants.
  void validate() const;

  // Defaults for a kind: st_conv uses d' = d/2, other kinds are sized to
  // match its parameter count.
  static AdapterConfig make(AdapterKind kind, int d, int kernel_size = 3);
  friend bool operator==(const AdapterConfig&, const AdapterConfig&) = default;
};

// Conv filter banks are stored tap-major: rows [j*d', (j+1)*d') hold W[j]
// for a dense bank, row j holds the per-channel taps of a depth-wise bank.
struct AdapterParams {
  Eigen::MatrixXd down_w;  // d x d'
  Row down_b;              // d'
  Eigen::MatrixXd up_w;    // d' x d
  Row up_b;                // d
  Eigen::MatrixXd conv_s;  // st_conv, qrnn
  Row conv_s_b;            // qrnn
  Eigen::MatrixXd conv_f;  // qrnn
  Row conv_f_b;            // qrnn
  Eigen::MatrixXd wq;      // retention, d' x d'
  Eigen::MatrixXd wk;
  Eigen::MatrixXd wv;

  // Visits every non-empty tensor in declaration order as
  // fn(name, std::span<double>). The order is also the checkpoint order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    visit_all(*this, fn);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    visit_all(*this, fn);
  }

  // Same shapes, all zeros.
  AdapterParams zeros_like() const;
  std::size_t parameter_count() const;

 private:
  template <typename Self, typename Fn>
  static void visit_all(Self& self, Fn& fn) {
    auto visit = [&fn](std::string_view name, auto& m) {
      if (m.size() == 0) return;
      using Scalar = std::remove_reference_t<decltype(*m.data())>;
      fn(name, std::span<Scalar>(m.data(), static_cast<std::size_t>(m.size())));
    };
    visit("down_w", self.down_w);
    visit("down_b", self.down_b);
    visit("up_w", self.up_w);
    visit("up_b", self.up_b);
    visit("conv_s", self.conv_s);
    visit("conv_s_b", self.conv_s_b);
    visit("conv_f", self.conv_f);
    visit("conv_f_b", self.conv_f_b);
    visit("wq", self.wq);
    visit("wk", self.wk);
    visit("wv", self.wv);
  }
};

// Carried state of one adapter on one tubelet.
struct StreamState {
  AdapterKind kind = AdapterKind::kVanilla;
  Eigen::MatrixXd conv_history;  // last `lookback` reduced inputs, oldest first
  Row hidden;                    // qrnn h_{t-1}
  Eigen::MatrixXd retention;     // S_n, d' x d'
  std::int64_t position = 0;     // frames consumed so far
  // Multiply-adds executed by the most recent adapter_forward call.
  std::int64_t last_macs = 0;

  static StreamState fresh(const AdapterConfig& config);
};

// Zero up-projection (exact identity at init), qrnn forget bank zero with
// bias forget_bias_init; every other weight small seeded Gaussian.
AdapterParams init_params(const AdapterConfig& config, std::uint64_t seed);

// y_t = sum_j x_{t - lookback + j} W[j], zero padded outside [0, n_t).
// Throws ConfigError if lookback + lookahead != k - 1 or if lookahead > 0
// in streaming mode.
Sequence causal_conv(const Sequence& x, const Eigen::MatrixXd& w,
                     int kernel_size, int lookback, int lookahead,
                     bool depthwise = false,
                     ConvMode mode = ConvMode::kStreaming);

// Streaming convolution with lookahead 0: `history` holds the previous k - 1
// inputs (zeros at stream start) and is advanced past x.
Sequence causal_conv_step(const Sequence& x, const Eigen::MatrixXd& w,
                          int kernel_size, bool depthwise,
                          Eigen::MatrixXd& history);

struct FoPoolResult {
  Sequence h;
  Row last;
};

// h_t = f_t * h_{t-1} + (1 - f_t) * s_t, elementwise. Throws NumericError for
// gates outside [0, 1] or non-finite values.
FoPoolResult fo_pool(const Sequence& s, const Sequence& f, const Row& h_init);

// Reduced-width QRNN core: s = tanh(W_s * x + b_s), f = sigmoid(W_f * x + b_f),
// then fo_pool from the carried hidden state.
Sequence qrnn_forward(const Sequence& x, const AdapterParams& params,
                      const AdapterConfig& config, StreamState& state);

// Rotates channel pairs (2c, 2c+1) of row i by (start_position + i) * theta.
// An odd trailing channel is left untouched.
Sequence rotate_positions(const Sequence& x, double theta,
                          std::int64_t start_position);

// (Q K^T ⊙ D) V with D_nm = gamma^(n-m) for n >= m. Q and K carry the
// position rotation, so the score of (n, m) depends on n - m only.
// Throws ConfigError when x has more rows than config.parallel_cap.
Sequence retention_parallel(const Sequence& x, const AdapterParams& params,
                            const AdapterConfig& config,
                            std::int64_t start_position = 0);

// S_n = gamma S_{n-1} + K_n^T V_n; out = Q_n S_n. Advances state.position.
Row retention_recurrent(const Row& x, const AdapterParams& params,
                        const AdapterConfig& config, StreamState& state);

// Parallel inside the chunk plus the decayed contribution of the carried
// state. Equivalent to stepping retention_recurrent over every row.
Sequence retention_chunk(const Sequence& x, const AdapterParams& params,
                         const AdapterConfig& config, StreamState& state);

// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
double gelu(double x);
double gelu_grad(double x);

// y = x + Up(core(Down(x))) over a chunk of frames, continuing from `state`.
// Throws ConfigError when the state belongs to another kind.
Sequence adapter_forward(const Sequence& x, const AdapterParams& params,
                         const AdapterConfig& config, StreamState& state);

// Whole-sequence pass from a fresh state. Allows lookahead > 0.
Sequence adapter_forward_offline(const Sequence& x, const AdapterParams& params,
                                 const AdapterConfig& config);

// Receptive field of M stacked convolutions of width k: k + (M - 1)(k - 1).
std::int64_t receptive_field(std::int64_t layers, std::int64_t kernel_size);

// One spatio-temporal block. The frozen spatial attention is replaced by a
// fixed linear map (single token per frame), the frozen MLP by a seeded
// two-layer GELU network:
//   a = TA_1(z)
//   y = z + a W_spatial
//   z' = y + MLP(TA_2(y))
struct BlockParams {
  AdapterParams temporal;  // trainable
  AdapterParams pre_mlp;   // trainable
  Eigen::MatrixXd spatial_w;  // frozen, d x d
  Eigen::MatrixXd mlp_w1;     // frozen, d x hidden
  Row mlp_b1;
  Eigen::MatrixXd mlp_w2;     // frozen, hidden x d
  Row mlp_b2;
};

struct BlockState {
  StreamState temporal;
  StreamState pre_mlp;

  static BlockState fresh(const AdapterConfig& config);
};

// W_spatial = I + G with G ~ N(0, frozen_scale^2 / d). The MLP weights are
// N(0, frozen_scale^2 / fan_in) with zero biases.
BlockParams init_block(const AdapterConfig& config, int mlp_hidden,
                       double frozen_scale, std::uint64_t adapter_seed,
                       std::uint64_t frozen_seed);

Sequence block_forward(const Sequence& x, const BlockParams& params,
                       const AdapterConfig& config, BlockState& state);

// Whole-sequence block pass from fresh adapter states.
Sequence block_forward_offline(const Sequence& x, const BlockParams& params,
                               const AdapterConfig& config);

}  // namespace streamstart::kernels
