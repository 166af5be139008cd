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

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "kernels_internal.hpp"
#include "random_util.hpp"
#include "streamstart/error.hpp"

namespace streamstart::kernels {

std::string to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kVanilla: return "vanilla";
    case AdapterKind::kStConv: return "st_conv";
    case AdapterKind::kQrnn: return "qrnn";
    case AdapterKind::kRetention: return "retention";
  }
  return "unknown";
}

AdapterKind parse_kind(const std::string& text) {
  if (text == "vanilla") return AdapterKind::kVanilla;
  if (text == "st_conv" || text == "st") return AdapterKind::kStConv;
  if (text == "qrnn" || text == "qr") return AdapterKind::kQrnn;
  if (text == "retention" || text == "rn") return AdapterKind::kRetention;
  throw ConfigError(fmt::format("unknown adapter kind '{}'", text));
}

bool is_temporal(AdapterKind kind) { return kind != AdapterKind::kVanilla; }

void AdapterConfig::validate() const {
  if (d < 1) throw ConfigError("adapter width d must be >= 1");
  if (d_prime < 1 || d_prime > d) {
    throw ConfigError(fmt::format("d_prime={} must lie in [1, d={}]", d_prime, d));
  }
  if (kind == AdapterKind::kStConv || kind == AdapterKind::kQrnn) {
    if (kernel_size < 1) throw ConfigError("kernel_size must be >= 1");
    if (lookback < 0 || lookahead < 0 ||
        lookback + lookahead != kernel_size - 1) {
      throw ConfigError(fmt::format(
          "lookback ({}) + lookahead ({}) must equal kernel_size - 1 ({})",
          lookback, lookahead, kernel_size - 1));
    }
  }
  if (kind == AdapterKind::kRetention) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw ConfigError(fmt::format("gamma={} must lie in (0, 1)", gamma));
    }
    if (!std::isfinite(theta)) throw ConfigError("theta must be finite");
    if (parallel_cap < 1) throw ConfigError("parallel_cap must be >= 1");
  }
}

namespace {

// Parameter count of an adapter with reduced width dp.
double adapter_param_count(AdapterKind kind, int d, double dp, int k) {
  const double base = 2.0 * d * dp + dp + d;
  switch (kind) {
    case AdapterKind::kVanilla: return base;
    case AdapterKind::kStConv: return base + k * dp * dp;
    case AdapterKind::kQrnn: return base + 2.0 * k * dp * dp + 2.0 * dp;
    case AdapterKind::kRetention: return base + 3.0 * dp * dp;
  }
  return base;
}

}  // namespace

AdapterConfig AdapterConfig::make(AdapterKind kind, int d, int kernel_size) {
  AdapterConfig c;
  c.kind = kind;
  c.d = d;
  c.kernel_size = kernel_size;
  c.lookback = kernel_size - 1;
  c.lookahead = 0;
  const int st_dp = std::max(1, d / 2);
  if (kind == AdapterKind::kStConv) {
    c.d_prime = st_dp;
  } else {
    const double target =
        adapter_param_count(AdapterKind::kStConv, d, st_dp, kernel_size);
    int best = 1;
    double best_gap = std::abs(adapter_param_count(kind, d, 1, kernel_size) - target);
    for (int dp = 2; dp <= d; ++dp) {
      const double gap = std::abs(adapter_param_count(kind, d, dp, kernel_size) - target);
      if (gap < best_gap) {
        best = dp;
        best_gap = gap;
      }
    }
    c.d_prime = best;
  }
  c.validate();
  return c;
}

AdapterParams AdapterParams::zeros_like() const {
  AdapterParams z;
  z.down_w = Eigen::MatrixXd::Zero(down_w.rows(), down_w.cols());
  z.down_b = Row::Zero(down_b.size());
  z.up_w = Eigen::MatrixXd::Zero(up_w.rows(), up_w.cols());
  z.up_b = Row::Zero(up_b.size());
  z.conv_s = Eigen::MatrixXd::Zero(conv_s.rows(), conv_s.cols());
  z.conv_s_b = Row::Zero(conv_s_b.size());
  z.conv_f = Eigen::MatrixXd::Zero(conv_f.rows(), conv_f.cols());
  z.conv_f_b = Row::Zero(conv_f_b.size());
  z.wq = Eigen::MatrixXd::Zero(wq.rows(), wq.cols());
  z.wk = Eigen::MatrixXd::Zero(wk.rows(), wk.cols());
  z.wv = Eigen::MatrixXd::Zero(wv.rows(), wv.cols());
  return z;
}

std::size_t AdapterParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](std::string_view, std::span<const double> t) { n += t.size(); });
  return n;
}

StreamState StreamState::fresh(const AdapterConfig& config) {
  StreamState s;
  s.kind = config.kind;
  switch (config.kind) {
    case AdapterKind::kVanilla:
      break;
    case AdapterKind::kStConv:
      s.conv_history = Eigen::MatrixXd::Zero(config.kernel_size - 1, config.d_prime);
      break;
    case AdapterKind::kQrnn:
      s.conv_history = Eigen::MatrixXd::Zero(config.kernel_size - 1, config.d_prime);
      s.hidden = Row::Zero(config.d_prime);
      break;
    case AdapterKind::kRetention:
      s.retention = Eigen::MatrixXd::Zero(config.d_prime, config.d_prime);
      break;
  }
  return s;
}

AdapterParams init_params(const AdapterConfig& config, std::uint64_t seed) {
  config.validate();
  streamstart::internal::Rng rng(seed);
  const int d = config.d;
  const int dp = config.d_prime;
  const int k = config.kernel_size;
  AdapterParams p;
  p.down_w = streamstart::internal::gaussian(d, dp, 1.0 / std::sqrt(double(d)), rng);
  p.down_b = Row::Zero(dp);
  p.up_w = Eigen::MatrixXd::Zero(dp, d);
  p.up_b = Row::Zero(d);
  const int conv_rows = config.depthwise ? k : k * dp;
  const double conv_std = 1.0 / std::sqrt(double(config.depthwise ? k : k * dp));
  switch (config.kind) {
    case AdapterKind::kVanilla:
      break;
    case AdapterKind::kStConv:
      p.conv_s = streamstart::internal::gaussian(conv_rows, dp, conv_std, rng);
      break;
    case AdapterKind::kQrnn:
      p.conv_s = streamstart::internal::gaussian(conv_rows, dp, conv_std, rng);
      p.conv_s_b = Row::Zero(dp);
      p.conv_f = Eigen::MatrixXd::Zero(conv_rows, dp);
      p.conv_f_b = Row::Constant(dp, config.forget_bias_init);
      break;
    case AdapterKind::kRetention: {
      const double s = 1.0 / std::sqrt(double(dp));
      p.wq = streamstart::internal::gaussian(dp, dp, s, rng);
      p.wk = streamstart::internal::gaussian(dp, dp, s, rng);
      p.wv = streamstart::internal::gaussian(dp, dp, s, rng);
      break;
    }
  }
  return p;
}

namespace internal {

void check_conv_shape(const Eigen::MatrixXd& w, int kernel_size, Eigen::Index width,
                      bool depthwise) {
  const Eigen::Index rows = depthwise ? kernel_size : kernel_size * width;
  if (w.rows() != rows || w.cols() != width) {
    throw ConfigError(fmt::format(
        "conv filter bank is {}x{}, expected {}x{} (k={}, d'={}, {})", w.rows(),
        w.cols(), rows, width, kernel_size, width,
        depthwise ? "depth-wise" : "dense"));
  }
}

Sequence conv_padded(const Eigen::MatrixXd& padded, const Eigen::MatrixXd& w,
                     int kernel_size, bool depthwise, Eigen::Index n_out) {
  const Eigen::Index width = padded.cols();
  Sequence y = Sequence::Zero(n_out, width);
  for (int j = 0; j < kernel_size; ++j) {
    if (depthwise) {
      y.array() += padded.middleRows(j, n_out).array().rowwise() * w.row(j).array();
    } else {
      y.noalias() += padded.middleRows(j, n_out) * w.middleRows(j * width, width);
    }
  }
  return y;
}

Eigen::MatrixXd pad_rows(const Sequence& x, int before, int after) {
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(x.rows() + before + after, x.cols());
  padded.middleRows(before, x.rows()) = x;
  return padded;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd decay_powers(double gamma, Eigen::Index n) {
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = std::pow(gamma, double(i));
  return p;
}

Eigen::MatrixXd decay_mask(double gamma, Eigen::Index n) {
  const Eigen::VectorXd p = decay_powers(gamma, n);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c <= r; ++c) mask(r, c) = p(r - c);
  }
  return mask;
}

}  // namespace internal

Sequence causal_conv(const Sequence& x, const Eigen::MatrixXd& w, int kernel_size,
                     int lookback, int lookahead, bool depthwise, ConvMode mode) {
  if (kernel_size < 1 || lookback < 0 || lookahead < 0 ||
      lookback + lookahead != kernel_size - 1) {
    throw ConfigError(fmt::format(
        "lookback ({}) + lookahead ({}) must equal kernel_size - 1 ({})", lookback,
        lookahead, kernel_size - 1));
  }
  if (mode == ConvMode::kStreaming && lookahead > 0) {
    throw ConfigError(fmt::format(
        "lookahead={} is not available in streaming mode; use lookahead 0", lookahead));
  }
  internal::check_conv_shape(w, kernel_size, x.cols(), depthwise);
  return internal::conv_padded(internal::pad_rows(x, lookback, lookahead), w,
                               kernel_size, depthwise, x.rows());
}

Sequence causal_conv_step(const Sequence& x, const Eigen::MatrixXd& w, int kernel_size,
                          bool depthwise, Eigen::MatrixXd& history) {
  internal::check_conv_shape(w, kernel_size, x.cols(), depthwise);
  const Eigen::Index keep = kernel_size - 1;
  if (history.rows() != keep || (keep > 0 && history.cols() != x.cols())) {
    throw ConfigError("conv history does not match kernel size / width");
  }
  Eigen::MatrixXd padded(keep + x.rows(), x.cols());
  padded.topRows(keep) = history;
  padded.bottomRows(x.rows()) = x;
  Sequence y = internal::conv_padded(padded, w, kernel_size, depthwise, x.rows());
  if (keep > 0) history = padded.bottomRows(keep);
  return y;
}

FoPoolResult fo_pool(const Sequence& s, const Sequence& f, const Row& h_init) {
  if (s.rows() != f.rows() || s.cols() != f.cols()) {
    throw ConfigError("fo_pool: s and f must have the same shape");
  }
  if (h_init.size() != s.cols()) {
    throw ConfigError("fo_pool: h_init width does not match s");
  }
  for (Eigen::Index t = 0; t < f.rows(); ++t) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      const double g = f(t, c);
      if (!(g >= 0.0 && g <= 1.0)) {
        throw NumericError(fmt::format(
            "fo_pool: forget gate f[{}][{}]={} outside [0, 1]", t, c, g));
      }
      if (!std::isfinite(s(t, c))) {
        throw NumericError(fmt::format("fo_pool: non-finite s[{}][{}]", t, c));
      }
    }
  }
  FoPoolResult out;
  out.h.resize(s.rows(), s.cols());
  Row h = h_init;
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    h = f.row(t).cwiseProduct(h) + (1.0 - f.row(t).array()).matrix().cwiseProduct(s.row(t));
    out.h.row(t) = h;
  }
  out.last = h;
  return out;
}

namespace {

void check_state(const AdapterConfig& config, const StreamState& state) {
  if (state.kind != config.kind) {
    throw ConfigError(fmt::format("stream state is for a {} adapter, config is {}",
                                  to_string(state.kind), to_string(config.kind)));
  }
  const bool conv = config.kind == AdapterKind::kStConv ||
                    config.kind == AdapterKind::kQrnn;
  if (conv && (state.conv_history.rows() != config.kernel_size - 1 ||
               state.conv_history.cols() != config.d_prime)) {
    throw ConfigError("stream state conv history does not match the config");
  }
  if (config.kind == AdapterKind::kQrnn && state.hidden.size() != config.d_prime) {
    throw ConfigError("stream state hidden width does not match the config");
  }
  if (config.kind == AdapterKind::kRetention &&
      (state.retention.rows() != config.d_prime ||
       state.retention.cols() != config.d_prime)) {
    throw ConfigError("stream state retention matrix does not match the config");
  }
}

void require_streaming(const AdapterConfig& config) {
  if (config.lookahead > 0 && (config.kind == AdapterKind::kStConv ||
                               config.kind == AdapterKind::kQrnn)) {
    throw ConfigError(fmt::format(
        "lookahead={} needs future frames; streaming requires lookahead 0",
        config.lookahead));
  }
}

std::int64_t conv_macs(const AdapterConfig& c, Eigen::Index n) {
  const std::int64_t per = c.depthwise ? std::int64_t(c.kernel_size) * c.d_prime
                                       : std::int64_t(c.kernel_size) * c.d_prime * c.d_prime;
  return per * n;
}

}  // namespace

Sequence qrnn_forward(const Sequence& x, const AdapterParams& params,
                      const AdapterConfig& config, StreamState& state) {
  require_streaming(config);
  check_state(config, state);
  // Both banks read the same left context; advance the history once.
  Eigen::MatrixXd history_f = state.conv_history;
  const Sequence pre_s = causal_conv_step(x, params.conv_s, config.kernel_size,
                                          config.depthwise, state.conv_history);
  const Sequence pre_f = causal_conv_step(x, params.conv_f, config.kernel_size,
                                          config.depthwise, history_f);
  const Sequence s = (pre_s.rowwise() + params.conv_s_b).array().tanh().matrix();
  const Sequence f = (pre_f.rowwise() + params.conv_f_b).unaryExpr(&internal::sigmoid);
  FoPoolResult pooled = fo_pool(s, f, state.hidden);
  state.hidden = pooled.last;
  return std::move(pooled.h);
}

Sequence rotate_positions(const Sequence& x, double theta, std::int64_t start_position) {
  Sequence out = x;
  const Eigen::Index pairs = x.cols() / 2;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double angle = double(start_position + i) * theta;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (Eigen::Index p = 0; p < pairs; ++p) {
      const double a = x(i, 2 * p);
      const double b = x(i, 2 * p + 1);
      out(i, 2 * p) = a * c - b * s;
      out(i, 2 * p + 1) = a * s + b * c;
    }
  }
  return out;
}

Sequence retention_parallel(const Sequence& x, const AdapterParams& params,
                            const AdapterConfig& config, std::int64_t start_position) {
  if (x.rows() < 1) throw ConfigError("retention_parallel needs at least one frame");
  if (x.rows() > config.parallel_cap) {
    throw ConfigError(fmt::format(
        "retention_parallel: {} frames exceed the stability cap of {}; "
        "use chunked or recurrent retention",
        x.rows(), config.parallel_cap));
  }
  const Sequence q = rotate_positions(x * params.wq, config.theta, start_position);
  const Sequence k = rotate_positions(x * params.wk, config.theta, start_position);
  const Sequence v = x * params.wv;
  const Eigen::MatrixXd scores =
      (q * k.transpose()).cwiseProduct(internal::decay_mask(config.gamma, x.rows()));
  return scores * v;
}

Row retention_recurrent(const Row& x, const AdapterParams& params,
                        const AdapterConfig& config, StreamState& state) {
  check_state(config, state);
  const Row q = rotate_positions(x * params.wq, config.theta, state.position);
  const Row k = rotate_positions(x * params.wk, config.theta, state.position);
  const Row v = x * params.wv;
  state.retention = config.gamma * state.retention + k.transpose() * v;
  state.position += 1;
  return q * state.retention;
}

Sequence retention_chunk(const Sequence& x, const AdapterParams& params,
                         const AdapterConfig& config, StreamState& state) {
  check_state(config, state);
  Sequence out(x.rows(), config.d_prime);
  for (Eigen::Index begin = 0; begin < x.rows(); begin += config.parallel_cap) {
    const Eigen::Index c = std::min<Eigen::Index>(config.parallel_cap, x.rows() - begin);
    const auto chunk = x.middleRows(begin, c);
    const Sequence q = rotate_positions(chunk * params.wq, config.theta, state.position);
    const Sequence k = rotate_positions(chunk * params.wk, config.theta, state.position);
    const Sequence v = chunk * params.wv;
    const Eigen::VectorXd powers = internal::decay_powers(config.gamma, c + 1);
    Sequence y =
        (q * k.transpose()).cwiseProduct(internal::decay_mask(config.gamma, c)) * v;
    // Row i also sees the carried state, decayed i + 1 times.
    y += powers.tail(c).asDiagonal() * (q * state.retention);
    // S <- gamma^c S + sum_j gamma^(c-1-j) k_j^T v_j
    state.retention = powers(c) * state.retention +
                      k.transpose() * (powers.head(c).reverse().asDiagonal() * v);
    state.position += c;
    out.middleRows(begin, c) = y;
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Sequence adapter_forward(const Sequence& x, const AdapterParams& params,
                         const AdapterConfig& config, StreamState& state) {
  check_state(config, state);
  if (x.cols() != config.d) {
    throw ConfigError(fmt::format("adapter input width {} != d={}", x.cols(), config.d));
  }
  const Eigen::Index n = x.rows();
  const std::int64_t dp = config.d_prime;
  std::int64_t macs = 2 * n * std::int64_t(config.d) * dp;  // down + up
  const Sequence z = (x * params.down_w).rowwise() + params.down_b;
  Sequence core;
  switch (config.kind) {
    case AdapterKind::kVanilla:
      core = z.unaryExpr(&gelu);
      macs += n * dp;
      break;
    case AdapterKind::kStConv:
      require_streaming(config);
      core = causal_conv_step(z, params.conv_s, config.kernel_size, config.depthwise,
                              state.conv_history);
      macs += conv_macs(config, n);
      break;
    case AdapterKind::kQrnn:
      core = qrnn_forward(z, params, config, state);
      macs += 2 * conv_macs(config, n) + 2 * n * dp;
      break;
    case AdapterKind::kRetention:
      if (n == 1) {
        core = retention_recurrent(z.row(0), params, config, state);
        macs += 5 * dp * dp;
      } else {
        core = retention_chunk(z, params, config, state);
        macs += n * (3 * dp * dp + 2 * n * dp + 2 * dp * dp);
      }
      break;
  }
  if (config.kind != AdapterKind::kRetention) state.position += n;
  state.last_macs = macs;
  return x + ((core * params.up_w).rowwise() + params.up_b);
}

Sequence adapter_forward_offline(const Sequence& x, const AdapterParams& params,
                                 const AdapterConfig& config) {
  if (config.lookahead == 0) {
    StreamState state = StreamState::fresh(config);
    return adapter_forward(x, params, config, state);
  }
  // Lookahead only changes the convolution padding.
  const Sequence z = (x * params.down_w).rowwise() + params.down_b;
  Sequence core;
  if (config.kind == AdapterKind::kStConv) {
    core = causal_conv(z, params.conv_s, config.kernel_size, config.lookback,
                       config.lookahead, config.depthwise, ConvMode::kOffline);
  } else {
    const Sequence pre_s = causal_conv(z, params.conv_s, config.kernel_size, config.lookback,
                                       config.lookahead, config.depthwise, ConvMode::kOffline);
    const Sequence pre_f = causal_conv(z, params.conv_f, config.kernel_size, config.lookback,
                                       config.lookahead, config.depthwise, ConvMode::kOffline);
    const Sequence s = (pre_s.rowwise() + params.conv_s_b).array().tanh().matrix();
    const Sequence f = (pre_f.rowwise() + params.conv_f_b).unaryExpr(&internal::sigmoid);
    core = fo_pool(s, f, Row::Zero(config.d_prime)).h;
  }
  return x + ((core * params.up_w).rowwise() + params.up_b);
}

std::int64_t receptive_field(std::int64_t layers, std::int64_t kernel_size) {
  if (layers < 1 || kernel_size < 1) {
    throw ConfigError("receptive_field needs layers >= 1 and kernel_size >= 1");
  }
  return kernel_size + (layers - 1) * (kernel_size - 1);
}

}  // namespace streamstart::kernels
