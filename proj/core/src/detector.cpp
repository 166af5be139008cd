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

#include "streamstart/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "kernels_internal.hpp"
#include "random_util.hpp"
#include "streamstart/error.hpp"

namespace streamstart::detector {

namespace {

nlohmann::json adapter_to_json(const kernels::AdapterConfig& a) {
  return {{"kind", kernels::to_string(a.kind)},
          {"d", a.d},
          {"d_prime", a.d_prime},
          {"kernel_size", a.kernel_size},
          {"lookback", a.lookback},
          {"lookahead", a.lookahead},
          {"depthwise", a.depthwise},
          {"gamma", a.gamma},
          {"theta", a.theta},
          {"forget_bias_init", a.forget_bias_init},
          {"parallel_cap", a.parallel_cap}};
}

kernels::AdapterConfig adapter_from_json(const nlohmann::json& j) {
  kernels::AdapterConfig a;
  a.kind = kernels::parse_kind(j.at("kind").get<std::string>());
  a.d = j.at("d").get<int>();
  a.d_prime = j.at("d_prime").get<int>();
  a.kernel_size = j.value("kernel_size", a.kernel_size);
  a.lookback = j.value("lookback", a.lookback);
  a.lookahead = j.value("lookahead", a.lookahead);
  a.depthwise = j.value("depthwise", a.depthwise);
  a.gamma = j.value("gamma", a.gamma);
  a.theta = j.value("theta", a.theta);
  a.forget_bias_init = j.value("forget_bias_init", a.forget_bias_init);
  a.parallel_cap = j.value("parallel_cap", a.parallel_cap);
  return a;
}

// Wraps nlohmann's type errors so malformed configs map to the config code.
template <typename F>
auto config_json(F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("bad config JSON: {}", e.what()));
  }
}

constexpr std::uint64_t kInputMapStream = 0x1000;

}  // namespace

void DetectorConfig::validate() const {
  adapter.validate();
  if (adapter.lookahead != 0) throw ConfigError("detector adapters must have lookahead 0");
  if (d_in < 1) throw ConfigError("d_in must be >= 1");
  if (n_blocks < 1) throw ConfigError("n_blocks must be >= 1");
  if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
  if (!(frozen_scale >= 0.0) || !std::isfinite(frozen_scale)) {
    throw ConfigError("frozen_scale must be finite and >= 0");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be finite and > 0");
  }
}

nlohmann::json DetectorConfig::to_json() const {
  return {{"adapter", adapter_to_json(adapter)},
          {"d_in", d_in},
          {"n_blocks", n_blocks},
          {"mlp_hidden", mlp_hidden},
          {"frozen_scale", frozen_scale},
          {"frozen_seed", frozen_seed},
          {"temperature", temperature}};
}

DetectorConfig DetectorConfig::from_json(const nlohmann::json& j) {
  return config_json([&] {
    DetectorConfig c;
    c.adapter = adapter_from_json(j.at("adapter"));
    c.d_in = j.value("d_in", c.d_in);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
    c.frozen_scale = j.value("frozen_scale", c.frozen_scale);
    c.frozen_seed = j.value("frozen_seed", c.frozen_seed);
    c.temperature = j.value("temperature", c.temperature);
    return c;
  });
}

DetectorModel DetectorModel::create(const DetectorConfig& config, std::uint64_t adapter_seed) {
  config.validate();
  DetectorModel m;
  m.config = config;
  const int d = config.adapter.d;
  if (config.d_in == d) {
    m.input_map = Eigen::MatrixXd::Identity(d, d);
  } else {
    internal::Rng rng(internal::mix_seed(config.frozen_seed, kInputMapStream));
    m.input_map = internal::gaussian(config.d_in, d, 1.0 / std::sqrt(double(config.d_in)), rng);
  }
  for (int b = 0; b < config.n_blocks; ++b) {
    m.blocks.push_back(kernels::init_block(config.adapter, config.mlp_hidden,
                                           config.frozen_scale,
                                           internal::mix_seed(adapter_seed, std::uint64_t(b)),
                                           internal::mix_seed(config.frozen_seed, std::uint64_t(b))));
  }
  return m;
}

std::size_t DetectorModel::trainable_count() const {
  std::size_t n = 0;
  for_each_trainable([&](const std::string&, std::span<const double> s) { n += s.size(); });
  return n;
}

Row DetectorModel::project_query(const Eigen::VectorXd& query) const {
  if (query.size() != config.d_in) {
    throw ConfigError(fmt::format("query has dim {}, model expects {}", query.size(), config.d_in));
  }
  return query.transpose() * input_map;
}

GradientSet GradientSet::zeros_like(const DetectorModel& model) {
  GradientSet g;
  for (const auto& b : model.blocks) g.blocks.push_back(kernels::BlockGrad::zeros_like(b));
  return g;
}

void GradientSet::add(const GradientSet& other) {
  std::vector<std::span<const double>> src;
  other.for_each([&](const std::string&, std::span<const double> s) { src.push_back(s); });
  std::size_t i = 0;
  for_each([&](const std::string&, std::span<double> s) {
    const auto& o = src.at(i++);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] += o[j];
  });
}

namespace {

void check_embeddings(const DetectorModel& model, const Eigen::MatrixXd& e) {
  if (e.cols() != model.config.d_in) {
    throw ConfigError(
        fmt::format("embeddings have dim {}, model expects {}", e.cols(), model.config.d_in));
  }
}

}  // namespace

Sequence encode(const DetectorModel& model, const Eigen::MatrixXd& embeddings) {
  check_embeddings(model, embeddings);
  Sequence x = embeddings * model.input_map;
  for (const auto& b : model.blocks) x = kernels::block_forward_offline(x, b, model.config.adapter);
  return x;
}

double cosine_similarity(const Row& a, const Row& b, bool* zero_norm) {
  const double na = a.norm();
  const double nb = b.norm();
  if (zero_norm != nullptr) *zero_norm = na == 0.0 || nb == 0.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

Row checked_query(const DetectorModel& model, const Eigen::VectorXd& query) {
  const Row q = model.project_query(query);
  if (!(q.norm() > 0.0)) throw ConfigError("query embedding has zero norm");
  return q;
}

}  // namespace

ScoreSeries score_frames(const DetectorModel& model, const Eigen::MatrixXd& embeddings,
                         const Eigen::VectorXd& query, ScoreWarnings* warnings) {
  const Row q = checked_query(model, query);
  const Sequence h = encode(model, embeddings);
  ScoreSeries out;
  out.scores.resize(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    bool zero = false;
    const double c = cosine_similarity(h.row(i), q, &zero);
    if (zero && warnings != nullptr) ++warnings->zero_norm_frames;
    out.scores[i] = kernels::internal::sigmoid(c / model.config.temperature);
  }
  return out;
}

namespace {

const double kLogitClamp = std::log((1.0 - kProbabilityClamp) / kProbabilityClamp);

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double positive_weight(std::span<const char> y, double cap) {
  std::size_t n_pos = 0;
  for (char v : y) n_pos += v != 0;
  const std::size_t n_neg = y.size() - n_pos;
  // With only one class present there is nothing to balance.
  if (n_pos == 0 || n_neg == 0) return 1.0;
  return std::min(cap, double(n_neg) / double(n_pos));
}

}  // namespace

LossBreakdown weighted_bce(std::span<const double> p, std::span<const char> y, double cap) {
  if (p.size() != y.size()) throw ConfigError("weighted_bce: p and y differ in length");
  LossBreakdown out;
  if (p.empty()) return out;
  out.positive_weight = positive_weight(y, cap);
  const double n = double(p.size());
  double pos = 0.0;
  double neg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    if (y[i]) {
      pos -= std::log(pi);
    } else {
      neg -= std::log(1.0 - pi);
    }
  }
  out.positive_term = out.positive_weight * pos / n;
  out.negative_term = neg / n;
  out.total = out.positive_term + out.negative_term;
  return out;
}

LossBreakdown weighted_bce_logits(std::span<const double> z, std::span<const char> y, double cap) {
  if (z.size() != y.size()) throw ConfigError("weighted_bce_logits: z and y differ in length");
  LossBreakdown out;
  if (z.empty()) return out;
  out.positive_weight = positive_weight(y, cap);
  const double n = double(z.size());
  double pos = 0.0;
  double neg = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = std::clamp(z[i], -kLogitClamp, kLogitClamp);
    if (y[i]) {
      pos += softplus(-zi);
    } else {
      neg += softplus(zi);
    }
  }
  out.positive_term = out.positive_weight * pos / n;
  out.negative_term = neg / n;
  out.total = out.positive_term + out.negative_term;
  return out;
}

namespace {

struct WindowPass {
  Eigen::MatrixXd x0;
  std::vector<kernels::BlockTape> tapes;
  Sequence h;
  Row q;
  std::vector<double> cos;
  std::vector<double> z;
};

void forward_window(const DetectorModel& model, const Sample& s, WindowPass& pass) {
  check_embeddings(model, s.embeddings);
  if (std::size_t(s.embeddings.rows()) != s.labels.size()) {
    throw ConfigError("sample labels and embeddings differ in length");
  }
  pass.q = checked_query(model, s.query);
  pass.x0 = s.embeddings * model.input_map;
  pass.tapes.resize(model.blocks.size());
  Sequence x = pass.x0;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    x = kernels::block_forward_taped(x, model.blocks[b], model.config.adapter, pass.tapes[b]);
  }
  pass.h = std::move(x);
  const auto n = static_cast<std::size_t>(pass.h.rows());
  pass.cos.resize(n);
  pass.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pass.cos[i] = cosine_similarity(pass.h.row(Eigen::Index(i)), pass.q);
    pass.z[i] = pass.cos[i] / model.config.temperature;
  }
}

void backward_window(const DetectorModel& model, const Sample& s, const WindowPass& pass,
                     double w_pos, double n_total, GradientSet& grad) {
  const double tau = model.config.temperature;
  const double qn = pass.q.norm();
  Sequence dh = Sequence::Zero(pass.h.rows(), pass.h.cols());
  for (Eigen::Index i = 0; i < pass.h.rows(); ++i) {
    // The loss clamps the logit; outside the clamp range it is flat.
    if (std::abs(pass.z[i]) > kLogitClamp) continue;
    const double p = kernels::internal::sigmoid(pass.z[i]);
    const bool y = s.labels[i] != 0;
    const double dlogit = (y ? w_pos * (p - 1.0) : p) / n_total;
    const double dcos = dlogit / tau;
    const Row hi = pass.h.row(i);
    const double hn = hi.norm();
    if (hn == 0.0) continue;
    dh.row(i) = dcos * (pass.q / (hn * qn) - pass.cos[i] * hi / (hn * hn));
  }
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    dh = kernels::block_backward(pass.tapes[b], dh, model.blocks[b], model.config.adapter,
                                 grad.blocks[b]);
  }
}

template <typename Fn>
void run_sharded(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w =
      std::clamp<std::size_t>(std::size_t(std::max(1, workers)), 1, std::max<std::size_t>(1, n));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

BackwardResult backward(const DetectorModel& model, std::span<const Sample> batch,
                        double pos_weight_cap, int workers) {
  std::vector<WindowPass> passes(batch.size());
  run_sharded(batch.size(), workers, [&](std::size_t i) { forward_window(model, batch[i], passes[i]); });

  std::vector<double> z;
  std::vector<char> y;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    z.insert(z.end(), passes[i].z.begin(), passes[i].z.end());
    y.insert(y.end(), batch[i].labels.begin(), batch[i].labels.end());
  }
  BackwardResult result;
  result.loss = weighted_bce_logits(z, y, pos_weight_cap);
  result.grads = GradientSet::zeros_like(model);
  if (z.empty()) return result;

  std::vector<GradientSet> per_window(batch.size());
  run_sharded(batch.size(), workers, [&](std::size_t i) {
    per_window[i] = GradientSet::zeros_like(model);
    backward_window(model, batch[i], passes[i], result.loss.positive_weight, double(z.size()),
                    per_window[i]);
  });
  for (const GradientSet& g : per_window) result.grads.add(g);

  result.grads.for_each([](const std::string& name, std::span<const double> s) {
    for (double v : s) {
      if (!std::isfinite(v)) throw NumericError(fmt::format("non-finite gradient in {}", name));
    }
  });
  return result;
}

LossBreakdown batch_loss(const DetectorModel& model, std::span<const Sample> batch,
                         double pos_weight_cap) {
  std::vector<double> z;
  std::vector<char> y;
  for (const Sample& s : batch) {
    if (std::size_t(s.embeddings.rows()) != s.labels.size()) {
      throw ConfigError("sample labels and embeddings differ in length");
    }
    const Row q = checked_query(model, s.query);
    const Sequence h = encode(model, s.embeddings);
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      z.push_back(cosine_similarity(h.row(i), q) / model.config.temperature);
    }
    y.insert(y.end(), s.labels.begin(), s.labels.end());
  }
  return weighted_bce_logits(z, y, pos_weight_cap);
}

StreamingDetector::StreamingDetector(const DetectorModel& model, const Eigen::VectorXd& query)
    : model_(&model), query_(checked_query(model, query)) {
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    states_.push_back(kernels::BlockState::fresh(model.config.adapter));
  }
}

double StreamingDetector::push(const Row& frame) {
  if (frame.size() != model_->config.d_in) {
    throw ConfigError(
        fmt::format("frame has dim {}, model expects {}", frame.size(), model_->config.d_in));
  }
  // Same product kernel as a one-row batch, so the first score matches it bitwise.
  Sequence x = Sequence(frame) * model_->input_map;
  for (std::size_t b = 0; b < model_->blocks.size(); ++b) {
    x = kernels::block_forward(x, model_->blocks[b], model_->config.adapter, states_[b]);
  }
  bool zero = false;
  const double c = cosine_similarity(x.row(0), query_, &zero);
  zero_norm_frames_ += zero;
  ++frames_seen_;
  return kernels::internal::sigmoid(c / model_->config.temperature);
}

std::int64_t StreamingDetector::last_adapter_macs() const {
  std::int64_t total = 0;
  for (const auto& s : states_) total += s.temporal.last_macs + s.pre_mlp.last_macs;
  return total;
}

ScoreSeries infer_streaming(const DetectorModel& model, FrameSource& frames,
                            const Eigen::VectorXd& query,
                            const std::function<void(std::int64_t, double)>& on_score) {
  StreamingDetector det(model, query);
  ScoreSeries out;
  const std::int64_t n = frames.size();
  out.scores.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, n)));
  for (std::int64_t i = 0; i < n; ++i) {
    const double score = det.push(frames.frame(i));
    out.scores.push_back(score);
    if (on_score) on_score(i, score);
  }
  return out;
}

std::string loss_curve_csv(std::span<const LossBreakdown> history) {
  std::string out = "step,total,pos_term,neg_term,w_pos\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossBreakdown& l = history[i];
    out += fmt::format("{},{},{},{},{}\n", i, l.total, l.positive_term, l.negative_term,
                       l.positive_weight);
  }
  return out;
}

}  // namespace streamstart::detector
