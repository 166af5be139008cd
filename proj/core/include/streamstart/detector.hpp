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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "streamstart/kernels.hpp"
#include "streamstart/kernels_grad.hpp"
#include "streamstart/types.hpp"

namespace streamstart::detector {

using kernels::Row;
using kernels::Sequence;

struct DetectorConfig {
  kernels::AdapterConfig adapter;
  int d_in = 64;
  int n_blocks = 2;
  int mlp_hidden = 128;
  // Std multiplier of the seeded frozen spatial/MLP weights.
  double frozen_scale = 0.5;
  std::uint64_t frozen_seed = 0xF20Eull;
  // p = sigmoid(cos / temperature).
  double temperature = 0.07;

  void validate() const;
  nlohmann::json to_json() const;
  static DetectorConfig from_json(const nlohmann::json& j);
  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

// Frozen input projection, L blocks of (frozen map + two adapters) and a
// cosine/sigmoid scoring head. Only adapter weights are trainable.
struct DetectorModel {
  DetectorConfig config;
  Eigen::MatrixXd input_map;  // frozen, d_in x d
  std::vector<kernels::BlockParams> blocks;

  static DetectorModel create(const DetectorConfig& config, std::uint64_t adapter_seed);

  // Visits trainable tensors as fn("block0.temporal.down_w", span).
  template <typename Fn>
  void for_each_trainable(Fn&& fn);
  template <typename Fn>
  void for_each_trainable(Fn&& fn) const;

  std::size_t trainable_count() const;
  // Image of a query in model space (same frozen input map as the frames).
  Row project_query(const Eigen::VectorXd& query) const;
};

struct GradientSet {
  std::vector<kernels::BlockGrad> blocks;

  static GradientSet zeros_like(const DetectorModel& model);
  template <typename Fn>
  void for_each(Fn&& fn);
  template <typename Fn>
  void for_each(Fn&& fn) const;
  void add(const GradientSet& other);
};

// Runs the block stack over a whole sequence from fresh states.
Sequence encode(const DetectorModel& model, const Eigen::MatrixXd& embeddings);

struct ScoreWarnings {
  std::int64_t zero_norm_frames = 0;
};

double cosine_similarity(const Row& a, const Row& b, bool* zero_norm = nullptr);

// p_i = sigmoid(cos(model(e_i), query) / temperature) over a whole sequence.
ScoreSeries score_frames(const DetectorModel& model, const Eigen::MatrixXd& embeddings,
                         const Eigen::VectorXd& query, ScoreWarnings* warnings = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double positive_term = 0.0;  // -(w+/N) sum y log p
  double negative_term = 0.0;  // -(1/N) sum (1-y) log(1-p)
  double positive_weight = 1.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

// L = -(1/N) sum [w+ y log p + (1-y) log(1-p)], w+ = min(cap, N_neg/N_pos), or 1
// when the batch holds a single class.
LossBreakdown weighted_bce(std::span<const double> p, std::span<const char> y,
                           double cap);

// Same loss from logits z (p = sigmoid(z)), evaluated with softplus so it stays
// accurate when p is close to 0 or 1. The clamp on p becomes a clamp on z.
LossBreakdown weighted_bce_logits(std::span<const double> z, std::span<const char> y,
                                  double cap);

struct Sample {
  Eigen::MatrixXd embeddings;  // [w_s x d_in]
  Eigen::VectorXd query;       // d_in
  std::vector<char> labels;    // w_s
};

struct BackwardResult {
  LossBreakdown loss;
  GradientSet grads;
};

// Forward + reverse pass over a batch with dense per-frame supervision.
// Window passes run on up to `workers` threads; per-window gradients are
// reduced in window order. Throws NumericError naming the first tensor with a
// non-finite gradient.
BackwardResult backward(const DetectorModel& model, std::span<const Sample> batch,
                        double pos_weight_cap, int workers = 1);

// Loss only; what backward differentiates.
LossBreakdown batch_loss(const DetectorModel& model, std::span<const Sample> batch,
                         double pos_weight_cap);

enum class Optimizer { kAdam, kSgdMomentum };

struct TrainConfig {
  int w_s = 60;
  double fps = 1.0;
  double learning_rate = 1e-4;
  int steps = 1000;
  int batch_size = 8;
  double pos_weight_cap = 20.0;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled decay: each step also applies p -= learning_rate * weight_decay * p.
  double weight_decay = 0.0;
  double p_pos = 0.5;
  double divergence_limit = 1e3;
  int workers = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// One full stream with its annotation; training windows are cut from it.
struct TrainingExample {
  Eigen::MatrixXd embeddings;  // [n_frames x d_in]
  Eigen::VectorXd query;
  EventAnnotation annotation;
};

struct TrainResult {
  DetectorModel model;
  std::vector<LossBreakdown> history;
  bool diverged = false;
};

// Deterministic for a fixed seed regardless of worker count. Stops early and
// sets `diverged` when the loss exceeds config.divergence_limit.
TrainResult train(DetectorModel model, std::span<const TrainingExample> data,
                  const TrainConfig& config);

// Cuts the training batch for one optimizer step.
std::vector<Sample> draw_batch(std::span<const TrainingExample> data,
                               const TrainConfig& config, std::int64_t step);

// Random-access frame provider for streaming inference.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::int64_t size() const = 0;
  virtual Row frame(std::int64_t index) = 0;
};

class MatrixFrameSource : public FrameSource {
 public:
  explicit MatrixFrameSource(const Eigen::MatrixXd& frames) : frames_(frames) {}
  std::int64_t size() const override { return frames_.rows(); }
  Row frame(std::int64_t index) override { return frames_.row(index); }

 private:
  const Eigen::MatrixXd& frames_;
};

// Per-stream carried state: one (temporal, pre-MLP) pair per block.
class StreamingDetector {
 public:
  StreamingDetector(const DetectorModel& model, const Eigen::VectorXd& query);

  // Scores the newest frame; the state then reflects every pushed frame.
  double push(const Row& frame);
  std::int64_t frames_seen() const { return frames_seen_; }
  // Multiply-adds spent by adapters on the last push.
  std::int64_t last_adapter_macs() const;
  std::int64_t zero_norm_frames() const { return zero_norm_frames_; }

 private:
  const DetectorModel* model_;
  Row query_;
  std::vector<kernels::BlockState> states_;
  std::int64_t frames_seen_ = 0;
  std::int64_t zero_norm_frames_ = 0;
};

// Scores frames one at a time; frame i is read only after score i - 1 was
// emitted. on_score, when set, fires as each score is produced.
ScoreSeries infer_streaming(const DetectorModel& model, FrameSource& frames,
                            const Eigen::VectorXd& query,
                            const std::function<void(std::int64_t, double)>& on_score = {});

// Binary checkpoint; layout in docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const DetectorModel& model);
DetectorModel parse_checkpoint(std::string_view bytes);

// Loss curve CSV: step,total,pos_term,neg_term,w_pos
std::string loss_curve_csv(std::span<const LossBreakdown> history);

namespace detail {

// BlockParams and BlockGrad both expose .temporal and .pre_mlp.
template <typename Blocks, typename Fn>
void visit_blocks(Blocks& blocks, Fn& fn) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b);
    blocks[b].temporal.for_each([&](std::string_view name, auto span) {
      fn(prefix + ".temporal." + std::string(name), span);
    });
    blocks[b].pre_mlp.for_each([&](std::string_view name, auto span) {
      fn(prefix + ".pre_mlp." + std::string(name), span);
    });
  }
}

}  // namespace detail

template <typename Fn>
void DetectorModel::for_each_trainable(Fn&& fn) {
  detail::visit_blocks(blocks, fn);
}
template <typename Fn>
void DetectorModel::for_each_trainable(Fn&& fn) const {
  detail::visit_blocks(blocks, fn);
}
template <typename Fn>
void GradientSet::for_each(Fn&& fn) {
  detail::visit_blocks(blocks, fn);
}
template <typename Fn>
void GradientSet::for_each(Fn&& fn) const {
  detail::visit_blocks(blocks, fn);
}

}  // namespace streamstart::detector
