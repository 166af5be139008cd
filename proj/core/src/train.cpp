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

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "random_util.hpp"
#include "streamstart/annotations.hpp"
#include "streamstart/detector.hpp"
#include "streamstart/error.hpp"

namespace streamstart::detector {

namespace {

std::string to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& text) {
  if (text == "adam") return Optimizer::kAdam;
  if (text == "sgd") return Optimizer::kSgdMomentum;
  throw ConfigError(fmt::format("unknown optimizer '{}' (adam|sgd)", text));
}

}  // namespace

void TrainConfig::validate() const {
  if (w_s < 1) throw ConfigError("w_s must be >= 1");
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and > 0");
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(pos_weight_cap > 0.0)) throw ConfigError("pos_weight_cap must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(p_pos >= 0.0 && p_pos <= 1.0)) throw ConfigError("p_pos must lie in [0, 1]");
  if (!(divergence_limit > 0.0)) throw ConfigError("divergence_limit must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"w_s", w_s},
          {"fps", fps},
          {"learning_rate", learning_rate},
          {"steps", steps},
          {"batch_size", batch_size},
          {"pos_weight_cap", pos_weight_cap},
          {"seed", seed},
          {"optimizer", to_string(optimizer)},
          {"momentum", momentum},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"weight_decay", weight_decay},
          {"p_pos", p_pos},
          {"divergence_limit", divergence_limit}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.w_s = j.value("w_s", c.w_s);
    c.fps = j.value("fps", c.fps);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.pos_weight_cap = j.value("pos_weight_cap", c.pos_weight_cap);
    c.seed = j.value("seed", c.seed);
    c.optimizer = parse_optimizer(j.value("optimizer", std::string("adam")));
    c.momentum = j.value("momentum", c.momentum);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.p_pos = j.value("p_pos", c.p_pos);
    c.divergence_limit = j.value("divergence_limit", c.divergence_limit);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("bad train config JSON: {}", e.what()));
  }
}

std::vector<Sample> draw_batch(std::span<const TrainingExample> data, const TrainConfig& config,
                               std::int64_t step) {
  if (data.empty()) throw ConfigError("training data is empty");
  std::vector<Sample> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int b = 0; b < config.batch_size; ++b) {
    const std::uint64_t seed = internal::mix_seed(
        config.seed, std::uint64_t(step) * std::uint64_t(config.batch_size) + std::uint64_t(b));
    internal::Rng rng(seed);
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng);
    const TrainingExample& ex = data[pick];
    const annotations::TrainingWindow w = annotations::sample_windows(
        ex.annotation, config.w_s, config.fps, internal::mix_seed(seed, 1), config.p_pos);
    if (w.first_frame + config.w_s > ex.embeddings.rows()) {
      throw ConfigError(fmt::format("stream '{}' has {} frames; window needs {}",
                                    ex.annotation.video_uid, ex.embeddings.rows(),
                                    w.first_frame + config.w_s));
    }
    Sample s;
    s.embeddings = ex.embeddings.middleRows(w.first_frame, config.w_s);
    s.query = ex.query;
    s.labels = w.labels;
    batch.push_back(std::move(s));
  }
  return batch;
}

TrainResult train(DetectorModel model, std::span<const TrainingExample> data,
                  const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw ConfigError("training data is empty");
  TrainResult result{std::move(model), {}, false};

  // Optimizer moments, one flat vector per trainable tensor.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  result.model.for_each_trainable([&](const std::string&, std::span<const double> s) {
    m.emplace_back(s.size(), 0.0);
    v.emplace_back(s.size(), 0.0);
  });

  for (int step = 0; step < config.steps; ++step) {
    const std::vector<Sample> batch = draw_batch(data, config, step);
    BackwardResult br = backward(result.model, batch, config.pos_weight_cap, config.workers);
    result.history.push_back(br.loss);
    if (!std::isfinite(br.loss.total) || br.loss.total > config.divergence_limit) {
      result.diverged = true;
      break;
    }
    std::vector<std::span<const double>> grads;
    br.grads.for_each([&](const std::string&, std::span<const double> s) { grads.push_back(s); });
    const double t = double(step + 1);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    std::size_t idx = 0;
    result.model.for_each_trainable([&](const std::string&, std::span<double> p) {
      const std::span<const double> g = grads[idx];
      std::vector<double>& mi = m[idx];
      std::vector<double>& vi = v[idx];
      ++idx;
      for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] -= config.learning_rate * config.weight_decay * p[j];
        if (config.optimizer == Optimizer::kAdam) {
          mi[j] = config.beta1 * mi[j] + (1.0 - config.beta1) * g[j];
          vi[j] = config.beta2 * vi[j] + (1.0 - config.beta2) * g[j] * g[j];
          p[j] -= config.learning_rate * (mi[j] / bc1) / (std::sqrt(vi[j] / bc2) + config.epsilon);
        } else {
          mi[j] = config.momentum * mi[j] + g[j];
          p[j] -= config.learning_rate * mi[j];
        }
      }
    });
  }
  return result;
}

}  // namespace streamstart::detector
