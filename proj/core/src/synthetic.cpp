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

#include <fmt/format.h>

#include "random_util.hpp"
#include "streamstart/annotations.hpp"
#include "streamstart/error.hpp"

namespace streamstart::annotations {

Eigen::MatrixXd backbone_map(std::int64_t dim, std::uint64_t seed) {
  internal::Rng rng(seed);
  const Eigen::MatrixXd g = internal::gaussian(dim, dim, 1.0, rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  Eigen::VectorXd s(dim);
  for (std::int64_t i = 0; i < dim; ++i) s(i) = scale(rng);
  return q * s.asDiagonal();
}

SyntheticStream gen_synthetic(const SyntheticStreamSpec& spec, std::int64_t query_dim) {
  if (spec.dim != query_dim) {
    throw ConfigError(fmt::format("synthetic dim {} != query_dim {}", spec.dim, query_dim));
  }
  if (spec.n_frames < 1 || spec.dim < 1) throw ConfigError("n_frames and dim must be >= 1");
  if (!(spec.fps > 0.0)) throw ConfigError("fps must be > 0");
  if (!(spec.noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");
  const double length = double(spec.n_frames) / spec.fps;
  const Interval ev = spec.event_interval;
  if (ev.lo < 0.0 || ev.lo > ev.hi || ev.hi > length) {
    throw ConfigError(fmt::format("event interval [{}, {}] not inside [0, {}]", ev.lo, ev.hi,
                                  length));
  }

  internal::Rng rng(spec.seed);
  const auto dim = spec.dim;
  Eigen::RowVectorXd q = internal::gaussian(1, dim, 1.0, rng);
  q /= q.norm();

  // Background frames match the expected squared norm of event frames:
  // E|q + n|^2 = 1 + dim * noise^2.
  const double bg_std = std::sqrt(1.0 / double(dim) + spec.noise_scale * spec.noise_scale);
  std::normal_distribution<double> event_noise(0.0, spec.noise_scale);
  std::normal_distribution<double> background(0.0, bg_std);
  Eigen::MatrixXd raw(spec.n_frames, dim);
  for (std::int64_t i = 0; i < spec.n_frames; ++i) {
    const double t = double(i) / spec.fps;
    const bool inside = t >= ev.lo && t <= ev.hi;
    for (std::int64_t c = 0; c < dim; ++c) {
      raw(i, c) = inside ? q(c) + (spec.noise_scale > 0.0 ? event_noise(rng) : 0.0)
                         : background(rng);
    }
  }

  const Eigen::MatrixXd map = backbone_map(dim, spec.backbone_seed);
  SyntheticStream out;
  out.frames = raw * map;
  out.query = (q * map).transpose();
  EventAnnotation& a = out.annotation;
  a.split = Split::kTrain;
  a.source = Source::kMoments;
  a.video_uid = fmt::format("synth-{:016x}", spec.seed);
  a.clip_uid = a.video_uid;
  a.annotator_uid = "synthetic";
  a.ann_idx = 0;
  a.query = fmt::format("synthetic event {:016x}", spec.seed);
  a.start_sec = ev.lo;
  a.end_sec = ev.hi;
  a.video_fps = spec.fps;
  a.video_length = length;
  return out;
}

void SyntheticCorpusSpec::validate() const {
  if (n_train < 0 || n_val < 0 || n_train + n_val < 1) {
    throw ConfigError("corpus needs at least one stream");
  }
  if (n_frames < 1 || dim < 1) throw ConfigError("n_frames and dim must be >= 1");
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
  if (!(min_event_sec >= 0.0) || min_event_sec > max_event_sec) {
    throw ConfigError("need 0 <= min_event_sec <= max_event_sec");
  }
  const double length = double(n_frames) / fps;
  if (!(min_start_sec >= 0.0) || min_start_sec + max_event_sec > length) {
    throw ConfigError(fmt::format("events of up to {} s starting at {} s do not fit in {} s",
                                  max_event_sec, min_start_sec, length));
  }
}

std::vector<SyntheticStream> gen_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  const double length = double(spec.n_frames) / spec.fps;
  const std::int64_t total = spec.n_train + spec.n_val;
  std::vector<SyntheticStream> out;
  out.reserve(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) {
    internal::Rng rng(internal::mix_seed(spec.seed, std::uint64_t(i)));
    std::uniform_real_distribution<double> event_len(spec.min_event_sec, spec.max_event_sec);
    const double len = event_len(rng);
    std::uniform_real_distribution<double> start(spec.min_start_sec, length - len);
    // Snap the start to a frame time so labels and ground truth agree.
    const double t0 = std::floor(start(rng) * spec.fps) / spec.fps;
    SyntheticStreamSpec s;
    s.n_frames = spec.n_frames;
    s.dim = spec.dim;
    s.event_interval = {t0, std::min(length, t0 + len)};
    s.noise_scale = spec.noise_scale;
    s.seed = rng();
    s.fps = spec.fps;
    s.backbone_seed = spec.backbone_seed;
    SyntheticStream stream = gen_synthetic(s, spec.dim);
    EventAnnotation& a = stream.annotation;
    a.split = i < spec.n_train ? Split::kTrain : Split::kVal;
    a.video_uid = fmt::format("synth-{:05d}", i);
    a.clip_uid = a.video_uid;
    a.ann_idx = std::uint64_t(i);
    a.query = fmt::format("synthetic event {}", i);
    out.push_back(std::move(stream));
  }
  return out;
}

}  // namespace streamstart::annotations
