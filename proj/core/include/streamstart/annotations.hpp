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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "streamstart/types.hpp"

namespace streamstart::annotations {

// Column names of the annotation CSV. Header order is free.
inline constexpr const char* kColumns[] = {
    "split",     "source",    "video_uid", "clip_uid",
    "annotator_uid", "ann_idx", "query",     "response",
    "start_sec", "end_sec",   "video_fps", "video_length"};

// Parses RFC-4180 CSV text with a header row. Rows keep file order.
// Throws SchemaError for missing columns, unparseable numbers or invariant
// violations; messages carry the 1-based data row number.
std::vector<EventAnnotation> parse_annotations(std::string_view csv);
std::vector<EventAnnotation> load_annotations(const std::filesystem::path& path);

// Writes the canonical column order. Numbers use shortest round-trip form,
// so parse(serialize(x)) == x.
std::string serialize_annotations(std::span<const EventAnnotation> rows);
void save_annotations(const std::filesystem::path& path,
                      std::span<const EventAnnotation> rows);

// |a ∩ b| / |a ∪ b|; 0 for a zero-length union.
double interval_iou(Interval a, Interval b);

struct CollisionSummary {
  std::size_t n_pairs = 0;
  std::size_t n_groups = 0;
  double mean_variance = 0.0;  // sigma^2 in s^2
};

// Groups annotations of one video whose labels (query text) are identical and whose
// intervals reach iou_threshold, transitively. Each group contributes the
// population variance of its start times; the result is their plain mean.
// Throws ConfigError when no pair collides.
CollisionSummary find_collisions(std::span<const EventAnnotation> rows,
                                 double iou_threshold);

// anticipation = floor(sigma * fps) / fps, latency = floor(2 sigma fps) / fps.
ToleranceWindow tolerance_from_variance(double sigma2, double fps);

ToleranceWindow derive_tolerance(std::span<const EventAnnotation> rows,
                                 double iou_threshold, double fps);

struct TrainingWindow {
  std::string video_uid;
  std::int64_t first_frame = 0;    // index of frame_times[0] in the video
  std::vector<double> frame_times;  // (first_frame + j) / fps
  std::vector<char> labels;         // 1 iff frame time in [start, end]
  std::string query;

  std::size_t size() const { return frame_times.size(); }
};

// Number of whole frames available in a video at the given rate.
std::int64_t frame_count(double video_length, double fps);

// Samples a w_s-frame window. With probability p_pos the start is drawn
// among windows that contain at least one event frame, otherwise among all
// windows. Throws ConfigError when the video is shorter than w_s frames.
TrainingWindow sample_windows(const EventAnnotation& annotation,
                              std::int64_t w_s, double fps,
                              std::uint64_t seed, double p_pos = 0.5);

// Labels for a fixed window position.
TrainingWindow window_at(const EventAnnotation& annotation,
                         std::int64_t first_frame, std::int64_t w_s,
                         double fps);

inline constexpr std::uint64_t kDefaultBackboneSeed = 0x5D0E5u;

struct SyntheticStreamSpec {
  std::int64_t n_frames = 60;
  std::int64_t dim = 64;
  Interval event_interval;
  double noise_scale = 0.1;
  std::uint64_t seed = 0;
  double fps = 1.0;
  // The "frozen backbone" map is shared by every stream of a corpus.
  std::uint64_t backbone_seed = kDefaultBackboneSeed;
};

struct SyntheticStream {
  Eigen::MatrixXd frames;  // [n_frames x dim], after the backbone map
  Eigen::VectorXd query;   // backbone-mapped query embedding
  EventAnnotation annotation;
};

// Fixed seeded near-orthogonal map standing in for a frozen image encoder.
Eigen::MatrixXd backbone_map(std::int64_t dim, std::uint64_t seed);

// Event frames: query + noise; other frames: noise with the same expected
// squared norm. Noise is Gaussian with per-component std noise_scale.
// Throws ConfigError if dim != query_dim, n_frames < 1 or the event interval
// falls outside the stream.
SyntheticStream gen_synthetic(const SyntheticStreamSpec& spec,
                              std::int64_t query_dim);

struct SyntheticCorpusSpec {
  std::int64_t n_train = 200;
  std::int64_t n_val = 50;
  std::int64_t n_frames = 90;
  std::int64_t dim = 12;
  double noise_scale = 0.3;
  double fps = 1.0;
  // Event length in seconds, drawn uniformly per stream.
  double min_event_sec = 5.0;
  double max_event_sec = 20.0;
  // Earliest event start; keeps some background before every event.
  double min_start_sec = 5.0;
  std::uint64_t seed = 0;
  std::uint64_t backbone_seed = kDefaultBackboneSeed;

  void validate() const;
};

// Streams 0..n_train-1 are the train split, the rest val. Stream i has
// video_uid "synth-<i>" (zero padded to 5 digits) and ann_idx i.
std::vector<SyntheticStream> gen_corpus(const SyntheticCorpusSpec& spec);

}  // namespace streamstart::annotations
