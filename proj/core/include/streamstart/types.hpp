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
#include <string>
#include <vector>

namespace streamstart {

enum class Split { kTrain, kVal };
enum class Source { kMoments, kNlq, kNarration };

std::string to_string(Split split);
std::string to_string(Source source);
// Throws SchemaError on unknown names.
Split parse_split(const std::string& text);
Source parse_source(const std::string& text);

// Closed interval in seconds.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// One queried event. start_sec is the ground-truth event start t_s.
struct EventAnnotation {
  Split split = Split::kTrain;
  Source source = Source::kMoments;
  std::string video_uid;
  std::string clip_uid;
  std::string annotator_uid;
  std::uint64_t ann_idx = 0;
  std::string query;
  std::string response;
  double start_sec = 0.0;
  double end_sec = 0.0;
  double video_fps = 1.0;
  double video_length = 0.0;

  // Key used to pair an annotation with its score series.
  std::string query_id() const { return std::to_string(ann_idx); }
  Interval interval() const { return {start_sec, end_sec}; }

  friend bool operator==(const EventAnnotation&,
                         const EventAnnotation&) = default;
};

// Asymmetric acceptance interval [t_s - anticipation, t_s + latency].
struct ToleranceWindow {
  double anticipation = 5.0;
  double latency = 10.0;

  friend bool operator==(const ToleranceWindow&,
                         const ToleranceWindow&) = default;
};

// Per-frame detection probabilities; scores[i] belongs to time i / fps.
struct ScoreSeries {
  std::string video_uid;
  std::string query_id;
  double fps = 1.0;
  std::vector<double> scores;

  double time_at(std::size_t i) const { return static_cast<double>(i) / fps; }
  double span_seconds() const {
    return static_cast<double>(scores.size()) / fps;
  }
};

}  // namespace streamstart
