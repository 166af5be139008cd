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

#include "streamstart/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "csv.hpp"
#include "streamstart/error.hpp"

namespace streamstart {

std::string to_string(Split split) {
  return split == Split::kTrain ? "train" : "val";
}

std::string to_string(Source source) {
  switch (source) {
    case Source::kMoments: return "moments";
    case Source::kNlq: return "nlq";
    case Source::kNarration: return "narration";
  }
  return "unknown";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  throw SchemaError(fmt::format("unknown split '{}'", text));
}

Source parse_source(const std::string& text) {
  if (text == "moments") return Source::kMoments;
  if (text == "nlq") return Source::kNlq;
  if (text == "narration") return Source::kNarration;
  throw SchemaError(fmt::format("unknown source '{}'", text));
}

}  // namespace streamstart

namespace streamstart::annotations {

namespace {

constexpr double kSlack = 1e-6;

double numeric_field(const internal::CsvRow& row, std::size_t col, const char* name,
                     std::size_t row_number) {
  double v = 0.0;
  if (!internal::parse_double(row[col], v) || !std::isfinite(v)) {
    throw SchemaError(fmt::format("row {}: column '{}' is not a number: '{}'", row_number,
                                  name, row[col]));
  }
  return v;
}

void validate(const EventAnnotation& a, std::size_t row_number) {
  auto fail = [&](const std::string& what) {
    throw SchemaError(fmt::format("row {}: {}", row_number, what));
  };
  if (a.start_sec > a.end_sec) {
    fail(fmt::format("start_sec {} > end_sec {}", a.start_sec, a.end_sec));
  }
  if (a.start_sec < 0.0) fail(fmt::format("start_sec {} is negative", a.start_sec));
  if (!(a.video_fps > 0.0)) fail(fmt::format("video_fps {} must be > 0", a.video_fps));
  if (!(a.video_length > 0.0)) {
    fail(fmt::format("video_length {} must be > 0", a.video_length));
  }
  if (a.end_sec > a.video_length + kSlack) {
    fail(fmt::format("end_sec {} exceeds video_length {}", a.end_sec, a.video_length));
  }
  if (a.query.empty()) fail("query is empty");
}

}  // namespace

std::vector<EventAnnotation> parse_annotations(std::string_view csv) {
  const std::vector<internal::CsvRow> rows = internal::parse_csv(csv);
  if (rows.empty()) throw SchemaError("annotation CSV has no header row");

  std::unordered_map<std::string, std::size_t> header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header.emplace(rows[0][i], i);
  std::size_t col[std::size(kColumns)];
  for (std::size_t c = 0; c < std::size(kColumns); ++c) {
    const auto it = header.find(kColumns[c]);
    if (it == header.end()) {
      throw SchemaError(fmt::format("annotation CSV is missing column '{}'", kColumns[c]));
    }
    col[c] = it->second;
  }

  std::vector<EventAnnotation> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const internal::CsvRow& row = rows[r];
    if (row.size() < rows[0].size()) {
      throw SchemaError(fmt::format("row {}: expected {} fields, found {}", r,
                                    rows[0].size(), row.size()));
    }
    EventAnnotation a;
    try {
      a.split = parse_split(row[col[0]]);
      a.source = parse_source(row[col[1]]);
    } catch (const SchemaError& e) {
      throw SchemaError(fmt::format("row {}: {}", r, e.what()));
    }
    a.video_uid = row[col[2]];
    a.clip_uid = row[col[3]];
    a.annotator_uid = row[col[4]];
    unsigned long long idx = 0;
    if (!internal::parse_uint(row[col[5]], idx)) {
      throw SchemaError(fmt::format("row {}: column 'ann_idx' is not a nonnegative integer: '{}'",
                                    r, row[col[5]]));
    }
    a.ann_idx = idx;
    a.query = row[col[6]];
    a.response = row[col[7]];
    a.start_sec = numeric_field(row, col[8], "start_sec", r);
    a.end_sec = numeric_field(row, col[9], "end_sec", r);
    a.video_fps = numeric_field(row, col[10], "video_fps", r);
    a.video_length = numeric_field(row, col[11], "video_length", r);
    validate(a, r);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<EventAnnotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open annotations '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_annotations(buf.str());
}

std::string serialize_annotations(std::span<const EventAnnotation> rows) {
  std::string out = internal::join_csv(
      internal::CsvRow(std::begin(kColumns), std::end(kColumns)));
  out += "\n";
  for (const EventAnnotation& a : rows) {
    out += internal::join_csv({to_string(a.split), to_string(a.source), a.video_uid,
                               a.clip_uid, a.annotator_uid, std::to_string(a.ann_idx),
                               a.query, a.response, internal::format_double(a.start_sec),
                               internal::format_double(a.end_sec),
                               internal::format_double(a.video_fps),
                               internal::format_double(a.video_length)});
    out += "\n";
  }
  return out;
}

void save_annotations(const std::filesystem::path& path,
                      std::span<const EventAnnotation> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << serialize_annotations(rows);
}

double interval_iou(Interval a, Interval b) {
  const double inter = std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
  const double union_len = a.length() + b.length() - inter;
  if (union_len <= 0.0) return 0.0;
  return std::clamp(inter / union_len, 0.0, 1.0);
}

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

CollisionSummary find_collisions(std::span<const EventAnnotation> rows,
                                 double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError(fmt::format("iou_threshold {} must lie in (0, 1]", iou_threshold));
  }
  // Only annotations of the same video with the same label can collide.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    by_label[{rows[i].video_uid, rows[i].query}].push_back(i);
  }

  CollisionSummary summary;
  DisjointSet sets(rows.size());
  for (const auto& [label, members] : by_label) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const std::size_t i = members[a];
        const std::size_t j = members[b];
        if (interval_iou(rows[i].interval(), rows[j].interval()) >= iou_threshold) {
          ++summary.n_pairs;
          sets.join(i, j);
        }
      }
    }
  }
  if (summary.n_pairs == 0) {
    throw ConfigError(
        "no annotation collisions found; supply an explicit tolerance window "
        "(--anticipation/--latency)");
  }
  // Sum over members in index order so the result is order-stable per group.
  std::map<std::size_t, std::vector<double>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    groups[sets.find(i)].push_back(rows[i].start_sec);
  }
  double variance_sum = 0.0;
  for (auto& [root, starts] : groups) {
    if (starts.size() < 2) continue;
    std::sort(starts.begin(), starts.end());
    const double n = double(starts.size());
    const double mean = std::accumulate(starts.begin(), starts.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : starts) ss += (s - mean) * (s - mean);
    variance_sum += ss / n;
    ++summary.n_groups;
  }
  summary.mean_variance = variance_sum / double(summary.n_groups);
  return summary;
}

ToleranceWindow tolerance_from_variance(double sigma2, double fps) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
    throw ConfigError(fmt::format("variance {} must be finite and >= 0", sigma2));
  }
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
  const double sigma = std::sqrt(sigma2);
  constexpr double kEps = 1e-9;
  return {std::floor(sigma * fps + kEps) / fps, std::floor(2.0 * sigma * fps + kEps) / fps};
}

ToleranceWindow derive_tolerance(std::span<const EventAnnotation> rows, double iou_threshold,
                                 double fps) {
  return tolerance_from_variance(find_collisions(rows, iou_threshold).mean_variance, fps);
}

std::int64_t frame_count(double video_length, double fps) {
  return static_cast<std::int64_t>(std::floor(video_length * fps + 1e-9));
}

TrainingWindow window_at(const EventAnnotation& annotation, std::int64_t first_frame,
                         std::int64_t w_s, double fps) {
  TrainingWindow w;
  w.video_uid = annotation.video_uid;
  w.query = annotation.query;
  w.first_frame = first_frame;
  w.frame_times.resize(static_cast<std::size_t>(w_s));
  w.labels.resize(static_cast<std::size_t>(w_s));
  for (std::int64_t j = 0; j < w_s; ++j) {
    const double t = double(first_frame + j) / fps;
    w.frame_times[j] = t;
    w.labels[j] = t >= annotation.start_sec && t <= annotation.end_sec;
  }
  return w;
}

TrainingWindow sample_windows(const EventAnnotation& annotation, std::int64_t w_s, double fps,
                              std::uint64_t seed, double p_pos) {
  if (w_s < 1) throw ConfigError("w_s must be >= 1");
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
  const std::int64_t n = frame_count(annotation.video_length, fps);
  if (n < w_s) {
    throw ConfigError(fmt::format("video '{}' has {} frames at {} fps, shorter than w_s={}",
                                  annotation.video_uid, n, fps, w_s));
  }
  std::mt19937_64 rng(seed);
  const std::int64_t last_start = n - w_s;
  std::int64_t lo = 0;
  std::int64_t hi = last_start;
  if (std::bernoulli_distribution(std::clamp(p_pos, 0.0, 1.0))(rng)) {
    const auto event_lo = static_cast<std::int64_t>(std::ceil(annotation.start_sec * fps - 1e-9));
    const auto event_hi = static_cast<std::int64_t>(std::floor(annotation.end_sec * fps + 1e-9));
    const std::int64_t pos_lo = std::max<std::int64_t>(0, event_lo - w_s + 1);
    const std::int64_t pos_hi = std::min(last_start, event_hi);
    if (event_lo <= event_hi && pos_lo <= pos_hi) {
      lo = pos_lo;
      hi = pos_hi;
    }
  }
  const std::int64_t start = std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  return window_at(annotation, start, w_s, fps);
}

}  // namespace streamstart::annotations
