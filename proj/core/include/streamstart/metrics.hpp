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
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamstart/types.hpp"

namespace streamstart::metrics {

enum class PredictionMode { kRisingEdge, kEveryFrame };

std::string to_string(PredictionMode mode);
PredictionMode parse_mode(const std::string& text);  // "edge" | "frame"

// Strictly increasing prediction times in seconds.
struct PredictionList {
  std::vector<double> times;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

struct MetricReport {
  double threshold = 0.0;
  ToleranceWindow window;
  std::map<int, double> sr;   // k -> streaming recall, percent
  std::map<int, double> smd;  // k -> mean minimum distance, seconds
  std::int64_t n_queries = 0;
  // Queries for which the model never fired; their SMD is the horizon.
  std::int64_t n_without_predictions = 0;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

PredictionList extract_predictions(const ScoreSeries& series, double threshold,
                                   PredictionMode mode = PredictionMode::kRisingEdge);

// t_s - anticipation <= t_out <= t_s + latency.
bool is_hit(double t_out, double t_s, const ToleranceWindow& w);

bool streaming_recall_at_k(const PredictionList& preds, double t_s, int k,
                           const ToleranceWindow& w);

// min |t_s - t_out| over the first k predictions; horizon when there are none.
double smd_at_k(const PredictionList& preds, double t_s, int k, double horizon);

struct EvalOptions {
  PredictionMode mode = PredictionMode::kRisingEdge;
  double threshold = 0.5;
  // Per-query work is sharded over this many threads. Results do not depend
  // on it.
  int workers = 1;
};

// Averages SR@k (percent) and SMD@k over all annotations. Each annotation is
// paired with the series whose (video_uid, query_id) matches. Throws
// IdMismatchError listing every annotation without a series.
MetricReport evaluate_dataset(std::span<const ScoreSeries> series,
                              std::span<const EventAnnotation> annotations,
                              std::span<const int> ks,
                              const ToleranceWindow& w,
                              const EvalOptions& options);

// n evenly spaced values over [lo, hi], endpoints included (numpy.linspace).
std::vector<double> linspace(double lo, double hi, int n);

struct SweepResult {
  double threshold = 0.0;
  MetricReport report;
  std::vector<double> candidates;
  std::vector<MetricReport> per_candidate;
};

// Evaluates n thresholds spread over [min score, max score] and keeps the
// one with the highest SR@objective_k; ties go to the larger threshold.
// Constant scores collapse to a single candidate.
SweepResult sweep_thresholds(std::span<const ScoreSeries> series,
                             std::span<const EventAnnotation> annotations,
                             std::span<const int> ks, const ToleranceWindow& w,
                             int n, int objective_k,
                             PredictionMode mode = PredictionMode::kRisingEdge,
                             int workers = 1);

}  // namespace streamstart::metrics
