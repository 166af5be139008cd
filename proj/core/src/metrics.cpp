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

#include "streamstart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <utility>

#include <fmt/format.h>

#include "streamstart/error.hpp"

namespace streamstart::metrics {

std::string to_string(PredictionMode mode) {
  return mode == PredictionMode::kRisingEdge ? "edge" : "frame";
}

PredictionMode parse_mode(const std::string& text) {
  if (text == "edge" || text == "rising_edge") return PredictionMode::kRisingEdge;
  if (text == "frame" || text == "every_frame") return PredictionMode::kEveryFrame;
  throw ConfigError(fmt::format("unknown prediction mode '{}' (edge|frame)", text));
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["window"] = {{"anticipation", window.anticipation}, {"latency", window.latency}};
  nlohmann::json sr_j = nlohmann::json::object();
  for (const auto& [k, v] : sr) sr_j[std::to_string(k)] = v;
  nlohmann::json smd_j = nlohmann::json::object();
  for (const auto& [k, v] : smd) smd_j[std::to_string(k)] = v;
  j["sr"] = sr_j;
  j["smd"] = smd_j;
  j["n_queries"] = n_queries;
  j["n_without_predictions"] = n_without_predictions;
  return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.threshold = j.at("threshold").get<double>();
  r.window.anticipation = j.at("window").at("anticipation").get<double>();
  r.window.latency = j.at("window").at("latency").get<double>();
  for (const auto& [k, v] : j.at("sr").items()) r.sr[std::stoi(k)] = v.get<double>();
  for (const auto& [k, v] : j.at("smd").items()) r.smd[std::stoi(k)] = v.get<double>();
  r.n_queries = j.at("n_queries").get<std::int64_t>();
  r.n_without_predictions = j.value("n_without_predictions", std::int64_t{0});
  return r;
}

PredictionList extract_predictions(const ScoreSeries& series, double threshold,
                                   PredictionMode mode) {
  PredictionList out;
  const auto& s = series.scores;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < threshold) continue;
    if (mode == PredictionMode::kRisingEdge && i > 0 && s[i - 1] >= threshold) continue;
    out.times.push_back(series.time_at(i));
  }
  return out;
}

bool is_hit(double t_out, double t_s, const ToleranceWindow& w) {
  return t_s - w.anticipation <= t_out && t_out <= t_s + w.latency;
}

bool streaming_recall_at_k(const PredictionList& preds, double t_s, int k,
                           const ToleranceWindow& w) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const std::size_t n = std::min<std::size_t>(std::size_t(k), preds.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (is_hit(preds.times[i], t_s, w)) return true;
  }
  return false;
}

double smd_at_k(const PredictionList& preds, double t_s, int k, double horizon) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (preds.empty()) return horizon;
  const std::size_t n = std::min<std::size_t>(std::size_t(k), preds.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) best = std::min(best, std::abs(t_s - preds.times[i]));
  return best;
}

namespace {

struct QueryOutcome {
  std::vector<char> hit;     // per k
  std::vector<double> dist;  // per k
  bool empty = false;
};

std::vector<const ScoreSeries*> match_series(std::span<const ScoreSeries> series,
                                             std::span<const EventAnnotation> annotations) {
  std::map<std::pair<std::string, std::string>, const ScoreSeries*> index;
  for (const ScoreSeries& s : series) index[{s.video_uid, s.query_id}] = &s;
  std::vector<const ScoreSeries*> matched(annotations.size(), nullptr);
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto it = index.find({annotations[i].video_uid, annotations[i].query_id()});
    if (it == index.end()) {
      missing.push_back(
          fmt::format("({}, {})", annotations[i].video_uid, annotations[i].query_id()));
    } else {
      matched[i] = it->second;
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i > 0) list += ", ";
      list += missing[i];
    }
    throw IdMismatchError(
        fmt::format("{} annotation(s) without a score series: {}", missing.size(), list));
  }
  return matched;
}

}  // namespace

MetricReport evaluate_dataset(std::span<const ScoreSeries> series,
                              std::span<const EventAnnotation> annotations,
                              std::span<const int> ks, const ToleranceWindow& w,
                              const EvalOptions& options) {
  if (ks.empty()) throw ConfigError("at least one k is required");
  for (int k : ks) {
    if (k < 1) throw ConfigError(fmt::format("k={} must be >= 1", k));
  }
  if (!(w.anticipation >= 0.0 && w.latency >= 0.0) || !std::isfinite(w.anticipation) ||
      !std::isfinite(w.latency)) {
    throw ConfigError("tolerance window bounds must be finite and >= 0");
  }
  const std::vector<const ScoreSeries*> matched = match_series(series, annotations);

  std::vector<QueryOutcome> outcomes(annotations.size());
  auto evaluate_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ScoreSeries& s = *matched[i];
      const PredictionList preds = extract_predictions(s, options.threshold, options.mode);
      const double t_s = annotations[i].start_sec;
      QueryOutcome& o = outcomes[i];
      o.empty = preds.empty();
      for (int k : ks) {
        o.hit.push_back(streaming_recall_at_k(preds, t_s, k, w));
        o.dist.push_back(smd_at_k(preds, t_s, k, s.span_seconds()));
      }
    }
  };

  const std::size_t n = annotations.size();
  const std::size_t workers =
      std::clamp<std::size_t>(std::size_t(std::max(1, options.workers)), 1, std::max<std::size_t>(1, n));
  if (workers == 1) {
    evaluate_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t t = 0; t < workers; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(evaluate_range, b, e);
    }
    for (auto& th : pool) th.join();
  }

  // Reduce in query order so the sums do not depend on sharding.
  MetricReport report;
  report.threshold = options.threshold;
  report.window = w;
  report.n_queries = static_cast<std::int64_t>(n);
  for (std::size_t j = 0; j < ks.size(); ++j) {
    std::int64_t hits = 0;
    double dist = 0.0;
    for (const QueryOutcome& o : outcomes) {
      hits += o.hit[j];
      dist += o.dist[j];
    }
    report.sr[ks[j]] = n == 0 ? 0.0 : 100.0 * double(hits) / double(n);
    report.smd[ks[j]] = n == 0 ? 0.0 : dist / double(n);
  }
  for (const QueryOutcome& o : outcomes) report.n_without_predictions += o.empty;
  return report;
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw ConfigError("linspace needs n >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / double(n - 1);
  for (int i = 0; i < n; ++i) out[i] = lo + double(i) * step;
  out.back() = hi;
  return out;
}

SweepResult sweep_thresholds(std::span<const ScoreSeries> series,
                             std::span<const EventAnnotation> annotations,
                             std::span<const int> ks, const ToleranceWindow& w, int n,
                             int objective_k, PredictionMode mode, int workers) {
  if (n < 2) throw ConfigError("sweep needs n >= 2 candidates");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const ScoreSeries& s : series) {
    for (double v : s.scores) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) throw ConfigError("sweep needs at least one score");

  std::vector<int> eval_ks(ks.begin(), ks.end());
  if (std::find(eval_ks.begin(), eval_ks.end(), objective_k) == eval_ks.end()) {
    eval_ks.push_back(objective_k);
  }

  SweepResult result;
  result.candidates = lo == hi ? std::vector<double>{lo} : linspace(lo, hi, n);
  double best_sr = -1.0;
  for (double tau : result.candidates) {
    MetricReport r = evaluate_dataset(series, annotations, eval_ks, w, {mode, tau, workers});
    // Candidates ascend, so >= hands ties to the larger threshold.
    if (r.sr.at(objective_k) >= best_sr) {
      best_sr = r.sr.at(objective_k);
      result.threshold = tau;
      result.report = r;
    }
    result.per_candidate.push_back(std::move(r));
  }
  return result;
}

}  // namespace streamstart::metrics
