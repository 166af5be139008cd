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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "kernels_internal.hpp"
#include "random_util.hpp"
#include "streamstart/costmodel.hpp"
#include "streamstart/error.hpp"

namespace streamstart::costmodel {

namespace {

using Clock = std::chrono::steady_clock;

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto idx = static_cast<std::size_t>(std::ceil(q * double(v.size()))) ;
  const std::size_t k = std::min(v.size() - 1, idx == 0 ? 0 : idx - 1);
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
  return v[k];
}

TimingStats summarize(const std::vector<double>& ns) {
  TimingStats s;
  s.total_ns = std::accumulate(ns.begin(), ns.end(), 0.0);
  s.mean_ns = ns.empty() ? 0.0 : s.total_ns / double(ns.size());
  s.p50_ns = quantile(ns, 0.5);
  s.p99_ns = quantile(ns, 0.99);
  return s;
}

double elapsed_ns(Clock::time_point a, Clock::time_point b) {
  return double(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

double measure_resolution() {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, elapsed_ns(a, b));
  }
  return best;
}

nlohmann::json stats_json(const TimingStats& s) {
  return {{"mean_ns", s.mean_ns}, {"p50_ns", s.p50_ns}, {"p99_ns", s.p99_ns},
          {"total_ns", s.total_ns}};
}

double mean_total(const std::vector<TimingStats>& v) {
  if (v.empty()) return 0.0;
  double t = 0.0;
  for (const auto& s : v) t += s.total_ns;
  return t / double(v.size());
}

}  // namespace

double LatencyReport::streaming_total_mean() const { return mean_total(streaming); }
double LatencyReport::sliding_total_mean() const { return mean_total(sliding); }

nlohmann::json LatencyReport::to_json() const {
  nlohmann::json j;
  j["stream_length"] = options.stream_length;
  j["repetitions"] = options.repetitions;
  j["warmup"] = options.warmup;
  j["window"] = options.window;
  j["timer_resolution_ns"] = timer_resolution_ns;
  j["streaming"] = nlohmann::json::array();
  for (const auto& s : streaming) j["streaming"].push_back(stats_json(s));
  j["sliding"] = nlohmann::json::array();
  for (const auto& s : sliding) j["sliding"].push_back(stats_json(s));
  j["streaming_total_mean_ns"] = streaming_total_mean();
  j["sliding_total_mean_ns"] = sliding_total_mean();
  const double st = streaming_total_mean();
  j["sliding_over_streaming"] = st > 0.0 ? sliding_total_mean() / st : 0.0;
  j["probes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < options.probes.size(); ++i) {
    const double m = probe_median_ns[i];
    j["probes"].push_back({{"frame", options.probes[i]},
                           {"median_ns", std::isnan(m) ? nlohmann::json(nullptr) : nlohmann::json(m)},
                           {"adapter_macs", probe_macs[i]}});
  }
  return j;
}

LatencyReport bench_latency(const detector::DetectorModel& model, const LatencyOptions& options) {
  if (options.stream_length < 1) throw ConfigError("stream length must be >= 1");
  if (options.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (options.warmup < 0) throw ConfigError("warmup must be >= 0");
  if (options.window < 1) throw ConfigError("window must be >= 1");
  if (options.probe_span < 1) throw ConfigError("probe span must be >= 1");

  LatencyReport report;
  report.options = options;
  report.timer_resolution_ns = measure_resolution();

  internal::Rng rng(options.seed);
  const int d_in = model.config.d_in;
  const Eigen::MatrixXd frames = internal::gaussian(options.stream_length, d_in, 1.0, rng);
  Eigen::VectorXd query = internal::gaussian(d_in, 1, 1.0, rng).col(0);
  const kernels::Row q = model.project_query(query);

  volatile double sink = 0.0;
  {
    detector::StreamingDetector warm(model, query);
    for (std::int64_t i = 0; i < options.warmup; ++i) {
      sink = sink + warm.push(frames.row(i % options.stream_length));
    }
  }

  std::vector<std::vector<double>> probe_samples(options.probes.size());
  report.probe_macs.assign(options.probes.size(), 0);
  for (int rep = 0; rep < options.repetitions; ++rep) {
    detector::StreamingDetector det(model, query);
    std::vector<double> ns(static_cast<std::size_t>(options.stream_length));
    for (std::int64_t i = 0; i < options.stream_length; ++i) {
      const auto a = Clock::now();
      sink = sink + det.push(frames.row(i));
      const auto b = Clock::now();
      ns[i] = elapsed_ns(a, b);
      for (std::size_t p = 0; p < options.probes.size(); ++p) {
        if (i == options.probes[p]) report.probe_macs[p] = det.last_adapter_macs();
      }
    }
    for (std::size_t p = 0; p < options.probes.size(); ++p) {
      const std::int64_t lo = options.probes[p];
      const std::int64_t hi = std::min(options.stream_length, lo + options.probe_span);
      for (std::int64_t i = lo; i < hi; ++i) probe_samples[p].push_back(ns[i]);
    }
    report.streaming.push_back(summarize(ns));

    // Comparator: every arrival re-encodes the last `window` frames.
    std::vector<double> sl(static_cast<std::size_t>(options.stream_length));
    for (std::int64_t i = 0; i < options.stream_length; ++i) {
      const auto a = Clock::now();
      const std::int64_t first = std::max<std::int64_t>(0, i - options.window + 1);
      const kernels::Sequence h = detector::encode(model, frames.middleRows(first, i - first + 1));
      const double c = detector::cosine_similarity(h.row(h.rows() - 1), q);
      sink = sink + kernels::internal::sigmoid(c / model.config.temperature);
      const auto b = Clock::now();
      sl[i] = elapsed_ns(a, b);
    }
    report.sliding.push_back(summarize(sl));
  }
  for (const auto& s : probe_samples) report.probe_median_ns.push_back(quantile(s, 0.5));
  return report;
}

}  // namespace streamstart::costmodel
