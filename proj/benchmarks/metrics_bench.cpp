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

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "streamstart/metrics.hpp"

namespace streamstart {
namespace {

struct Dataset {
  std::vector<ScoreSeries> series;
  std::vector<EventAnnotation> annotations;
};

Dataset make_dataset(int n_queries, int n_frames) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  for (int q = 0; q < n_queries; ++q) {
    EventAnnotation a;
    a.video_uid = "v" + std::to_string(q);
    a.ann_idx = std::uint64_t(q);
    a.start_sec = double(q % (n_frames - 10));
    a.end_sec = a.start_sec + 5.0;
    a.video_length = n_frames;
    ScoreSeries s;
    s.video_uid = a.video_uid;
    s.query_id = a.query_id();
    s.scores.resize(std::size_t(n_frames));
    for (double& v : s.scores) v = u(rng);
    d.annotations.push_back(a);
    d.series.push_back(std::move(s));
  }
  return d;
}

void BM_EvaluateDataset(benchmark::State& state) {
  const Dataset d = make_dataset(int(state.range(0)), 300);
  const std::vector<int> ks = {1, 2, 3};
  metrics::EvalOptions o;
  o.threshold = 0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::evaluate_dataset(d.series, d.annotations, ks, {}, o));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateDataset)->Arg(100)->Arg(1000);

void BM_SweepThresholds(benchmark::State& state) {
  const Dataset d = make_dataset(500, 300);
  const std::vector<int> ks = {1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        metrics::sweep_thresholds(d.series, d.annotations, ks, {}, int(state.range(0)), 1));
  }
}
BENCHMARK(BM_SweepThresholds)->Arg(20);

}  // namespace
}  // namespace streamstart
