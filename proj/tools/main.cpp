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

// streamstart: ingest, synth, train, score, eval and bench subcommands.
//
// Exit codes: 0 ok, 1 I/O, 2 schema, 3 id mismatch, 4 numeric failure,
// 5 configuration (including bad flags).

#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "run_support.hpp"
#include "streamstart/annotations.hpp"
#include "streamstart/costmodel.hpp"
#include "streamstart/detector.hpp"
#include "streamstart/error.hpp"
#include "streamstart/io.hpp"
#include "streamstart/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace streamstart::tools {
namespace {

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<EventAnnotation> select_split(std::vector<EventAnnotation> rows,
                                          const std::string& split) {
  if (split == "all") return rows;
  const Split want = parse_split(split);
  std::erase_if(rows, [&](const EventAnnotation& a) { return a.split != want; });
  return rows;
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    pos = comma + 1;
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::logic_error&) {
      throw ConfigError("--k expects positive integers separated by commas, got '" + text + "'");
    }
  }
  return ks;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads and rethrows the
// first failure by index.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min<int>(workers, int(n)); ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string annotations;
  bool stats = false;
  double duration_bin = 5.0;
  double start_bin = 60.0;
  double collision_iou = 0.0;
};

json histogram(const std::vector<double>& values, double width) {
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  const std::size_t n_bins = std::size_t(std::floor(hi / width)) + 1;
  std::vector<std::int64_t> counts(n_bins, 0);
  for (double v : values) ++counts[std::min(n_bins - 1, std::size_t(std::floor(v / width)))];
  json bins = json::array();
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins.push_back({{"lo", double(b) * width}, {"hi", double(b + 1) * width}, {"count", counts[b]}});
  }
  return bins;
}

int run_ingest(const IngestArgs& a) {
  const auto rows = annotations::load_annotations(a.annotations);
  std::set<std::string> videos;
  for (const auto& r : rows) videos.insert(r.video_uid);
  json out = {{"valid", true}, {"annotations", rows.size()}, {"videos", videos.size()}};
  if (a.stats) {
    if (a.duration_bin <= 0.0 || a.start_bin <= 0.0) throw ConfigError("bin widths must be > 0");
    std::map<std::string, std::int64_t> by_split, by_source;
    std::map<std::string, std::map<std::string, std::int64_t>> by_both;
    std::vector<double> durations, starts;
    for (const auto& r : rows) {
      ++by_split[to_string(r.split)];
      ++by_source[to_string(r.source)];
      ++by_both[to_string(r.split)][to_string(r.source)];
      durations.push_back(r.end_sec - r.start_sec);
      starts.push_back(r.start_sec);
    }
    out["by_split"] = by_split;
    out["by_source"] = by_source;
    out["by_split_source"] = by_both;
    out["event_duration_sec"] = histogram(durations, a.duration_bin);
    out["start_time_sec"] = histogram(starts, a.start_bin);
  }
  if (a.collision_iou > 0.0) {
    const auto c = annotations::find_collisions(rows, a.collision_iou);
    out["collisions"] = {{"iou_threshold", a.collision_iou},
                         {"pairs", c.n_pairs},
                         {"groups", c.n_groups},
                         {"mean_variance_s2", c.mean_variance}};
  }
  print_json(out);
  return 0;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  annotations::SyntheticCorpusSpec spec;
};

int run_synth(const SynthArgs& a, Manifest& manifest) {
  const auto corpus = annotations::gen_corpus(a.spec);
  const fs::path out = a.out;
  std::vector<EventAnnotation> rows;
  for (const auto& s : corpus) {
    const auto& ann = s.annotation;
    io::EmbeddingMeta meta;
    meta.video_uid = ann.video_uid;
    meta.fps = ann.video_fps;
    meta.seed = a.spec.seed;
    io::write_embeddings(out / "embeddings" / ann.video_uid, s.frames, meta);
    io::write_vector(out / "queries" / (ann.video_uid + "__" + ann.query_id() + ".f32"), s.query);
    rows.push_back(ann);
  }
  annotations::save_annotations(out / "annotations.csv", rows);
  manifest.set_seed(a.spec.seed);
  const json result = {{"streams", corpus.size()},
                       {"train", a.spec.n_train},
                       {"val", a.spec.n_val},
                       {"dim", a.spec.dim},
                       {"frames", a.spec.n_frames},
                       {"out", out.string()}};
  manifest.set_result(result);
  manifest.write(out);
  print_json(result);
  return 0;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, annotations, split = "train";
  std::string kind = "qrnn", optimizer = "adam";
  int d_prime = 0, kernel_size = 3, n_blocks = 1, mlp_hidden = 0;
  bool depthwise = true;
  double forget_bias = -5.0, frozen_scale = 0.25, temperature = 0.5;
  std::uint64_t frozen_seed = 0xF20Eull, adapter_seed = 1;
  detector::TrainConfig train;
};

fs::path annotations_path(const std::string& data, const std::string& explicit_path) {
  return explicit_path.empty() ? fs::path(data) / "annotations.csv" : fs::path(explicit_path);
}

int run_train(TrainArgs a, Manifest& manifest) {
  const fs::path ann_path = annotations_path(a.data, a.annotations);
  const auto rows = select_split(annotations::load_annotations(ann_path), a.split);
  if (rows.empty()) throw ConfigError("no annotations in split '" + a.split + "'");
  const auto examples = io::load_examples(a.data, rows);
  const int d = int(examples.front().embeddings.cols());

  detector::DetectorConfig cfg;
  cfg.adapter.kind = kernels::parse_kind(a.kind);
  cfg.adapter.d = d;
  cfg.adapter.d_prime = a.d_prime > 0 ? a.d_prime : d;
  cfg.adapter.kernel_size = a.kernel_size;
  cfg.adapter.lookback = a.kernel_size - 1;
  cfg.adapter.depthwise = a.depthwise;
  cfg.adapter.forget_bias_init = a.forget_bias;
  cfg.d_in = d;
  cfg.n_blocks = a.n_blocks;
  cfg.mlp_hidden = a.mlp_hidden > 0 ? a.mlp_hidden : 2 * d;
  cfg.frozen_scale = a.frozen_scale;
  cfg.frozen_seed = a.frozen_seed;
  cfg.temperature = a.temperature;

  if (a.train.w_s <= 0) a.train.w_s = cfg.adapter.kind == kernels::AdapterKind::kRetention ? 30 : 60;
  a.train.fps = examples.front().annotation.video_fps;
  a.train.optimizer = a.optimizer == "sgd" ? detector::Optimizer::kSgdMomentum
                                           : detector::Optimizer::kAdam;
  a.train.workers = worker_count();

  const auto result = detector::train(detector::DetectorModel::create(cfg, a.adapter_seed),
                                      examples, a.train);
  const fs::path out = a.out;
  fs::create_directories(out);
  detector::save_checkpoint(out / "checkpoint.bin", result.model);
  io::write_file(out / "loss_curve.csv", detector::loss_curve_csv(result.history));

  json train_json = a.train.to_json();
  train_json.erase("workers");
  const json summary = {
      {"checkpoint", (out / "checkpoint.bin").string()},
      {"model", cfg.to_json()},
      {"train", train_json},
      {"seed", a.train.seed},
      {"steps", result.history.size()},
      {"final_loss", result.history.empty() ? 0.0 : result.history.back().total},
      {"diverged", result.diverged}};
  manifest.add_input(ann_path);
  manifest.add_input(fs::path(a.data) / "embeddings");
  manifest.add_input(fs::path(a.data) / "queries");
  manifest.set_seed(a.train.seed);
  manifest.set_result(summary);
  manifest.write(out);
  print_json(summary);
  if (result.diverged) {
    std::cerr << "error: training diverged after " << result.history.size() << " steps\n";
    return int(ErrorCode::kNumeric);
  }
  return 0;
}

// ----------------------------------------------------------------- score

struct ScoreArgs {
  std::string checkpoint, data, annotations, split = "all", out;
  std::string embeddings, query, query_id = "0";
};

int run_score(const ScoreArgs& a, Manifest& manifest) {
  const auto model = detector::load_checkpoint(a.checkpoint);
  const fs::path out = a.out;
  fs::create_directories(out);
  manifest.add_input(a.checkpoint);

  struct Job {
    fs::path embeddings, query;
    std::string query_id;
  };
  std::vector<Job> jobs;
  if (!a.embeddings.empty()) {
    if (a.query.empty()) throw ConfigError("--embeddings needs --query");
    jobs.push_back({a.embeddings, a.query, a.query_id});
    fs::path stem = a.embeddings;
    if (stem.extension() == ".f32" || stem.extension() == ".json") stem.replace_extension();
    manifest.add_input(fs::path(stem.string() + ".f32"));
    manifest.add_input(fs::path(stem.string() + ".json"));
    manifest.add_input(a.query);
  } else {
    if (a.data.empty()) throw ConfigError("score needs --data or --embeddings");
    const fs::path ann_path = annotations_path(a.data, a.annotations);
    for (const auto& r : select_split(annotations::load_annotations(ann_path), a.split)) {
      jobs.push_back({fs::path(a.data) / "embeddings" / r.video_uid,
                      fs::path(a.data) / "queries" / (r.video_uid + "__" + r.query_id() + ".f32"),
                      r.query_id()});
    }
    manifest.add_input(ann_path);
    manifest.add_input(fs::path(a.data) / "embeddings");
    manifest.add_input(fs::path(a.data) / "queries");
  }

  std::vector<std::int64_t> frames(jobs.size(), 0);
  parallel_for(jobs.size(), worker_count(), [&](std::size_t i) {
    const auto stream = io::read_embeddings(jobs[i].embeddings);
    const Eigen::VectorXd q = io::read_vector(jobs[i].query);
    if (stream.frames.cols() != model.config.d_in || q.size() != model.config.d_in) {
      throw SchemaError(jobs[i].embeddings.string() + ": dimension does not match the checkpoint (" +
                        std::to_string(model.config.d_in) + ")");
    }
    detector::MatrixFrameSource source(stream.frames);
    ScoreSeries s = detector::infer_streaming(model, source, q);
    s.video_uid = stream.meta.video_uid;
    s.query_id = jobs[i].query_id;
    s.fps = stream.meta.fps;
    io::write_score_series(out, s);
    frames[i] = std::int64_t(s.scores.size());
  });

  std::int64_t total = 0;
  for (auto f : frames) total += f;
  const json result = {{"series", jobs.size()}, {"frames", total}, {"out", out.string()}};
  manifest.set_result(result);
  manifest.write(out);
  print_json(result);
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string scores, annotations, split = "all", k = "1,2,3", mode = "edge", out;
  std::string threshold_from;
  double anticipation = 5.0, latency = 10.0;
  std::optional<double> threshold;
  int sweep = 20;
  int objective_k = 1;
};

int run_eval(const EvalArgs& a, Manifest& manifest) {
  const auto series = io::load_score_dir(a.scores);
  const auto rows = select_split(annotations::load_annotations(a.annotations), a.split);
  const std::vector<int> ks = parse_ks(a.k);
  const ToleranceWindow window{a.anticipation, a.latency};
  const auto mode = metrics::parse_mode(a.mode);
  const int workers = worker_count();
  manifest.add_input(a.scores);
  manifest.add_input(a.annotations);

  json sweep_json;
  metrics::MetricReport report;
  if (a.threshold || !a.threshold_from.empty()) {
    metrics::EvalOptions o;
    o.mode = mode;
    o.workers = workers;
    if (a.threshold) {
      o.threshold = *a.threshold;
    } else {
      manifest.add_input(a.threshold_from);
      json j;
      try {
        j = json::parse(io::read_file(a.threshold_from));
        o.threshold = j.at("threshold").get<double>();
      } catch (const json::exception& e) {
        throw SchemaError(a.threshold_from + ": no threshold field (" + e.what() + ")");
      }
    }
    report = metrics::evaluate_dataset(series, rows, ks, window, o);
  } else {
    if (a.sweep < 1) throw ConfigError("--sweep must be >= 1");
    const auto s = metrics::sweep_thresholds(series, rows, ks, window, a.sweep, a.objective_k,
                                             mode, workers);
    report = s.report;
    sweep_json = {{"objective_k", a.objective_k}, {"candidates", s.candidates}};
    json per = json::array();
    for (const auto& r : s.per_candidate) per.push_back(r.to_json());
    sweep_json["reports"] = per;
  }

  json out = report.to_json();
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    io::write_file(dir / "report.json", out.dump(2) + "\n");
    if (!sweep_json.is_null()) io::write_file(dir / "sweep.json", sweep_json.dump(2) + "\n");
    manifest.set_result(out);
    manifest.write(dir);
  }
  print_json(out);
  return 0;
}

// ----------------------------------------------------------------- bench

struct BenchArgs {
  std::string baseline = "backbone", out, checkpoint;
  std::int64_t tokens = 197, d = 768, d_prime = 384, insertions = 24, kernel_size = 3;
  std::int64_t backbone_blocks = 12, window = 4;
  bool depthwise = true, latency = false;
  // Model used for latency when no checkpoint is given.
  std::string kind = "qrnn";
  int model_d = 64, model_d_prime = 32, model_blocks = 2;
  std::int64_t stream_length = 1000;
  int repetitions = 3;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a, Manifest& manifest) {
  using costmodel::make_report;
  std::vector<costmodel::CostReport> reports;
  reports.push_back(make_report("backbone",
                                costmodel::vit_backbone_stack(a.backbone_blocks, a.d, a.d), a.tokens));
  for (auto kind : {kernels::AdapterKind::kVanilla, kernels::AdapterKind::kStConv,
                    kernels::AdapterKind::kQrnn, kernels::AdapterKind::kRetention}) {
    reports.push_back(make_report(kernels::to_string(kind),
                                  costmodel::adapter_stack(kind, a.d, a.d_prime, a.insertions,
                                                           a.kernel_size, a.depthwise),
                                  a.tokens));
  }
  const auto base = std::find_if(reports.begin(), reports.end(),
                                 [&](const auto& r) { return r.name == a.baseline; });
  if (base == reports.end()) {
    throw ConfigError("--baseline must be one of backbone, vanilla, st_conv, qrnn, retention");
  }
  const costmodel::CostReport baseline = *base;
  json rs = json::array();
  for (auto& r : reports) {
    if (r.name != baseline.name) r = costmodel::with_baseline(r, baseline);
    rs.push_back(r.to_json());
  }
  json out = {{"reports", rs},
              {"sliding_window",
               {{"window", a.window},
                {"mac_overhead_pct",
                 costmodel::sliding_window_overhead(reports.front().macs_per_frame, a.window)}}}};

  if (a.latency) {
    detector::DetectorModel model;
    if (!a.checkpoint.empty()) {
      model = detector::load_checkpoint(a.checkpoint);
      manifest.add_input(a.checkpoint);
    } else {
      detector::DetectorConfig cfg;
      cfg.adapter.kind = kernels::parse_kind(a.kind);
      cfg.adapter.d = a.model_d;
      cfg.adapter.d_prime = a.model_d_prime;
      cfg.d_in = a.model_d;
      cfg.n_blocks = a.model_blocks;
      cfg.mlp_hidden = 2 * a.model_d;
      model = detector::DetectorModel::create(cfg, a.seed);
    }
    costmodel::LatencyOptions o;
    o.stream_length = a.stream_length;
    o.repetitions = a.repetitions;
    o.window = a.window;
    o.seed = a.seed;
    const auto lat = costmodel::bench_latency(model, o);
    out["latency"] = lat.to_json();
    out["latency"]["model"] = model.config.to_json();
  }
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    io::write_file(dir / "bench.json", out.dump(2) + "\n");
    manifest.set_seed(a.seed);
    manifest.write(dir);
  }
  print_json(out);
  return 0;
}

// ------------------------------------------------------------------ main

void add_config_flag(CLI::App* sub) {
  // Consumed before parsing; declared so it shows up in --help.
  sub->add_option("--config", "Config file (JSON or key=value); explicit flags win");
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  args = expand_config(args);

  CLI::App app{"Streaming event-start detection toolkit"};
  app.set_version_flag("--version", std::string(STREAMSTART_VERSION));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate an annotation CSV and summarize it");
  c_ingest->add_option("--annotations", ingest.annotations, "Annotation CSV")->required();
  c_ingest->add_flag("--stats", ingest.stats, "Counts and histograms");
  c_ingest->add_option("--duration-bin", ingest.duration_bin, "Event-duration bin width (s)");
  c_ingest->add_option("--start-bin", ingest.start_bin, "Start-time bin width (s)");
  c_ingest->add_option("--collision-iou", ingest.collision_iou,
                       "Report colliding annotations at this IoU (0 = off)");
  add_config_flag(c_ingest);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--streams", synth.spec.n_train, "Train streams");
  c_synth->add_option("--val-streams", synth.spec.n_val, "Val streams");
  c_synth->add_option("--frames", synth.spec.n_frames, "Frames per stream");
  c_synth->add_option("--dim", synth.spec.dim, "Embedding width");
  c_synth->add_option("--noise", synth.spec.noise_scale, "Per-component noise std");
  c_synth->add_option("--fps", synth.spec.fps, "Frame rate");
  c_synth->add_option("--min-event", synth.spec.min_event_sec, "Shortest event (s)");
  c_synth->add_option("--max-event", synth.spec.max_event_sec, "Longest event (s)");
  c_synth->add_option("--min-start", synth.spec.min_start_sec, "Earliest event start (s)");
  c_synth->add_option("--seed", synth.spec.seed, "Corpus seed");
  c_synth->add_option("--backbone-seed", synth.spec.backbone_seed, "Frozen map seed");
  add_config_flag(c_synth);

  TrainArgs train;
  train.train.steps = 2000;
  train.train.learning_rate = 1e-3;
  train.train.batch_size = 32;
  train.train.weight_decay = 1.0;
  train.train.seed = 3;
  train.train.w_s = 0;
  auto* c_train = app.add_subcommand("train", "Train adapters on a corpus directory");
  c_train->add_option("--data", train.data, "Corpus directory")->required();
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_option("--annotations", train.annotations, "Annotation CSV (default <data>/annotations.csv)");
  c_train->add_option("--split", train.split, "train | val | all");
  c_train->add_option("--kind", train.kind, "vanilla | st_conv | qrnn | retention");
  c_train->add_option("--d-prime", train.d_prime, "Adapter bottleneck (0 = input width)");
  c_train->add_option("--kernel-size", train.kernel_size, "Temporal kernel size");
  c_train->add_flag("--depthwise,!--no-depthwise", train.depthwise, "Depth-wise temporal filters");
  c_train->add_option("--forget-bias", train.forget_bias, "Initial forget-gate bias");
  c_train->add_option("--blocks", train.n_blocks, "Blocks");
  c_train->add_option("--mlp-hidden", train.mlp_hidden, "Frozen MLP width (0 = twice the input)");
  c_train->add_option("--frozen-scale", train.frozen_scale, "Frozen weight scale");
  c_train->add_option("--frozen-seed", train.frozen_seed, "Frozen weight seed");
  c_train->add_option("--temperature", train.temperature, "Similarity temperature");
  c_train->add_option("--adapter-seed", train.adapter_seed, "Adapter init seed");
  c_train->add_option("--steps", train.train.steps, "Optimizer steps");
  c_train->add_option("--lr", train.train.learning_rate, "Learning rate");
  c_train->add_option("--batch", train.train.batch_size, "Windows per step");
  c_train->add_option("--w-s", train.train.w_s, "Window length in frames (0 = 60, 30 for retention)");
  c_train->add_option("--weight-decay", train.train.weight_decay, "Decoupled weight decay");
  c_train->add_option("--p-pos", train.train.p_pos, "Share of windows holding an event frame");
  c_train->add_option("--pos-weight-cap", train.train.pos_weight_cap, "Cap on the positive weight");
  c_train->add_option("--optimizer", train.optimizer, "adam | sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  c_train->add_option("--seed", train.train.seed, "Batch sampling seed");
  add_config_flag(c_train);

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Stream embeddings through a checkpoint");
  c_score->add_option("--checkpoint", score.checkpoint, "Checkpoint file")->required();
  c_score->add_option("--out", score.out, "Directory for score CSVs")->required();
  c_score->add_option("--data", score.data, "Corpus directory");
  c_score->add_option("--annotations", score.annotations, "Annotation CSV (default <data>/annotations.csv)");
  c_score->add_option("--split", score.split, "train | val | all");
  c_score->add_option("--embeddings", score.embeddings, "Single embedding stream");
  c_score->add_option("--query", score.query, "Query vector for --embeddings");
  c_score->add_option("--query-id", score.query_id, "Query id for --embeddings");
  add_config_flag(c_score);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Streaming recall and minimum distance");
  c_eval->add_option("--scores", eval.scores, "Directory of score CSVs")->required();
  c_eval->add_option("--annotations", eval.annotations, "Annotation CSV")->required();
  c_eval->add_option("--split", eval.split, "train | val | all");
  c_eval->add_option("--anticipation", eval.anticipation, "Seconds before the start");
  c_eval->add_option("--latency", eval.latency, "Seconds after the start");
  c_eval->add_option("--k", eval.k, "Comma-separated k values");
  c_eval->add_option("--mode", eval.mode, "edge | frame")->check(CLI::IsMember({"edge", "frame"}));
  auto* o_thr = c_eval->add_option("--threshold", eval.threshold, "Fixed threshold");
  auto* o_sweep = c_eval->add_option("--sweep", eval.sweep, "Sweep N thresholds (default)");
  auto* o_from = c_eval->add_option("--threshold-from", eval.threshold_from,
                                    "Use the threshold of a report JSON");
  o_thr->excludes(o_sweep)->excludes(o_from);
  o_sweep->excludes(o_from);
  c_eval->add_option("--objective-k", eval.objective_k, "k maximized by the sweep");
  c_eval->add_option("--out", eval.out, "Directory for report.json");
  add_config_flag(c_eval);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Cost model and streaming latency");
  c_bench->add_option("--baseline", bench.baseline, "Stack the overheads are relative to");
  c_bench->add_option("--tokens", bench.tokens, "Tokens per frame");
  c_bench->add_option("--d", bench.d, "Backbone width");
  c_bench->add_option("--d-prime", bench.d_prime, "Adapter bottleneck");
  c_bench->add_option("--insertions", bench.insertions, "Adapters in the backbone");
  c_bench->add_option("--kernel-size", bench.kernel_size, "Temporal kernel size");
  c_bench->add_option("--backbone-blocks", bench.backbone_blocks, "Encoder blocks");
  c_bench->add_flag("--depthwise,!--no-depthwise", bench.depthwise, "Depth-wise temporal filters");
  c_bench->add_option("--window", bench.window, "Sliding-window length");
  c_bench->add_flag("--latency", bench.latency, "Also time streaming inference");
  c_bench->add_option("--checkpoint", bench.checkpoint, "Model for --latency");
  c_bench->add_option("--kind", bench.kind, "Adapter kind of the fresh latency model");
  c_bench->add_option("--model-d", bench.model_d, "Width of the fresh latency model");
  c_bench->add_option("--model-d-prime", bench.model_d_prime, "Bottleneck of the fresh latency model");
  c_bench->add_option("--model-blocks", bench.model_blocks, "Blocks of the fresh latency model");
  c_bench->add_option("--stream-length", bench.stream_length, "Frames per latency run");
  c_bench->add_option("--repetitions", bench.repetitions, "Latency repetitions");
  c_bench->add_option("--seed", bench.seed, "Seed for the fresh model and frames");
  c_bench->add_option("--out", bench.out, "Directory for bench.json");
  add_config_flag(c_bench);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return int(ErrorCode::kConfig);
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest(sub->get_name(), std::vector<std::string>(argv, argv + argc),
                    option_snapshot(*sub));
  if (sub == c_ingest) return run_ingest(ingest);
  if (sub == c_synth) return run_synth(synth, manifest);
  if (sub == c_train) return run_train(train, manifest);
  if (sub == c_score) return run_score(score, manifest);
  if (sub == c_eval) return run_eval(eval, manifest);
  return run_bench(bench, manifest);
}

}  // namespace
}  // namespace streamstart::tools

int main(int argc, char** argv) {
  try {
    return streamstart::tools::run(argc, argv);
  } catch (const streamstart::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(streamstart::ErrorCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(streamstart::ErrorCode::kIo);
  }
}
