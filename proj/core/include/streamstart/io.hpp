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
#include <nlohmann/json.hpp>

#include "streamstart/detector.hpp"
#include "streamstart/types.hpp"

// File formats shared by the command-line tools: raw float32 embedding
// streams with a JSON sidecar, query vectors and score-series CSV files.
namespace streamstart::io {

struct EmbeddingMeta {
  std::string video_uid;
  double fps = 1.0;
  std::int64_t dim = 0;
  std::int64_t n_frames = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static EmbeddingMeta from_json(const nlohmann::json& j);
};

// Writes `<stem>.f32` (row-major little-endian float32) and `<stem>.json`.
void write_embeddings(const std::filesystem::path& stem, const Eigen::MatrixXd& frames,
                      const EmbeddingMeta& meta);

struct EmbeddingStream {
  Eigen::MatrixXd frames;
  EmbeddingMeta meta;
};

// Reads a stream written by write_embeddings. `path` may name the .f32 file,
// the .json sidecar or the common stem.
EmbeddingStream read_embeddings(const std::filesystem::path& path);

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(const std::filesystem::path& path);

// "<video_uid>__<query_id>.csv"
std::string score_file_name(std::string_view video_uid, std::string_view query_id);

// CSV with header frame_idx,t_sec,score.
std::string serialize_score_series(const ScoreSeries& series);
ScoreSeries parse_score_series(std::string_view csv, std::string video_uid,
                               std::string query_id);
void write_score_series(const std::filesystem::path& dir, const ScoreSeries& series);
// Every *.csv file in `dir`, ordered by file name.
std::vector<ScoreSeries> load_score_dir(const std::filesystem::path& dir);

// Pairs each annotation with `<dir>/embeddings/<video_uid>` and
// `<dir>/queries/<video_uid>__<query_id>.f32`.
std::vector<detector::TrainingExample> load_examples(
    const std::filesystem::path& dir, std::span<const EventAnnotation> annotations);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// 64-bit FNV-1a, hex encoded; used to fingerprint inputs in run manifests.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace streamstart::io
