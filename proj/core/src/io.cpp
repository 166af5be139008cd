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

#include "streamstart/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "csv.hpp"
#include "streamstart/error.hpp"

namespace streamstart::io {

static_assert(std::endian::native == std::endian::little,
              "float32 stream I/O assumes a little-endian host");

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

nlohmann::json EmbeddingMeta::to_json() const {
  return {{"video_uid", video_uid}, {"fps", fps}, {"dim", dim}, {"n_frames", n_frames},
          {"seed", seed}};
}

EmbeddingMeta EmbeddingMeta::from_json(const nlohmann::json& j) {
  try {
    EmbeddingMeta m;
    m.video_uid = j.at("video_uid").get<std::string>();
    m.fps = j.at("fps").get<double>();
    m.dim = j.at("dim").get<std::int64_t>();
    m.n_frames = j.at("n_frames").get<std::int64_t>();
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("embedding sidecar: {}", e.what()));
  }
}

namespace {

std::string floats_to_bytes(const double* data, std::size_t n) {
  std::string out(n * sizeof(float), '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = static_cast<float>(data[i]);
    std::memcpy(out.data() + i * sizeof(float), &f, sizeof(float));
  }
  return out;
}

std::vector<double> bytes_to_floats(std::string_view bytes, const fs::path& path) {
  if (bytes.size() % sizeof(float) != 0) {
    throw SchemaError(fmt::format("'{}' size {} is not a multiple of 4", path.string(),
                                  bytes.size()));
  }
  std::vector<double> out(bytes.size() / sizeof(float));
  for (std::size_t i = 0; i < out.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
    if (!std::isfinite(f)) {
      throw NumericError(fmt::format("'{}' holds a non-finite value at index {}", path.string(), i));
    }
    out[i] = f;
  }
  return out;
}

fs::path strip_ext(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".f32" || ext == ".json") return fs::path(path).replace_extension();
  return path;
}

fs::path with_ext(const fs::path& stem, const char* ext) { return fs::path(stem.string() + ext); }

}  // namespace

void write_embeddings(const fs::path& stem, const Eigen::MatrixXd& frames,
                      const EmbeddingMeta& meta) {
  const fs::path base = strip_ext(stem);
  // Row-major on disk regardless of Eigen's storage order.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = frames;
  write_file(with_ext(base, ".f32"), floats_to_bytes(rm.data(), std::size_t(rm.size())));
  EmbeddingMeta m = meta;
  m.dim = frames.cols();
  m.n_frames = frames.rows();
  write_file(with_ext(base, ".json"), m.to_json().dump(2) + "\n");
}

EmbeddingStream read_embeddings(const fs::path& path) {
  const fs::path base = strip_ext(path);
  EmbeddingStream s;
  try {
    s.meta = EmbeddingMeta::from_json(nlohmann::json::parse(read_file(with_ext(base, ".json"))));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(fmt::format("embedding sidecar '{}': {}", base.string(), e.what()));
  }
  const fs::path data = with_ext(base, ".f32");
  const std::vector<double> v = bytes_to_floats(read_file(data), data);
  if (s.meta.dim < 1 || s.meta.n_frames < 0 ||
      std::int64_t(v.size()) != s.meta.dim * s.meta.n_frames) {
    throw SchemaError(fmt::format("'{}' holds {} floats, sidecar says {} x {}", data.string(),
                                  v.size(), s.meta.n_frames, s.meta.dim));
  }
  s.frames.resize(s.meta.n_frames, s.meta.dim);
  for (std::int64_t r = 0; r < s.meta.n_frames; ++r) {
    for (std::int64_t c = 0; c < s.meta.dim; ++c) s.frames(r, c) = v[r * s.meta.dim + c];
  }
  return s;
}

void write_vector(const fs::path& path, const Eigen::VectorXd& v) {
  write_file(path, floats_to_bytes(v.data(), std::size_t(v.size())));
}

Eigen::VectorXd read_vector(const fs::path& path) {
  const std::vector<double> v = bytes_to_floats(read_file(path), path);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

std::string score_file_name(std::string_view video_uid, std::string_view query_id) {
  return fmt::format("{}__{}.csv", video_uid, query_id);
}

std::string serialize_score_series(const ScoreSeries& series) {
  std::string out = "frame_idx,t_sec,score\n";
  for (std::size_t i = 0; i < series.scores.size(); ++i) {
    out += fmt::format("{},{},{}\n", i, series.time_at(i), series.scores[i]);
  }
  return out;
}

ScoreSeries parse_score_series(std::string_view csv, std::string video_uid,
                               std::string query_id) {
  const auto rows = internal::parse_csv(csv);
  const std::string where = score_file_name(video_uid, query_id);
  if (rows.empty() || rows[0] != internal::CsvRow{"frame_idx", "t_sec", "score"}) {
    throw SchemaError(fmt::format("{}: header must be frame_idx,t_sec,score", where));
  }
  ScoreSeries s;
  s.video_uid = std::move(video_uid);
  s.query_id = std::move(query_id);
  std::vector<double> times;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    unsigned long long idx = 0;
    double t = 0.0;
    double p = 0.0;
    if (row.size() != 3 || !internal::parse_uint(row[0], idx) ||
        !internal::parse_double(row[1], t) || !internal::parse_double(row[2], p)) {
      throw SchemaError(fmt::format("{} row {}: malformed", where, r));
    }
    if (idx != r - 1) {
      throw SchemaError(fmt::format("{} row {}: frame_idx {} out of sequence", where, r, idx));
    }
    if (!(p >= 0.0 && p <= 1.0)) {
      throw SchemaError(fmt::format("{} row {}: score {} outside [0, 1]", where, r, p));
    }
    times.push_back(t);
    s.scores.push_back(p);
  }
  // Recover fps from the last timestamp, snapping to an integer when the
  // round trip is within rounding noise.
  if (times.size() >= 2 && times.back() > 0.0) {
    double fps = double(times.size() - 1) / times.back();
    if (std::abs(fps - std::round(fps)) <= 1e-9 * std::max(1.0, fps)) fps = std::round(fps);
    s.fps = fps;
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(s.time_at(i) - times[i]) > 1e-9 * std::max(1.0, times[i])) {
      throw SchemaError(fmt::format("{} row {}: t_sec {} is not frame_idx / fps", where, i + 1,
                                    times[i]));
    }
  }
  return s;
}

void write_score_series(const fs::path& dir, const ScoreSeries& series) {
  write_file(dir / score_file_name(series.video_uid, series.query_id),
             serialize_score_series(series));
}

std::vector<ScoreSeries> load_score_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ScoreSeries> out;
  for (const fs::path& f : files) {
    const std::string stem = f.stem().string();
    const auto cut = stem.rfind("__");
    if (cut == std::string::npos) {
      throw SchemaError(fmt::format("score file '{}' is not named <video_uid>__<query_id>.csv",
                                    f.filename().string()));
    }
    out.push_back(parse_score_series(read_file(f), stem.substr(0, cut), stem.substr(cut + 2)));
  }
  return out;
}

std::vector<detector::TrainingExample> load_examples(
    const fs::path& dir, std::span<const EventAnnotation> annotations) {
  std::vector<detector::TrainingExample> out;
  out.reserve(annotations.size());
  for (const EventAnnotation& a : annotations) {
    detector::TrainingExample ex;
    ex.embeddings = read_embeddings(dir / "embeddings" / a.video_uid).frames;
    ex.query = read_vector(dir / "queries" /
                           fmt::format("{}__{}.f32", a.video_uid, a.query_id()));
    if (ex.query.size() != ex.embeddings.cols()) {
      throw SchemaError(fmt::format("query for ({}, {}) has dim {}, stream has {}", a.video_uid,
                                    a.query_id(), ex.query.size(), ex.embeddings.cols()));
    }
    ex.annotation = a;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace streamstart::io
