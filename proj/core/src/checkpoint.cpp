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

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "streamstart/detector.hpp"
#include "streamstart/error.hpp"

namespace streamstart::detector {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'Q', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw SchemaError("checkpoint is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const DetectorModel& model) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string config = model.config.to_json().dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  out += config;

  std::uint32_t n_tensors = 0;
  model.for_each_trainable([&](const std::string&, std::span<const double>) { ++n_tensors; });
  put<std::uint32_t>(out, n_tensors);
  model.for_each_trainable([&](const std::string& name, std::span<const double> s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint64_t>(out, s.size());
    for (double v : s) put<float>(out, static_cast<float>(v));
  });
  return out;
}

DetectorModel parse_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kMagic, 4)) throw SchemaError("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw SchemaError(fmt::format("unsupported checkpoint version {}", version));
  }
  const auto config_len = in.get<std::uint32_t>();
  nlohmann::json config_json;
  try {
    config_json = nlohmann::json::parse(in.take(config_len));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("checkpoint config record: {}", e.what()));
  }
  DetectorModel model = DetectorModel::create(DetectorConfig::from_json(config_json), 0);

  std::uint32_t expected = 0;
  model.for_each_trainable([&](const std::string&, std::span<double>) { ++expected; });
  const auto n_tensors = in.get<std::uint32_t>();
  if (n_tensors != expected) {
    throw SchemaError(
        fmt::format("checkpoint holds {} tensors, config implies {}", n_tensors, expected));
  }
  model.for_each_trainable([&](const std::string& name, std::span<double> s) {
    const auto name_len = in.get<std::uint32_t>();
    const std::string_view stored = in.take(name_len);
    if (stored != name) {
      throw SchemaError(fmt::format("checkpoint tensor '{}' where '{}' was expected", stored, name));
    }
    const auto count = in.get<std::uint64_t>();
    if (count != s.size()) {
      throw SchemaError(
          fmt::format("checkpoint tensor '{}' has {} values, expected {}", name, count, s.size()));
    }
    for (double& v : s) v = in.get<float>();
  });
  if (!in.done()) throw SchemaError("checkpoint has trailing bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const DetectorModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

DetectorModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace streamstart::detector
