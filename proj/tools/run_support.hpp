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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace CLI {
class App;
}

namespace streamstart::tools {

// Reads a config file and turns it into "--key=value" tokens. Accepts a JSON
// object (a run manifest's "config" member is used when present) or
// key=value lines with '#' comments.
std::vector<std::string> config_tokens(const std::filesystem::path& path);

// Splices the tokens of every "--config FILE" in argv in front of the
// remaining flags, so explicitly given flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

// Effective option values of a parsed subcommand, keyed by long name.
nlohmann::json option_snapshot(const CLI::App& sub);

// Worker count: hardware threads, capped by STREAMSTART_THREADS when set.
int worker_count();

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv, nlohmann::json config);

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path);
  void set_result(nlohmann::json result) { result_ = std::move(result); }
  // Writes <dir>/manifest.json.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::string> inputs_;
  nlohmann::json result_;
  std::string started_at_;
};

std::string utc_timestamp();

}  // namespace streamstart::tools
