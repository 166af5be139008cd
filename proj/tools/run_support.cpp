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

#include "run_support.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <CLI11.hpp>

#include "streamstart/error.hpp"
#include "streamstart/io.hpp"

namespace streamstart::tools {
namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string json_scalar(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ",";
      out += json_scalar(e, key);
    }
    return out;
  }
  throw ConfigError("config key '" + key + "' must be a scalar or a list");
}

}  // namespace

std::vector<std::string> config_tokens(const fs::path& path) {
  const std::string text = io::read_file(path);
  std::vector<std::string> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    const nlohmann::json& cfg = j.contains("config") && j["config"].is_object() ? j["config"] : j;
    for (const auto& [key, value] : cfg.items()) {
      if (value.is_null()) continue;
      out.push_back("--" + key + "=" + json_scalar(value, key));
    }
    return out;
  }
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("config " + path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    out.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest, injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file argument");
      const auto t = config_tokens(args[++i]);
      injected.insert(injected.end(), t.begin(), t.end());
    } else if (a.starts_with("--config=")) {
      const auto t = config_tokens(a.substr(9));
      injected.insert(injected.end(), t.begin(), t.end());
    } else {
      rest.push_back(a);
    }
  }
  if (injected.empty()) return rest;
  // After the program name and the subcommand.
  auto at = std::find_if(rest.begin() + std::min<std::size_t>(1, rest.size()), rest.end(),
                         [](const std::string& s) { return !s.starts_with("-"); });
  if (at != rest.end()) ++at;
  rest.insert(at, injected.begin(), injected.end());
  return rest;
}

nlohmann::json option_snapshot(const CLI::App& sub) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    const bool flag = opt->get_type_size() == 0;
    if (opt->count() > 0) {
      if (flag) {
        j[name] = opt->as<bool>();
      } else {
        std::string value;
        for (const auto& r : opt->reduced_results()) value += (value.empty() ? "" : ",") + r;
        j[name] = value;
      }
      continue;
    }
    // Defaults of mutually exclusive options would conflict when replayed.
    if (!opt->get_excludes().empty()) continue;
    const std::string value = opt->get_default_str();
    if (flag) {
      j[name] = value == "true" || value == "1";
    } else if (!value.empty()) {
      j[name] = value;
    }
  }
  return j;
}

int worker_count() {
  int n = std::max(1, int(std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("STREAMSTART_THREADS"); env && *env) {
    int cap = 0;
    const std::string_view s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec != std::errc() || p != s.data() + s.size() || cap < 1) {
      throw ConfigError("STREAMSTART_THREADS must be a positive integer, got '" +
                        std::string(s) + "'");
    }
    n = std::min(n, cap);
  }
  return n;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Manifest::Manifest(std::string command, std::vector<std::string> argv, nlohmann::json config)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      config_(std::move(config)),
      started_at_(utc_timestamp()) {}

void Manifest::add_input(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& f : files) {
      listing += fs::relative(f, path).generic_string() + " " + io::fnv1a_hex(io::read_file(f)) + "\n";
    }
    inputs_[path.string()] = io::fnv1a_hex(listing);
  } else {
    inputs_[path.string()] = io::fnv1a_hex(io::read_file(path));
  }
}

void Manifest::write(const fs::path& dir) const {
  nlohmann::json j = {{"command", command_},
                      {"argv", argv_},
                      {"config", config_},
                      {"seed", seed_},
                      {"inputs", inputs_},
                      {"tool_version", STREAMSTART_VERSION},
                      {"started_at", started_at_},
                      {"finished_at", utc_timestamp()}};
  if (!result_.is_null()) j["result"] = result_;
  io::write_file(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace streamstart::tools
