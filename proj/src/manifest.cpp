// SPDX-License-Identifier: Apache-2.0
#include "caplab/manifest.hpp"

#include <ctime>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace caplab {

std::string now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

void RunManifest::mark_start() { started_at = now_iso8601(); }

void RunManifest::mark_finish() { finished_at = now_iso8601(); }

std::string RunManifest::to_json_string() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_json.empty()
                    ? nlohmann::json(nullptr)
                    : nlohmann::json::parse(config_json);
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seed"] = seed;
  j["artifact_version"] = artifact_version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("manifest: cannot open " + path);
  }
  out << to_json_string() << '\n';
}

}  // namespace caplab
