// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace caplab {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Replay record written alongside every command's outputs: the resolved
/// configuration snapshot plus the seed reproduce the run.
struct RunManifest {
  std::string command;
  std::string config_json;  // resolved configuration snapshot
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  uint64_t seed = 0;
  std::string artifact_version = kArtifactVersion;
  std::string started_at;
  std::string finished_at;

  void mark_start();
  void mark_finish();
  std::string to_json_string() const;
  void write(const std::string& path) const;
};

/// Current UTC time as ISO 8601.
std::string now_iso8601();

}  // namespace caplab
