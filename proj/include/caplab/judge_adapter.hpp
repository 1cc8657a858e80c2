// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "caplab/judge_schema.hpp"

namespace caplab {

/// A transport-level failure (child process died, timeout, HTTP error).
/// Retried up to the configured bound; schema failures are not.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How to reach the external judge.
///
/// subprocess mode speaks newline-delimited records over the child's
/// standard streams: each request is one JSON line with the payload
/// fields {context, reference, candidate, media_uri}; each response line
/// is either a JSON object {"raw": <judge text>} or a bare JSON string.
/// http mode POSTs the same payload object and reads the raw judge text
/// from the response body.
struct AdapterConfig {
  enum class Mode { subprocess, http };

  Mode mode = Mode::subprocess;
  std::vector<std::string> command;  // argv, subprocess mode
  std::string url;                   // e.g. http://127.0.0.1:8099/judge
  double timeout_seconds = 120.0;
  int max_retries = 2;
  int max_connections = 4;

  static AdapterConfig from_json_string(const std::string& text);
};

/// One batch row. group_id pairs a video_global row with a video_segment
/// row for the combined video reward; empty means unpaired.
struct ScoreRequest {
  JudgeContext context;
  std::optional<std::string> reference;
  std::string candidate;
  std::string media_uri;
  std::string group_id;
};

/// One connection to the judge. Requests are serialized per connection;
/// concurrency comes from multiple connections.
class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  /// Returns the judge's raw text for one request.
  virtual std::string evaluate(const ScoreRequest& request) = 0;
};

std::unique_ptr<JudgeTransport> make_transport(const AdapterConfig& config);

/// Everything recorded about one row: the request, the rendered prompt,
/// the raw response, the parsed verdict (or the failure), and the reward.
struct ScoreRecord {
  size_t row_index = 0;
  ScoreRequest request;
  std::string prompt;
  std::string raw_response;
  std::optional<JudgeVerdict> verdict;
  double reward = 0.0;
  std::string error;
  int attempts = 0;

  bool ok() const { return verdict.has_value(); }
};

struct CombinedReward {
  std::string group_id;
  size_t global_row;
  size_t segment_row;
  double reward;
};

struct BatchResult {
  std::vector<ScoreRecord> rows;
  std::vector<CombinedReward> combined;
};

/// Scores a whole batch. Transport failures are retried up to
/// config.max_retries and then recorded on the row; malformed or
/// schema-violating responses are recorded with the raw text; the batch
/// never aborts on a single row. Rows fan out over at most
/// config.max_connections parallel connections. Groups holding exactly
/// one scored video_global row and one scored video_segment row
/// additionally produce a combined reward r_global + w_local * r_local.
BatchResult run_score_batch(const std::vector<ScoreRequest>& rows,
                            const AdapterConfig& config,
                            const RewardWeights& weights = {});

/// JSONL batch file: one request object per line.
std::vector<ScoreRequest> read_score_batch(std::istream& in);

/// Append-only JSONL verdict log, one record per row.
void write_verdict_log(std::ostream& out, const BatchResult& result);

/// Per-row rewards plus the combined video rows, fixed 6-decimal format.
void write_rewards_csv(std::ostream& out, const BatchResult& result);

}  // namespace caplab
