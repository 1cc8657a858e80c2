// SPDX-License-Identifier: Apache-2.0
#include "caplab/judge_adapter.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace caplab {

namespace {

nlohmann::json request_payload(const ScoreRequest& request) {
  nlohmann::json payload;
  payload["context"] = to_string(request.context);
  payload["reference"] = request.reference.has_value()
                             ? nlohmann::json(*request.reference)
                             : nlohmann::json(nullptr);
  payload["candidate"] = request.candidate;
  payload["media_uri"] = request.media_uri;
  return payload;
}

/// Child process speaking one JSON line per request on stdin/stdout.
class SubprocessTransport final : public JudgeTransport {
 public:
  explicit SubprocessTransport(const AdapterConfig& config) : config_(config) {
    if (config_.command.empty()) {
      throw std::invalid_argument(
          "adapter: subprocess mode requires a command");
    }
    start();
  }

  ~SubprocessTransport() override { stop(); }

  std::string evaluate(const ScoreRequest& request) override {
    if (pid_ < 0) {
      start();
    }
    try {
      write_line(request_payload(request).dump());
      const std::string line = read_line();
      const auto parsed =
          nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (parsed.is_string()) {
        return parsed.get<std::string>();
      }
      if (parsed.is_object() && parsed.contains("raw") &&
          parsed.at("raw").is_string()) {
        return parsed.at("raw").get<std::string>();
      }
      throw TransportError(
          "adapter: response line is neither a JSON string nor {\"raw\": ...}");
    } catch (const TransportError&) {
      // A broken or wedged child cannot be reused for the next request.
      stop();
      throw;
    }
  }

 private:
  void start() {
    // Several transports may fork from worker threads concurrently, so
    // everything the child touches must be prepared before fork(): between
    // fork and exec only async-signal-safe calls are allowed (no
    // allocation — a sibling thread may hold the allocator lock).
    std::vector<char*> argv;
    argv.reserve(config_.command.size() + 1);
    for (const auto& arg : config_.command) {
      argv.push_back(const_cast<char*>(arg.c_str()));
    }
    argv.push_back(nullptr);

    // O_CLOEXEC keeps these pipes out of children forked concurrently by
    // sibling transports; the dup2 below clears the flag on the child's
    // own stdin/stdout copies.
    int to_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) {
      throw TransportError("adapter: pipe() failed");
    }
    int from_child[2];
    if (pipe2(from_child, O_CLOEXEC) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw TransportError("adapter: pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) {
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      throw TransportError("adapter: fork() failed");
    }
    if (pid_ == 0) {
      // The child inherits the host's signal handlers, which are not safe
      // to run between fork and exec; restore the defaults first.
      struct sigaction dfl = {};
      dfl.sa_handler = SIG_DFL;
      sigaction(SIGTERM, &dfl, nullptr);
      sigaction(SIGINT, &dfl, nullptr);
      sigaction(SIGPIPE, &dfl, nullptr);
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    buffer_.clear();
  }

  void stop() {
    if (in_fd_ >= 0) {
      close(in_fd_);
      in_fd_ = -1;
    }
    if (out_fd_ >= 0) {
      close(out_fd_);
      out_fd_ = -1;
    }
    if (pid_ > 0) {
      // SIGTERM with a bounded grace period, then SIGKILL so the reap
      // cannot block on a judge that ignores or mishandles the signal.
      kill(pid_, SIGTERM);
      int status = 0;
      bool reaped = false;
      for (int i = 0; i < 50 && !reaped; ++i) {
        if (waitpid(pid_, &status, WNOHANG) != 0) {
          reaped = true;
          break;
        }
        usleep(10000);
      }
      if (!reaped) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
      }
      pid_ = -1;
    }
  }

  void write_line(const std::string& line) {
    // A judge that died mid-batch must surface as a TransportError, not a
    // process-killing SIGPIPE: block the signal in this thread for the
    // write, drain any pending instance, then report the failed write.
    sigset_t pipe_set;
    sigemptyset(&pipe_set);
    sigaddset(&pipe_set, SIGPIPE);
    sigset_t old_set;
    pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);

    std::string framed = line;
    framed.push_back('\n');
    size_t written = 0;
    bool failed = false;
    while (written < framed.size()) {
      const ssize_t n =
          write(in_fd_, framed.data() + written, framed.size() - written);
      if (n <= 0) {
        failed = true;
        break;
      }
      written += static_cast<size_t>(n);
    }

    const timespec no_wait{0, 0};
    while (sigtimedwait(&pipe_set, nullptr, &no_wait) == SIGPIPE) {
    }
    pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
    if (failed) {
      throw TransportError("adapter: writing to the judge process failed");
    }
  }

  std::string read_line() {
    const int timeout_ms =
        static_cast<int>(std::lround(config_.timeout_seconds * 1000.0));
    for (;;) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return line;
      }
      pollfd pfd{out_fd_, POLLIN, 0};
      const int ready = poll(&pfd, 1, timeout_ms);
      if (ready == 0) {
        throw TransportError("adapter: judge timed out after " +
                             std::to_string(config_.timeout_seconds) + " s");
      }
      if (ready < 0) {
        throw TransportError("adapter: poll() failed");
      }
      char chunk[4096];
      const ssize_t n = read(out_fd_, chunk, sizeof(chunk));
      if (n <= 0) {
        throw TransportError("adapter: judge process closed its stream");
      }
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  AdapterConfig config_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

/// Single-request POST per evaluation.
class HttpTransport final : public JudgeTransport {
 public:
  explicit HttpTransport(const AdapterConfig& config) : config_(config) {
    if (config_.url.empty()) {
      throw std::invalid_argument("adapter: http mode requires a url");
    }
    // Split scheme://host:port from the path.
    const auto scheme_end = config_.url.find("://");
    const auto path_start = scheme_end == std::string::npos
                                ? config_.url.find('/')
                                : config_.url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      base_ = config_.url;
      path_ = "/";
    } else {
      base_ = config_.url.substr(0, path_start);
      path_ = config_.url.substr(path_start);
    }
  }

  std::string evaluate(const ScoreRequest& request) override {
    httplib::Client client(base_);
    const auto seconds = static_cast<time_t>(config_.timeout_seconds);
    const auto micros = static_cast<time_t>(
        (config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_read_timeout(seconds, micros);
    client.set_connection_timeout(seconds, micros);
    const auto response =
        client.Post(path_, request_payload(request).dump(), "application/json");
    if (!response) {
      throw TransportError("adapter: HTTP request to " + config_.url +
                           " failed: " + httplib::to_string(response.error()));
    }
    if (response->status != 200) {
      throw TransportError("adapter: HTTP status " +
                           std::to_string(response->status) + " from " +
                           config_.url);
    }
    return response->body;
  }

 private:
  AdapterConfig config_;
  std::string base_;
  std::string path_;
};

ScoreRecord score_one(JudgeTransport& transport, size_t row_index,
                      const ScoreRequest& request, const AdapterConfig& config,
                      const RewardWeights& weights) {
  ScoreRecord record;
  record.row_index = row_index;
  record.request = request;
  record.prompt =
      render_instruction(request.context, request.reference, request.candidate);
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    record.attempts = attempt + 1;
    try {
      record.raw_response = transport.evaluate(request);
    } catch (const TransportError& e) {
      record.error = e.what();
      continue;  // transport failures are retried
    }
    try {
      record.verdict = parse_judge_response(record.raw_response,
                                            request.context);
      record.reward = aggregate(record.verdict->scores, weights);
      record.error.clear();
    } catch (const std::exception& e) {
      // Malformed responses are recorded with the raw text, not retried.
      record.error = e.what();
    }
    return record;
  }
  return record;
}

}  // namespace

AdapterConfig AdapterConfig::from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  AdapterConfig config;
  const auto mode = j.value("mode", std::string("subprocess"));
  if (mode == "subprocess") {
    config.mode = Mode::subprocess;
  } else if (mode == "http") {
    config.mode = Mode::http;
  } else {
    throw std::invalid_argument("adapter: unknown mode '" + mode +
                                "' (expected subprocess or http)");
  }
  if (j.contains("command")) {
    config.command = j.at("command").get<std::vector<std::string>>();
  }
  config.url = j.value("url", std::string());
  config.timeout_seconds = j.value("timeout_seconds", 120.0);
  config.max_retries = j.value("max_retries", 2);
  config.max_connections = j.value("max_connections", 4);
  if (config.max_retries < 0 || config.max_connections < 1) {
    throw std::invalid_argument("adapter: bad retry/connection bounds");
  }
  return config;
}

std::unique_ptr<JudgeTransport> make_transport(const AdapterConfig& config) {
  if (config.mode == AdapterConfig::Mode::subprocess) {
    return std::make_unique<SubprocessTransport>(config);
  }
  return std::make_unique<HttpTransport>(config);
}

BatchResult run_score_batch(const std::vector<ScoreRequest>& rows,
                            const AdapterConfig& config,
                            const RewardWeights& weights) {
  BatchResult result;
  result.rows.resize(rows.size());
  if (!rows.empty()) {
    const size_t workers =
        std::min(static_cast<size_t>(config.max_connections), rows.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
      auto transport = make_transport(config);
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= rows.size()) {
          return;
        }
        result.rows[i] = score_one(*transport, i, rows[i], config, weights);
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back(work);
      }
      for (auto& t : pool) {
        t.join();
      }
    }
  }

  // Pair scored video rows that share a group id.
  std::map<std::string, std::vector<const ScoreRecord*>> globals;
  std::map<std::string, std::vector<const ScoreRecord*>> segments;
  for (const auto& record : result.rows) {
    if (!record.ok() || record.request.group_id.empty()) {
      continue;
    }
    if (record.request.context == JudgeContext::video_global) {
      globals[record.request.group_id].push_back(&record);
    } else if (record.request.context == JudgeContext::video_segment) {
      segments[record.request.group_id].push_back(&record);
    }
  }
  for (const auto& [group_id, global_rows] : globals) {
    const auto seg_it = segments.find(group_id);
    if (global_rows.size() != 1 || seg_it == segments.end() ||
        seg_it->second.size() != 1) {
      continue;
    }
    const ScoreRecord* global = global_rows.front();
    const ScoreRecord* segment = seg_it->second.front();
    result.combined.push_back(CombinedReward{
        group_id, global->row_index, segment->row_index,
        aggregate_video(global->reward, segment->reward, weights)});
  }
  return result;
}

std::vector<ScoreRequest> read_score_batch(std::istream& in) {
  std::vector<ScoreRequest> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("batch line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    ScoreRequest request;
    request.context = judge_context_from_string(j.at("context").get<std::string>());
    if (j.contains("reference") && !j.at("reference").is_null()) {
      request.reference = j.at("reference").get<std::string>();
    }
    request.candidate = j.at("candidate").get<std::string>();
    request.media_uri = j.value("media_uri", std::string());
    request.group_id = j.value("group_id", std::string());
    rows.push_back(std::move(request));
  }
  return rows;
}

void write_verdict_log(std::ostream& out, const BatchResult& result) {
  for (const auto& record : result.rows) {
    nlohmann::json j;
    j["row"] = record.row_index;
    j["request"] = request_payload(record.request);
    if (!record.request.group_id.empty()) {
      j["request"]["group_id"] = record.request.group_id;
    }
    j["prompt"] = record.prompt;
    j["raw_response"] = record.raw_response;
    j["attempts"] = record.attempts;
    if (record.ok()) {
      j["scores"] = {{"correctness", record.verdict->scores.s_corr},
                     {"completeness", record.verdict->scores.s_comp},
                     {"third", record.verdict->scores.s_third},
                     {"third_label",
                      record.verdict->scores.third_label ==
                              ThirdScoreLabel::reasonability
                          ? "reasonability"
                          : "text_quality"}};
      j["reward"] = record.reward;
      j["warnings"] = record.verdict->warnings;
    } else {
      j["scores"] = nullptr;
      j["error"] = record.error;
    }
    out << j.dump() << '\n';
  }
}

void write_rewards_csv(std::ostream& out, const BatchResult& result) {
  out << "row,group_id,context,status,reward\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& record : result.rows) {
    out << record.row_index << ',' << record.request.group_id << ','
        << to_string(record.request.context) << ','
        << (record.ok() ? "ok" : "error") << ',';
    if (record.ok()) {
      out << record.reward;
    }
    out << '\n';
  }
  for (const auto& combined : result.combined) {
    out << combined.global_row << ',' << combined.group_id << ",combined,ok,"
        << combined.reward << '\n';
  }
}

}  // namespace caplab
