// SPDX-License-Identifier: Apache-2.0
//
// Deterministic stand-in for an external judge endpoint. Reads one JSON
// request per stdin line and answers with {"raw": <judge text>}, or serves
// the same responses over HTTP with --http PORT. The response modes let
// tests exercise the full parse/retry surface offline.

#include <unistd.h>

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace {

struct Options {
  int corr = 9;
  int comp = 7;
  int third = 10;
  std::string mode = "ok";   // ok | malformed | out_of_range | two_objects
  int sleep_ms = 0;
  int die_after = 0;         // exit after N responses (0 = never)
};

std::string judge_text(const Options& opts, const std::string& context) {
  if (opts.mode == "malformed") {
    return "the judge rambles and returns no object at all";
  }
  if (opts.mode == "two_objects") {
    return R"({"Analysis":"a","Correctness":1,"Completeness":1,"Text Quality":1} )"
           R"({"Analysis":"b","Correctness":2,"Completeness":2,"Text Quality":2})";
  }
  const int corr = opts.mode == "out_of_range" ? 15 : opts.corr;
  nlohmann::ordered_json obj;
  obj["Analysis"] = "echo judge: fixed verdict";
  if (context == "video_global") {
    obj["Reasonability"] = opts.third;
    obj["Correctness"] = corr;
    obj["Completeness"] = opts.comp;
  } else {
    obj["Correctness"] = corr;
    obj["Completeness"] = opts.comp;
    obj["Text Quality"] = opts.third;
  }
  return "Verdict follows.\n" + obj.dump();
}

int run_stdio(const Options& opts) {
  std::string line;
  int served = 0;
  while (std::getline(std::cin, line)) {
    if (line.empty()) {
      continue;
    }
    std::string context = "image_ref";
    const auto parsed = nlohmann::json::parse(line, nullptr, false);
    if (!parsed.is_discarded() && parsed.contains("context")) {
      context = parsed.at("context").get<std::string>();
    }
    if (opts.sleep_ms > 0) {
      usleep(static_cast<useconds_t>(opts.sleep_ms) * 1000);
    }
    nlohmann::json response;
    response["raw"] = judge_text(opts, context);
    std::cout << response.dump() << std::endl;
    if (opts.die_after > 0 && ++served >= opts.die_after) {
      return 0;
    }
  }
  return 0;
}

int run_http(const Options& opts, int port) {
  httplib::Server server;
  server.Post("/judge", [&](const httplib::Request& req,
                            httplib::Response& res) {
    std::string context = "image_ref";
    const auto parsed = nlohmann::json::parse(req.body, nullptr, false);
    if (!parsed.is_discarded() && parsed.contains("context")) {
      context = parsed.at("context").get<std::string>();
    }
    res.set_content(judge_text(opts, context), "text/plain");
  });
  return server.listen("127.0.0.1", port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echo judge: deterministic offline judge endpoint"};
  Options opts;
  int http_port = 0;
  app.add_option("--corr", opts.corr, "Correctness score to emit");
  app.add_option("--comp", opts.comp, "Completeness score to emit");
  app.add_option("--third", opts.third, "Third-dimension score to emit");
  app.add_option("--mode", opts.mode, "ok | malformed | out_of_range | two_objects")
      ->check(CLI::IsMember({"ok", "malformed", "out_of_range", "two_objects"}));
  app.add_option("--sleep-ms", opts.sleep_ms, "Delay before each response");
  app.add_option("--die-after", opts.die_after, "Exit after N responses");
  app.add_option("--http", http_port, "Serve POST /judge on this port");
  CLI11_PARSE(app, argc, argv);
  return http_port > 0 ? run_http(opts, http_port) : run_stdio(opts);
}
