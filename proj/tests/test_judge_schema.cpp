// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "caplab/judge_schema.hpp"

using namespace caplab;

TEST_CASE("response fixtures parse to the documented triples") {
  auto v = parse_judge_response(
      R"({"Analysis":"ok","Correctness":9,"Completeness":7,"Text Quality":10})",
      JudgeContext::image_ref);
  CHECK(v.scores.s_corr == 9);
  CHECK(v.scores.s_comp == 7);
  CHECK(v.scores.s_third == 10);
  CHECK(v.scores.third_label == ThirdScoreLabel::text_quality);
  CHECK(v.analysis == "ok");
  CHECK_FALSE(v.clamped);

  // the global video pass scores Reasonability in the third slot
  v = parse_judge_response(
      R"({"Analysis":"ok","Reasonability":8,"Correctness":9,"Completeness":6})",
      JudgeContext::video_global);
  CHECK(v.scores.s_corr == 9);
  CHECK(v.scores.s_comp == 6);
  CHECK(v.scores.s_third == 8);
  CHECK(v.scores.third_label == ThirdScoreLabel::reasonability);

  v = parse_judge_response(
      R"({"Analysis":"seg","Correctness":5,"Completeness":4,"Text Quality":3})",
      JudgeContext::video_segment);
  CHECK(v.scores.s_corr == 5);
  CHECK(v.scores.s_comp == 4);
  CHECK(v.scores.s_third == 3);
}

TEST_CASE("the object may be embedded in surrounding prose") {
  const auto v = parse_judge_response(
      "Here is my verdict { after much thought }:\n"
      R"({"Analysis":"braces {inside} a string","Correctness":6,)"
      R"("Completeness":5,"Text Quality":4})"
      "\nThat is all.",
      JudgeContext::image_noref);
  CHECK(v.scores.s_corr == 6);
  CHECK(v.analysis == "braces {inside} a string");
}

TEST_CASE("zero or multiple objects are malformed") {
  CHECK_THROWS_AS(parse_judge_response("not json", JudgeContext::image_ref),
                  MalformedResponseError);
  CHECK_THROWS_AS(parse_judge_response("", JudgeContext::image_ref),
                  MalformedResponseError);
  try {
    parse_judge_response(
        R"({"Analysis":"a","Correctness":1,"Completeness":1,"Text Quality":1})"
        R"( {"Analysis":"b","Correctness":2,"Completeness":2,"Text Quality":2})",
        JudgeContext::image_ref);
    FAIL("expected MalformedResponseError");
  } catch (const MalformedResponseError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("schema errors name the offending key") {
  try {
    parse_judge_response(R"({"Analysis":"x","Correctness":9,"Completeness":7})",
                         JudgeContext::image_ref);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("Text Quality") != std::string::npos);
  }
  CHECK_THROWS_AS(
      parse_judge_response(
          R"({"Correctness":9,"Completeness":7,"Text Quality":10})",
          JudgeContext::image_ref),
      SchemaError);
  // non-integer scores are rejected
  CHECK_THROWS_AS(
      parse_judge_response(
          R"({"Analysis":"x","Correctness":7.5,"Completeness":7,"Text Quality":10})",
          JudgeContext::image_ref),
      SchemaError);
  // the global video schema requires Reasonability
  CHECK_THROWS_AS(
      parse_judge_response(
          R"({"Analysis":"x","Correctness":9,"Completeness":7,"Text Quality":10})",
          JudgeContext::video_global),
      SchemaError);
}

TEST_CASE("out-of-range scores clamp with a warning") {
  const auto v = parse_judge_response(
      R"({"Analysis":"x","Correctness":15,"Completeness":-2,"Text Quality":10})",
      JudgeContext::image_ref);
  CHECK(v.clamped);
  CHECK(v.scores.s_corr == 10);
  CHECK(v.scores.s_comp == 0);
  CHECK(v.warnings.size() == 2);
}

TEST_CASE("instruction rendering substitutes the placeholder tokens") {
  const auto prompt =
      render_instruction(JudgeContext::image_ref, std::string("a cat"), "a dog");
  CHECK(prompt.find("Reference Caption: a cat") != std::string::npos);
  CHECK(prompt.find("Generated Caption: a dog") != std::string::npos);
  CHECK(prompt.find("{ref_answer}") == std::string::npos);
  CHECK(prompt.find("{gen_solution}") == std::string::npos);

  const auto noref =
      render_instruction(JudgeContext::image_noref, std::nullopt, "a dog");
  CHECK(noref.find("Generated Caption: a dog") != std::string::npos);
  CHECK(noref.find("Reference Caption") == std::string::npos);

  const auto segment = render_instruction(JudgeContext::video_segment,
                                          std::string("whole-video ref"),
                                          "segment cap");
  CHECK(segment.find("whole-video ref") != std::string::npos);
  CHECK(segment.find("segment cap") != std::string::npos);
  CHECK(segment.find("{REF_DESC}") == std::string::npos);
  CHECK(segment.find("{GEN_DESC}") == std::string::npos);
}

TEST_CASE("reference caption presence is enforced per context") {
  CHECK_THROWS_AS(
      render_instruction(JudgeContext::image_ref, std::nullopt, "cap"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      render_instruction(JudgeContext::video_global, std::nullopt, "cap"),
      std::invalid_argument);
  CHECK_THROWS_AS(render_instruction(JudgeContext::image_noref,
                                     std::string("ref"), "cap"),
                  std::invalid_argument);
}

TEST_CASE("rendered verdicts parse back to identical scores") {
  for (const auto context :
       {JudgeContext::image_ref, JudgeContext::image_noref,
        JudgeContext::video_global, JudgeContext::video_segment}) {
    const JudgeScores scores(9, 4, 7,
                             context == JudgeContext::video_global
                                 ? ThirdScoreLabel::reasonability
                                 : ThirdScoreLabel::text_quality);
    const auto text = render_judge_response(scores, "round trip", context);
    const auto verdict = parse_judge_response(text, context);
    CHECK(verdict.scores.s_corr == scores.s_corr);
    CHECK(verdict.scores.s_comp == scores.s_comp);
    CHECK(verdict.scores.s_third == scores.s_third);
    CHECK(verdict.scores.third_label == scores.third_label);
    CHECK(verdict.analysis == "round trip");
  }
}

TEST_CASE("context names round-trip") {
  for (const auto context :
       {JudgeContext::image_ref, JudgeContext::image_noref,
        JudgeContext::video_global, JudgeContext::video_segment}) {
    CHECK(judge_context_from_string(to_string(context)) == context);
  }
  CHECK_THROWS_AS(judge_context_from_string("audio"), std::invalid_argument);
}

TEST_CASE("prompt asset files match the embedded templates") {
  const std::pair<JudgeContext, const char*> assets[] = {
      {JudgeContext::image_ref, "image_ref.txt"},
      {JudgeContext::image_noref, "image_noref.txt"},
      {JudgeContext::video_global, "video_global.txt"},
      {JudgeContext::video_segment, "video_segment.txt"},
  };
  for (const auto& [context, filename] : assets) {
    const std::string path =
        std::string(CAPLAB_SOURCE_DIR) + "/assets/prompts/" + filename;
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    CHECK_MESSAGE(buffer.str() == instruction_template(context), filename);
  }
}
