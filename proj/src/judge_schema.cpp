// SPDX-License-Identifier: Apache-2.0
#include "caplab/judge_schema.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace caplab {

namespace {

// The four instruction templates, byte-identical to the files under
// assets/prompts/ (a test enforces the equality).
const std::string kImageRefTemplate = R"PROMPT(You are an expert in image captioning. I will provide a Reference Caption and a Generated Caption for the Input Image above. Use the Input Image as ground truth and the Reference Caption as auxiliary context to evaluate the Correctness, Completeness, and Text Quality of the Generated Caption.

Principles:
- The Image is the source of truth. If the Reference Caption conflicts with the Image, prioritize the Image; the Reference Caption is auxiliary only.
- Pay more attention to salient content (main subjects, key attributes such as count/color/type, actions, crucial spatial relations) than to background minutiae.

Operation steps:
1. Analyze the Generated Caption on three dimensions:
   - Correctness: does it accurately represent the image, free of objects not present, inaccuracies, or contradictions? Fewer mistakes is better.
   - Completeness: does it cover all objects in detail with no omissions of details or objects? Fewer omissions is better.
   - Text Quality: is it logically fluent, coherent, concise (no repetitions), and aesthetically pleasing? Penalize any meta-text unrelated to the image content, e.g. self-evaluations such as "all elements have been described" or "no detail or object is omitted."
2. Provide an integer score in {0, 1, ..., 10} for each dimension.

Input:
Reference Caption: {ref_answer}
Generated Caption: {gen_solution}

Output format (strict). Return exactly one JSON object:
{"Analysis": <your analysis>, "Correctness": score1, "Completeness": score2, "Text Quality": score3}
)PROMPT";

const std::string kImageNorefTemplate = R"PROMPT(You are an expert in image captioning. I will provide a Generated Caption for the Input Image above. Use the Input Image as the sole source of truth to evaluate the Correctness, Completeness, and Text Quality of the Generated Caption.

Principles:
- The Image is the source of truth; ground every judgment directly in the image.
- Pay more attention to salient content (main subjects, key attributes such as count/color/type, actions, crucial spatial relations) than to background minutiae.

Operation steps:
1. Analyze the Generated Caption on three dimensions:
   - Correctness: does it accurately represent the image, free of objects not present, inaccuracies, or contradictions? Fewer mistakes is better.
   - Completeness: does it cover all objects in detail with no omissions of details or objects? Fewer omissions is better.
   - Text Quality: is it logically fluent, coherent, concise (no repetitions), and aesthetically pleasing? Penalize courtesy text, modification notes, personal feedback or suggestions, and any self-evaluations such as "all the elements of the image have been clearly described" or "no detail or object is omitted/overlooked."
2. Provide an integer score in {0, 1, ..., 10} for each dimension.

Input:
Generated Caption: {gen_solution}

Output format (strict). Return exactly one JSON object:
{"Analysis": <your analysis>, "Correctness": score1, "Completeness": score2, "Text Quality": score3}
)PROMPT";

const std::string kVideoGlobalTemplate = R"PROMPT(You are an expert video-description quality evaluator. The frames above are extracted from a video, each tagged with a timestamp (in seconds). You are given a Reference Description as auxiliary information and a Generated Description to be evaluated. Use the video frames as the only ground truth and rate the Generated Description on three dimensions: Reasonability, Correctness, and Completeness.

Principles:
- Be evidence-based: only contents visible in the frames count as ground truth. If the Reference Description and the Generated Description disagree, judge by the frames.
- Pay main attention to salient content (main subjects, key attributes, key actions/events over time, important interactions/spatial relations); more details are preferred.

Definitions:
- Reasonability (segmentation): are the segment splits appropriate, with each segment having a coherent and relatively independent topic, and with boundaries aligned to visible content changes?
- Correctness: does the Generated Description avoid hallucinations, inaccuracies, contradictions, and timestamp mismatches in each segment's description and in the global summary? Are the time ranges of important events labelled accurately?
- Completeness: does it cover all major visible entities, attributes, fine-grained details, and events, both per segment and in the global summary?

Operation steps:
1. Read the Generated Description; inspect frames in timestamp order; compare against the Reference Description and decide by frames on disagreements.
2. List confirmed hallucinations, inaccuracies, omissions, and timestamp mismatches per dimension.
3. Provide an integer score in {0, 1, ..., 10} for each dimension.

Input:
Reference Description: {REF_DESC}
Generated Description: {GEN_DESC}

Output format (strict). Return exactly one JSON object:
{"Analysis": <your analysis>, "Reasonability": score1, "Correctness": score2, "Completeness": score3}
)PROMPT";

const std::string kVideoSegmentTemplate = R"PROMPT(You are an expert video-description quality evaluator. The frames above belong to a single video segment, each tagged with a timestamp. You are given a Reference Description for the whole video as auxiliary information and a Generated Description for the segment to be evaluated. Use the segment frames as the only ground truth and rate Correctness, Completeness, and Text Quality.

Principles:
- Be evidence-based: only contents visible in the segment frames count as ground truth. If the Reference Description and the Generated Description disagree, judge by the frames.
- The Reference Description spans the whole video and contains content outside the segment; ignore such out-of-range parts.
- Pay main attention to salient content (main subjects, key attributes, key actions/events over time, important interactions/spatial relations); more details are preferred.

Definitions:
- Correctness: does the Generated Description avoid hallucinations, inaccuracies, contradictions, and timestamp mismatches? Are the time ranges of important events labelled accurately?
- Completeness: does it cover all major visible entities, attributes, fine-grained details, and events in the segment?
- Text Quality: is it logically fluent, coherent, concise (no repetitions), aesthetically pleasing, and free of text unrelated to the video content?

Operation steps:
1. Read the Generated Description; inspect the segment frames in timestamp order; compare against the Reference Description and decide by frames on disagreements.
2. List confirmed hallucinations, inaccuracies, omissions, and timestamp mismatches per dimension.
3. Provide an integer score in {0, 1, ..., 10} for each dimension.

Input:
Reference Description (whole video): {REF_DESC}
Generated Description (segment): {GEN_DESC}

Output format (strict). Return exactly one JSON object:
{"Analysis": <your analysis>, "Correctness": score1, "Completeness": score2, "Text Quality": score3}
)PROMPT";

void replace_all(std::string& text, const std::string& token,
                 const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    text.replace(pos, token.size(), value);
    pos += value.size();
  }
}

/// All non-overlapping top-level substrings that parse as JSON objects,
/// located by quote-aware brace matching.
std::vector<nlohmann::json> extract_objects(const std::string& raw) {
  std::vector<nlohmann::json> found;
  size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    size_t end = std::string::npos;
    for (size_t j = i; j < raw.size(); ++j) {
      const char c = raw[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          end = j;
          break;
        }
      }
    }
    if (end == std::string::npos) {
      ++i;
      continue;
    }
    auto parsed = nlohmann::json::parse(raw.substr(i, end - i + 1),
                                        /*cb=*/nullptr,
                                        /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      found.push_back(std::move(parsed));
      i = end + 1;
    } else {
      ++i;
    }
  }
  return found;
}

int require_int_score(const nlohmann::json& obj, const std::string& key,
                      JudgeVerdict& verdict) {
  if (!obj.contains(key)) {
    throw SchemaError("judge response is missing key '" + key + "'");
  }
  const auto& value = obj.at(key);
  if (!value.is_number_integer() && !value.is_number_unsigned()) {
    throw SchemaError("judge response key '" + key +
                      "' must be an integer score");
  }
  long long score = value.get<long long>();
  if (score < 0 || score > 10) {
    verdict.clamped = true;
    verdict.warnings.push_back("score '" + key + "' = " +
                               std::to_string(score) + " clamped into 0..10");
    score = std::clamp(score, 0LL, 10LL);
  }
  return static_cast<int>(score);
}

}  // namespace

std::string to_string(JudgeContext context) {
  switch (context) {
    case JudgeContext::image_ref:
      return "image_ref";
    case JudgeContext::image_noref:
      return "image_noref";
    case JudgeContext::video_global:
      return "video_global";
    case JudgeContext::video_segment:
      return "video_segment";
  }
  throw std::logic_error("to_string: unknown JudgeContext");
}

JudgeContext judge_context_from_string(const std::string& name) {
  if (name == "image_ref") return JudgeContext::image_ref;
  if (name == "image_noref") return JudgeContext::image_noref;
  if (name == "video_global") return JudgeContext::video_global;
  if (name == "video_segment") return JudgeContext::video_segment;
  throw std::invalid_argument(
      "unknown judge context '" + name +
      "' (expected image_ref, image_noref, video_global, or video_segment)");
}

const std::string& instruction_template(JudgeContext context) {
  switch (context) {
    case JudgeContext::image_ref:
      return kImageRefTemplate;
    case JudgeContext::image_noref:
      return kImageNorefTemplate;
    case JudgeContext::video_global:
      return kVideoGlobalTemplate;
    case JudgeContext::video_segment:
      return kVideoSegmentTemplate;
  }
  throw std::logic_error("instruction_template: unknown JudgeContext");
}

std::string render_instruction(JudgeContext context,
                               const std::optional<std::string>& reference,
                               const std::string& candidate) {
  if (context == JudgeContext::image_noref) {
    if (reference.has_value()) {
      throw std::invalid_argument(
          "render_instruction: image_noref takes no reference caption");
    }
  } else if (!reference.has_value()) {
    throw std::invalid_argument("render_instruction: context " +
                                to_string(context) +
                                " requires a reference caption");
  }
  std::string text = instruction_template(context);
  if (context == JudgeContext::image_ref) {
    replace_all(text, "{ref_answer}", *reference);
  }
  if (context == JudgeContext::image_ref ||
      context == JudgeContext::image_noref) {
    replace_all(text, "{gen_solution}", candidate);
  } else {
    replace_all(text, "{REF_DESC}", *reference);
    replace_all(text, "{GEN_DESC}", candidate);
  }
  return text;
}

JudgeVerdict parse_judge_response(const std::string& raw,
                                  JudgeContext context) {
  const auto objects = extract_objects(raw);
  if (objects.empty()) {
    throw MalformedResponseError(
        "judge response contains no parseable JSON object");
  }
  if (objects.size() > 1) {
    throw MalformedResponseError("judge response contains " +
                                 std::to_string(objects.size()) +
                                 " JSON objects; expected exactly one");
  }
  const auto& obj = objects.front();

  JudgeVerdict verdict{JudgeScores(0, 0, 0), "", VerdictSource::external,
                       false, {}};
  if (!obj.contains("Analysis")) {
    throw SchemaError("judge response is missing key 'Analysis'");
  }
  if (!obj.at("Analysis").is_string()) {
    throw SchemaError("judge response key 'Analysis' must be a string");
  }
  verdict.analysis = obj.at("Analysis").get<std::string>();

  const int corr = require_int_score(obj, "Correctness", verdict);
  const int comp = require_int_score(obj, "Completeness", verdict);
  if (context == JudgeContext::video_global) {
    const int reas = require_int_score(obj, "Reasonability", verdict);
    verdict.scores =
        JudgeScores(corr, comp, reas, ThirdScoreLabel::reasonability);
  } else {
    const int txt = require_int_score(obj, "Text Quality", verdict);
    verdict.scores = JudgeScores(corr, comp, txt, ThirdScoreLabel::text_quality);
  }
  return verdict;
}

std::string render_judge_response(const JudgeScores& scores,
                                  const std::string& analysis,
                                  JudgeContext context) {
  nlohmann::ordered_json obj;
  obj["Analysis"] = analysis;
  if (context == JudgeContext::video_global) {
    obj["Reasonability"] = scores.s_third;
    obj["Correctness"] = scores.s_corr;
    obj["Completeness"] = scores.s_comp;
  } else {
    obj["Correctness"] = scores.s_corr;
    obj["Completeness"] = scores.s_comp;
    obj["Text Quality"] = scores.s_third;
  }
  return obj.dump();
}

}  // namespace caplab
