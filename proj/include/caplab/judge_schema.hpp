// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "caplab/errors.hpp"
#include "caplab/judge.hpp"

namespace caplab {

/// The four judging contexts, each with its own instruction template and
/// score-key schema.
enum class JudgeContext { image_ref, image_noref, video_global, video_segment };

std::string to_string(JudgeContext context);
JudgeContext judge_context_from_string(const std::string& name);

/// Where a verdict came from.
enum class VerdictSource { simulated_score, simulated_event, external };

/// A parsed judge response.
struct JudgeVerdict {
  JudgeScores scores;
  std::string analysis;
  VerdictSource source = VerdictSource::external;
  /// Set when any score arrived outside 0..10 and was clamped.
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// The verbatim instruction template for a context, with its placeholder
/// tokens ({ref_answer}/{gen_solution} for images, {REF_DESC}/{GEN_DESC}
/// for videos) still in place.
const std::string& instruction_template(JudgeContext context);

/// Renders the instruction for a context. The reference caption is
/// mandatory except for image_noref, which must not receive one.
std::string render_instruction(JudgeContext context,
                               const std::optional<std::string>& reference,
                               const std::string& candidate);

/// Extracts exactly one JSON object from the judge's raw text and maps it
/// onto a score triple.
///
/// Expected keys: "Analysis" plus "Correctness"/"Completeness"/
/// "Text Quality" ("Reasonability" replaces "Text Quality" for
/// video_global, where it lands in the third score slot). Scores must be
/// JSON integers; values outside 0..10 are clamped with a warning.
///
/// Throws MalformedResponseError when zero or multiple parseable objects
/// are present, and SchemaError (naming the key) for missing keys,
/// non-integer scores, or a non-string analysis.
JudgeVerdict parse_judge_response(const std::string& raw, JudgeContext context);

/// Renders a score triple back into the response-object text a judge
/// would emit for the context; parse_judge_response inverts it.
std::string render_judge_response(const JudgeScores& scores,
                                  const std::string& analysis,
                                  JudgeContext context);

}  // namespace caplab
