// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>

#include "caplab/fact_space.hpp"
#include "caplab/rng.hpp"

namespace caplab {

/// Which dimension occupies the third score slot. The global video pass
/// scores segmentation reasonability there; every other context scores
/// text quality.
enum class ThirdScoreLabel { text_quality, reasonability };

/// The judge's three integer scores, each in {0, ..., 10}.
struct JudgeScores {
  int s_corr;
  int s_comp;
  int s_third;
  ThirdScoreLabel third_label = ThirdScoreLabel::text_quality;

  JudgeScores(int corr, int comp, int third,
              ThirdScoreLabel label = ThirdScoreLabel::text_quality);
};

/// Fixed aggregation weights. Defaults: w_corr 0.05, w_comp 0.04,
/// w_txt 0.01, and w_local 0.1 for the video combination.
struct RewardWeights {
  double w_corr = 0.05;
  double w_comp = 0.04;
  double w_txt = 0.01;
  double w_local = 0.1;
};

/// Simulated-judge knobs. p_flip inverts each armed-slot verdict with the
/// given probability (robustness sweeps only; the default adjudicator is
/// perfect).
struct JudgeConfig {
  int penalty_per_collision = 3;
  double p_flip = 0.0;
};

/// Rounds half-away-from-zero; the single tie rule used for score ratios.
int round_half_away_from_zero(double x);

/// Deterministic simulated judge.
///
///   s_comp  = round(10 * |R_clean ∩ C| / |R_clean|), 10 when nothing armed
///   s_corr  = max(0, 10 - penalty * |E ∩ R|)
///   s_third = 10 (the simulator emits ideal text)
///
/// R_clean excludes tainted witness slots: an adjudicated judge verifies
/// every candidate omission against ground truth, so armed slots whose
/// reference fact is itself wrong never count as omissions. Collisions are
/// counted on all armed slots — an erroneous policy fact landing on any
/// armed slot is verified and confirmed as an error.
///
/// With p_flip > 0 an Rng must be supplied; each per-slot coverage and
/// collision verdict then inverts independently with probability p_flip.
JudgeScores score_judge(const Witness& witness, const CaptionFacts& caption,
                        const JudgeConfig& config = {}, Rng* rng = nullptr);

/// The two discrete pass events whose expectations over uniform witnesses
/// are the closed-form factors: comp_pass ⇔ R_clean ⊆ C and
/// corr_pass ⇔ E ∩ R = ∅.
struct EventVerdict {
  bool comp_pass;
  bool corr_pass;
};

EventVerdict event_judge(const Witness& witness, const CaptionFacts& caption);

/// Sentence-level reward: w_corr*s_corr + w_comp*s_comp + w_txt*s_third.
double aggregate(const JudgeScores& scores, const RewardWeights& weights);

/// Video combination: r_global + w_local * r_local. Under default weights
/// the result ranges over [0, 1.1] — the local term adds to, rather than
/// averages with, the global one.
double aggregate_video(double r_global, double r_local,
                       const RewardWeights& weights);

/// Witness-free holistic stand-in (the "judge sees only the image" lesion):
/// a single coarse global score round(10 * clamp(|C| - |E|, 0, N) / N)
/// occupying both fact-level slots.
JudgeScores holistic_judge(const CaptionFacts& caption);

/// Judge with the adjudicator disabled (the "no reference image" lesion):
/// armed slots are trusted verbatim, so reference errors pollute both
/// axes. Coverage means agreeing with the reference claim — correct facts
/// at clean slots, wrong facts at tainted slots — and any disagreement at
/// an armed slot counts as a collision, including the policy being right
/// where the reference is wrong.
JudgeScores unadjudicated_judge(const Witness& witness,
                                const CaptionFacts& caption,
                                const JudgeConfig& config = {});

/// Scalar reward over a (witness, caption) pair, as consumed by training.
using CaptionReward =
    std::function<double(const Witness&, const CaptionFacts&)>;

/// The full simulated-judge reward: score_judge then aggregate.
CaptionReward make_score_reward(const RewardWeights& weights = {},
                                const JudgeConfig& config = {},
                                std::shared_ptr<Rng> noise_rng = nullptr);

/// Closed-form landscape reward: the joint factor evaluated at the
/// caption's realized (|C|, |E|) with a nominal witness size m. Ignores
/// the witness argument.
CaptionReward make_joint_factor_reward(uint32_t n_total, uint32_t m_witness);

}  // namespace caplab
