// SPDX-License-Identifier: Apache-2.0
#include "caplab/judge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "caplab/reward.hpp"

namespace caplab {

namespace {

void check_shared_space(const Witness& witness, const CaptionFacts& caption) {
  if (witness.slots.n_slots() != caption.n_slots()) {
    throw DomainMismatchError(
        "judge: witness and caption live in different fact spaces");
  }
}

int clamp_score(int s) { return std::clamp(s, 0, 10); }

}  // namespace

JudgeScores::JudgeScores(int corr, int comp, int third, ThirdScoreLabel label)
    : s_corr(corr), s_comp(comp), s_third(third), third_label(label) {
  if (corr < 0 || corr > 10 || comp < 0 || comp > 10 || third < 0 ||
      third > 10) {
    throw std::invalid_argument("JudgeScores: scores must lie in 0..10");
  }
}

int round_half_away_from_zero(double x) {
  return static_cast<int>(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

JudgeScores score_judge(const Witness& witness, const CaptionFacts& caption,
                        const JudgeConfig& config, Rng* rng) {
  check_shared_space(witness, caption);
  if (config.p_flip > 0.0 && rng == nullptr) {
    throw std::invalid_argument("score_judge: p_flip > 0 requires an Rng");
  }

  const FactSubset clean = witness.clean();
  uint32_t covered = 0;
  for (uint32_t slot : clean.indices()) {
    bool verdict = caption.correct.contains(slot);
    if (config.p_flip > 0.0 && rng->bernoulli(config.p_flip)) {
      verdict = !verdict;
    }
    covered += verdict ? 1 : 0;
  }
  uint32_t collisions = 0;
  for (uint32_t slot : witness.slots.indices()) {
    bool verdict = caption.errors.contains(slot);
    if (config.p_flip > 0.0 && rng->bernoulli(config.p_flip)) {
      verdict = !verdict;
    }
    collisions += verdict ? 1 : 0;
  }

  const int s_comp =
      clean.empty() ? 10
                    : round_half_away_from_zero(
                          10.0 * static_cast<double>(covered) / clean.size());
  const int s_corr = std::max(
      0, 10 - config.penalty_per_collision * static_cast<int>(collisions));
  return JudgeScores(clamp_score(s_corr), clamp_score(s_comp), 10);
}

EventVerdict event_judge(const Witness& witness, const CaptionFacts& caption) {
  check_shared_space(witness, caption);
  return EventVerdict{
      witness.clean().is_subset_of(caption.correct),
      caption.errors.intersection_size(witness.slots) == 0,
  };
}

double aggregate(const JudgeScores& scores, const RewardWeights& weights) {
  if (weights.w_corr < 0 || weights.w_comp < 0 || weights.w_txt < 0 ||
      weights.w_local < 0) {
    throw std::invalid_argument("aggregate: weights must be non-negative");
  }
  return weights.w_corr * scores.s_corr + weights.w_comp * scores.s_comp +
         weights.w_txt * scores.s_third;
}

double aggregate_video(double r_global, double r_local,
                       const RewardWeights& weights) {
  if (!std::isfinite(r_global) || !std::isfinite(r_local)) {
    throw std::invalid_argument("aggregate_video: rewards must be finite");
  }
  return r_global + weights.w_local * r_local;
}

JudgeScores holistic_judge(const CaptionFacts& caption) {
  const auto n = static_cast<double>(caption.n_slots());
  const double balance = std::clamp(
      static_cast<double>(caption.correct.size()) - caption.errors.size(), 0.0,
      n);
  const int s = clamp_score(round_half_away_from_zero(10.0 * balance / n));
  return JudgeScores(s, s, 10);
}

JudgeScores unadjudicated_judge(const Witness& witness,
                                const CaptionFacts& caption,
                                const JudgeConfig& config) {
  check_shared_space(witness, caption);
  const FactSubset clean = witness.clean();
  const uint32_t covered = clean.intersection_size(caption.correct) +
                           witness.tainted.intersection_size(caption.errors);
  const uint32_t disagreements =
      clean.intersection_size(caption.errors) +
      witness.tainted.intersection_size(caption.correct);
  const int s_comp =
      witness.slots.empty()
          ? 10
          : round_half_away_from_zero(10.0 * static_cast<double>(covered) /
                                      witness.slots.size());
  const int s_corr =
      std::max(0, 10 - config.penalty_per_collision *
                           static_cast<int>(disagreements));
  return JudgeScores(clamp_score(s_corr), clamp_score(s_comp), 10);
}

CaptionReward make_score_reward(const RewardWeights& weights,
                                const JudgeConfig& config,
                                std::shared_ptr<Rng> noise_rng) {
  if (config.p_flip > 0.0 && noise_rng == nullptr) {
    throw std::invalid_argument("make_score_reward: p_flip > 0 needs an Rng");
  }
  return [weights, config, noise_rng](const Witness& witness,
                                      const CaptionFacts& caption) {
    return aggregate(score_judge(witness, caption, config, noise_rng.get()),
                     weights);
  };
}

CaptionReward make_joint_factor_reward(uint32_t n_total, uint32_t m_witness) {
  return [n_total, m_witness](const Witness&, const CaptionFacts& caption) {
    const RewardOperands ops(n_total, m_witness, caption.correct.size(),
                             caption.errors.size());
    return reward_factors(ops).joint;
  };
}

}  // namespace caplab
