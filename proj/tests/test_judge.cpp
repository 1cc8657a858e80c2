// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "caplab/judge.hpp"
#include "caplab/reward.hpp"

using namespace caplab;

namespace {

const FactSpace kSpace(10);

CaptionFacts make_caption(std::vector<uint32_t> correct,
                          std::vector<uint32_t> errors) {
  return CaptionFacts(FactSubset::from_indices(kSpace, correct),
                      FactSubset::from_indices(kSpace, errors));
}

}  // namespace

TEST_CASE("score judge fixture: coverage ratio and collision penalty") {
  // m=4, |R ∩ C| = 3, |E ∩ R| = 1, penalty 3
  const Witness witness(FactSubset::from_indices(kSpace, {0, 1, 2, 3}));
  const auto caption = make_caption({0, 1, 2}, {3});
  const auto scores = score_judge(witness, caption);
  CHECK(scores.s_comp == 8);  // round(7.5) goes away from zero
  CHECK(scores.s_corr == 7);  // 10 - 3*1
  CHECK(scores.s_third == 10);
  CHECK(scores.third_label == ThirdScoreLabel::text_quality);
}

TEST_CASE("score judge: clean caption scores perfect") {
  const Witness witness(FactSubset::from_indices(kSpace, {1, 2}));
  const auto caption = make_caption({0, 1, 2, 3}, {5});
  const auto scores = score_judge(witness, caption);
  CHECK(scores.s_corr == 10);
  CHECK(scores.s_comp == 10);
  CHECK(scores.s_third == 10);
}

TEST_CASE("score judge: empty witness means nothing armed") {
  const Witness witness{FactSubset(kSpace)};
  const auto scores = score_judge(witness, make_caption({}, {4, 5}));
  CHECK(scores.s_corr == 10);
  CHECK(scores.s_comp == 10);
}

TEST_CASE("score judge clamps heavy collision counts at zero") {
  const Witness witness(FactSubset::from_indices(kSpace, {0, 1, 2, 3, 4}));
  const auto scores = score_judge(witness, make_caption({}, {0, 1, 2, 3, 4}));
  CHECK(scores.s_corr == 0);
  CHECK(scores.s_comp == 0);
}

TEST_CASE("score judge monotonicity in overlap counts") {
  const Witness witness(FactSubset::from_indices(kSpace, {0, 1, 2, 3}));
  int prev_comp = -1;
  for (uint32_t overlap = 0; overlap <= 4; ++overlap) {
    std::vector<uint32_t> correct;
    for (uint32_t i = 0; i < overlap; ++i) correct.push_back(i);
    const auto s = score_judge(witness, make_caption(correct, {}));
    CHECK(s.s_comp >= prev_comp);
    prev_comp = s.s_comp;
  }
  int prev_corr = 11;
  for (uint32_t hits = 0; hits <= 3; ++hits) {
    std::vector<uint32_t> errors;
    for (uint32_t i = 0; i < hits; ++i) errors.push_back(i);
    const auto s = score_judge(witness, make_caption({}, errors));
    CHECK(s.s_corr <= prev_corr);
    prev_corr = s.s_corr;
  }
}

TEST_CASE("adjudication excludes tainted slots from coverage") {
  const auto armed = FactSubset::from_indices(kSpace, {0, 1, 2, 3});
  const auto taint = FactSubset::from_indices(kSpace, {3});
  const Witness witness(armed, taint, WitnessMode::override_all);
  // Policy covers exactly the clean slots; slot 3's reference fact is
  // wrong, so leaving it out is not an omission.
  const auto scores = score_judge(witness, make_caption({0, 1, 2}, {}));
  CHECK(scores.s_comp == 10);
  // but an erroneous policy fact on any armed slot is still a collision
  const auto scores2 = score_judge(witness, make_caption({0, 1, 2}, {3}));
  CHECK(scores2.s_corr == 7);
}

TEST_CASE("event judge fixtures") {
  const Witness w(FactSubset::from_indices(kSpace, {1, 2}));
  auto verdict = event_judge(w, make_caption({0, 1, 2}, {5}));
  CHECK(verdict.comp_pass);
  CHECK(verdict.corr_pass);

  verdict = event_judge(w, make_caption({1}, {2}));
  CHECK_FALSE(verdict.comp_pass);
  CHECK_FALSE(verdict.corr_pass);
}

TEST_CASE("event judge frequencies reproduce the closed forms") {
  const RewardOperands ops(10, 2, 5, 2);
  const auto caption = make_caption({0, 1, 2, 3, 4}, {5, 6});
  Rng rng(31337);
  int comp_hits = 0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const Witness witness(sample_subset(kSpace, ops.m_witness, rng));
    comp_hits += event_judge(witness, caption).comp_pass ? 1 : 0;
  }
  CHECK(std::abs(static_cast<double>(comp_hits) / draws - 2.0 / 9.0) < 0.01);
}

TEST_CASE("event judge means over enumerated witnesses are exact") {
  for (uint32_t n = 1; n <= 10; ++n) {
    const FactSpace space(n);
    for (uint32_t c = 0; c <= n; ++c) {
      for (uint32_t e = 0; c + e <= n; ++e) {
        std::vector<uint32_t> cidx(c), eidx(e);
        for (uint32_t i = 0; i < c; ++i) cidx[i] = i;
        for (uint32_t i = 0; i < e; ++i) eidx[i] = c + i;
        const CaptionFacts caption(FactSubset::from_indices(space, cidx),
                                   FactSubset::from_indices(space, eidx));
        for (uint32_t m = 0; m <= n; ++m) {
          uint64_t comp = 0;
          uint64_t corr = 0;
          uint64_t total = 0;
          for_each_subset(space, m, [&](const FactSubset& r) {
            const auto v = event_judge(Witness(r), caption);
            comp += v.comp_pass ? 1 : 0;
            corr += v.corr_pass ? 1 : 0;
            ++total;
          });
          CHECK(Rational(comp, total) ==
                p_recall_exact(RewardOperands(n, m, c, e)));
          CHECK(Rational(corr, total) ==
                p_coll_exact(RewardOperands(n, m, c, e)));
        }
      }
    }
  }
}

TEST_CASE("judge rejects mismatched spaces") {
  const Witness witness{FactSubset(FactSpace(4))};
  const FactSpace other(5);
  const CaptionFacts caption{FactSubset(other), FactSubset(other)};
  CHECK_THROWS_AS(score_judge(witness, caption), DomainMismatchError);
  CHECK_THROWS_AS(event_judge(witness, caption), DomainMismatchError);
}

TEST_CASE("aggregation fixtures") {
  const RewardWeights defaults;
  CHECK(aggregate(JudgeScores(8, 6, 10), defaults) == doctest::Approx(0.74));
  CHECK(aggregate(JudgeScores(0, 0, 0), defaults) == 0.0);
  CHECK(aggregate(JudgeScores(10, 10, 10), defaults) == doctest::Approx(1.0));
}

TEST_CASE("aggregation is linear and scales with the weights") {
  RewardWeights w;
  const JudgeScores s(7, 3, 9);
  const double base = aggregate(s, w);
  RewardWeights doubled{w.w_corr * 2, w.w_comp * 2, w.w_txt * 2, w.w_local};
  CHECK(aggregate(s, doubled) == doctest::Approx(2.0 * base));
  const JudgeScores corr_only(1, 0, 0);
  CHECK(aggregate(corr_only, w) == doctest::Approx(w.w_corr));
}

TEST_CASE("video aggregation fixtures") {
  const RewardWeights w;
  CHECK(aggregate_video(0.74, 0.5, w) == doctest::Approx(0.79));
  CHECK(aggregate_video(0.42, 0.0, w) == doctest::Approx(0.42));
  // the local term adds on top of the unit-range global reward
  CHECK(aggregate_video(1.0, 1.0, w) == doctest::Approx(1.1));
}

TEST_CASE("adjudicator noise flips verdicts at the configured rate") {
  const Witness witness(FactSubset::from_indices(kSpace, {0, 1, 2, 3, 4}));
  const auto caption = make_caption({0, 1, 2, 3, 4}, {});
  JudgeConfig config;
  config.p_flip = 0.5;
  CHECK_THROWS_AS(score_judge(witness, caption, config), std::invalid_argument);
  Rng rng(77);
  double total = 0.0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    total += score_judge(witness, caption, config, &rng).s_comp;
  }
  // each covered verdict flips half the time, so coverage averages 1/2
  CHECK(std::abs(total / trials - 5.0) < 0.1);
}

TEST_CASE("holistic stand-in emits one coarse global score") {
  const auto scores = holistic_judge(make_caption({0, 1, 2, 3, 4, 5}, {6}));
  CHECK(scores.s_corr == scores.s_comp);
  CHECK(scores.s_corr == 5);  // round(10 * (6-1)/10)
  CHECK(holistic_judge(make_caption({}, {0, 1})).s_comp == 0);  // clamped
}

TEST_CASE("unadjudicated judge lets reference errors pollute both axes") {
  const auto armed = FactSubset::from_indices(kSpace, {0, 1, 2, 3});
  const auto taint = FactSubset::from_indices(kSpace, {3});
  const Witness witness(armed, taint, WitnessMode::override_all);
  // The policy is right everywhere, but slot 3 disagrees with the
  // (wrong) reference claim: counted against correctness, and its
  // coverage is denied.
  const auto scores = unadjudicated_judge(witness, make_caption({0, 1, 2, 3}, {}));
  CHECK(scores.s_corr == 7);
  CHECK(scores.s_comp == 8);  // 3 of 4 armed slots "covered"
  // Emitting the same wrong fact as the reference is rewarded instead.
  const auto polluted = unadjudicated_judge(witness, make_caption({0, 1, 2}, {3}));
  CHECK(polluted.s_corr == 10);
  CHECK(polluted.s_comp == 10);
}

TEST_CASE("score reward factory composes judge and aggregation") {
  const auto reward = make_score_reward();
  const Witness witness(FactSubset::from_indices(kSpace, {0, 1, 2, 3}));
  const auto caption = make_caption({0, 1, 2}, {3});
  CHECK(reward(witness, caption) ==
        doctest::Approx(aggregate(score_judge(witness, caption), {})));
}

TEST_CASE("joint factor reward reads sizes off the caption") {
  const auto reward = make_joint_factor_reward(10, 2);
  const Witness ignored{FactSubset(kSpace)};
  CHECK(reward(ignored, make_caption({0, 1, 2, 3, 4}, {5, 6})) ==
        doctest::Approx(56.0 / 405.0));
  CHECK(reward(ignored, make_caption({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {})) ==
        doctest::Approx(1.0));
}
