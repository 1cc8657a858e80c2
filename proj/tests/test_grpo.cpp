// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "caplab/grpo.hpp"

using namespace caplab;

namespace {

GrpoConfig small_config(size_t group_size) {
  GrpoConfig cfg;
  cfg.group_size = group_size;
  return cfg;
}

PolicyParams random_policy(const FactSpace& space, Rng& rng, double scale) {
  std::vector<LogitTriple> logits(space.n_slots());
  for (auto& triple : logits) {
    for (auto& v : triple) {
      v = (rng.uniform01() - 0.5) * 2.0 * scale;
    }
  }
  return PolicyParams(space, std::move(logits));
}

ReferencePool uniform_pool(const FactSpace& space, uint32_t m, size_t size,
                           Rng& rng) {
  ReferencePool pool;
  for (size_t i = 0; i < size; ++i) {
    pool.entries.push_back(
        PoolEntry{Witness(sample_subset(space, m, rng)), 0, "fixture"});
  }
  return pool;
}

}  // namespace

TEST_CASE("advantage fixtures") {
  auto group = compute_advantages({0.2, 0.4, 0.6, 0.8}, small_config(4));
  CHECK(group.mean_r == doctest::Approx(0.5));
  CHECK(group.std_r == doctest::Approx(std::sqrt(0.05)));
  const std::array<double, 4> want{-1.3416407865, -0.4472135955, 0.4472135955,
                                   1.3416407865};
  for (size_t i = 0; i < 4; ++i) {
    CHECK(group.advantages[i] == doctest::Approx(want[i]));
  }

  group = compute_advantages({0.7, 0.7, 0.7, 0.7}, small_config(4));
  for (double a : group.advantages) {
    CHECK(a == 0.0);  // sigma floor engaged
  }

  group = compute_advantages({0.0, 1.0}, small_config(2));
  CHECK(group.advantages[0] == doctest::Approx(-1.0));
  CHECK(group.advantages[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(compute_advantages({1.0, 2.0, 3.0}, small_config(4)),
                  std::invalid_argument);
}

TEST_CASE("advantages normalize exactly for random groups") {
  Rng rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rewards(8);
    for (auto& r : rewards) {
      r = rng.uniform01();
    }
    const auto group = compute_advantages(rewards, small_config(8));
    double mean = 0.0;
    double var = 0.0;
    for (double a : group.advantages) {
      mean += a;
    }
    mean /= 8.0;
    for (double a : group.advantages) {
      var += (a - mean) * (a - mean);
    }
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var / 8.0) - 1.0) < 1e-6);
  }
}

TEST_CASE("config validation and profiles") {
  CHECK(GrpoConfig::image_profile().kl_beta == doctest::Approx(1e-3));
  CHECK(GrpoConfig::video_profile().kl_beta == doctest::Approx(1e-4));
  CHECK(GrpoConfig::image_profile().group_size == 8);

  GrpoConfig bad;
  bad.group_size = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = GrpoConfig{};
  bad.clip_eps = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const auto parsed = GrpoConfig::from_json_string(
      R"({"profile": "video", "iterations": 42, "seed": 9})");
  CHECK(parsed.kl_beta == doctest::Approx(1e-4));
  CHECK(parsed.iterations == 42);
  CHECK(parsed.seed == 9);
  CHECK_THROWS_AS(GrpoConfig::from_json_string(R"({"profile": "audio"})"),
                  std::invalid_argument);
}

TEST_CASE("surrogate collapses to the mean advantage on-policy") {
  const FactSpace space(6);
  Rng rng(21);
  const auto params = random_policy(space, rng, 1.0);
  std::vector<CaptionSample> group;
  for (int i = 0; i < 4; ++i) {
    group.push_back(sample_caption(params, rng));
  }
  const std::vector<double> advantages{0.3, -0.1, 0.7, 0.2};
  GrpoConfig cfg = small_config(4);
  cfg.kl_beta = 0.0;
  const auto result =
      surrogate_objective(params, params, params, group, advantages, cfg);
  CHECK(result.value == doctest::Approx(0.275));  // mean advantage
  for (const auto& ratios : result.per_token_ratios) {
    for (double rho : ratios) {
      CHECK(rho == doctest::Approx(1.0));
    }
  }

  // KL term vanishes when params == ref, for any beta
  cfg.kl_beta = 5.0;
  const auto anchored =
      surrogate_objective(params, params, params, group, advantages, cfg);
  CHECK(anchored.value == doctest::Approx(0.275));
}

TEST_CASE("clipping caps the single-token contribution at 1 + eps") {
  const FactSpace space(1);
  const auto old_params =
      PolicyParams::from_probabilities(space, {0.4, 0.3, 0.3});
  const auto new_params =
      PolicyParams::from_probabilities(space, {0.6, 0.2, 0.2});
  Rng rng(1);
  CaptionSample sample{
      CaptionFacts(FactSubset::from_indices(space, {0}), FactSubset(space)),
      {SlotDecision::emit_correct},
      {std::log(0.4)},
      std::log(0.4)};
  GrpoConfig cfg = small_config(2);
  cfg.kl_beta = 0.0;
  const auto result = surrogate_objective(new_params, old_params, old_params,
                                          {sample}, {1.0}, cfg);
  CHECK(result.per_token_ratios[0][0] == doctest::Approx(1.5));
  CHECK(result.value == doctest::Approx(1.2));  // min(1.5, 1.2) * 1
}

TEST_CASE("gradient vanishes with zero advantages and no anchor") {
  const FactSpace space(5);
  Rng rng(8);
  const auto params = random_policy(space, rng, 1.0);
  std::vector<CaptionSample> group;
  for (int i = 0; i < 4; ++i) {
    group.push_back(sample_caption(params, rng));
  }
  GrpoConfig cfg = small_config(4);
  cfg.kl_beta = 0.0;
  const auto grad = surrogate_gradient(params, params, params, group,
                                       {0.0, 0.0, 0.0, 0.0}, cfg);
  for (const auto& triple : grad) {
    for (double g : triple) {
      CHECK(g == 0.0);
    }
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  // Agreement is measured on the whole gradient vector:
  // ||analytic - numeric|| <= 1e-5 * max(1, ||analytic||).
  const double h = 1e-5;
  Rng rng(90210);
  for (int instance = 0; instance < 100; ++instance) {
    const FactSpace space(2 + instance % 5);  // N <= 6
    const size_t group_size = 2 + instance % 3;  // G <= 4
    auto old_params = random_policy(space, rng, 1.2);
    auto params = random_policy(space, rng, 1.2);
    auto ref_params = random_policy(space, rng, 1.2);
    std::vector<CaptionSample> group;
    std::vector<double> advantages;
    for (size_t i = 0; i < group_size; ++i) {
      group.push_back(sample_caption(old_params, rng));
      advantages.push_back((rng.uniform01() - 0.5) * 4.0);
    }
    GrpoConfig cfg = small_config(group_size);
    cfg.kl_beta = instance % 2 == 0 ? 0.37 : 0.0;
    cfg.sampled_kl = instance % 4 == 1;

    const auto analytic = surrogate_gradient(params, old_params, ref_params,
                                             group, advantages, cfg);
    double diff_sq = 0.0;
    double norm_sq = 0.0;
    for (uint32_t s = 0; s < space.n_slots(); ++s) {
      for (size_t k = 0; k < 3; ++k) {
        PolicyParams plus = params;
        plus.logits(s)[k] += h;
        PolicyParams minus = params;
        minus.logits(s)[k] -= h;
        const double numeric =
            (surrogate_objective(plus, old_params, ref_params, group,
                                 advantages, cfg)
                 .value -
             surrogate_objective(minus, old_params, ref_params, group,
                                 advantages, cfg)
                 .value) /
            (2.0 * h);
        diff_sq += (analytic[s][k] - numeric) * (analytic[s][k] - numeric);
        norm_sq += analytic[s][k] * analytic[s][k];
      }
    }
    CHECK(std::sqrt(diff_sq) <= 1e-5 * std::max(1.0, std::sqrt(norm_sq)));
  }
}

TEST_CASE("a strong anchor pulls along the KL descent direction") {
  const FactSpace space(6);
  Rng rng(1234);
  const auto params = random_policy(space, rng, 1.5);
  const auto ref_params = random_policy(space, rng, 1.5);
  std::vector<CaptionSample> group;
  std::vector<double> advantages;
  for (int i = 0; i < 4; ++i) {
    group.push_back(sample_caption(params, rng));
    advantages.push_back((rng.uniform01() - 0.5) * 2.0);
  }
  GrpoConfig cfg = small_config(4);
  cfg.kl_beta = 100.0;
  const auto grad =
      surrogate_gradient(params, params, ref_params, group, advantages, cfg);

  // The pure KL-descent direction: gradient with zero advantages, beta 1.
  cfg.kl_beta = 1.0;
  const auto descent = surrogate_gradient(params, params, ref_params, group,
                                          {0.0, 0.0, 0.0, 0.0}, cfg);
  double inner = 0.0;
  for (uint32_t s = 0; s < space.n_slots(); ++s) {
    for (size_t k = 0; k < 3; ++k) {
      inner += grad[s][k] * descent[s][k];
    }
  }
  CHECK(inner > 0.0);
}

TEST_CASE("training degenerate cases") {
  const FactSpace space(8);
  Rng rng(3);
  const auto initial = PolicyParams::uniform(space);
  const auto pool = uniform_pool(space, 3, 16, rng);
  const auto reward = make_score_reward();

  GrpoConfig cfg = GrpoConfig::image_profile();
  cfg.iterations = 0;
  auto result = train(initial, pool, reward, cfg);
  CHECK(result.trace.rows.empty());
  CHECK(result.final_params.all_logits() == initial.all_logits());

  cfg.iterations = 25;
  cfg.learning_rate = 0.0;
  result = train(initial, pool, reward, cfg);
  CHECK(result.trace.rows.size() == 25);
  CHECK(result.final_params.all_logits() == initial.all_logits());

  CHECK_THROWS_AS(train(initial, ReferencePool{}, reward, cfg),
                  std::invalid_argument);
}

TEST_CASE("training is deterministic given the seed") {
  const FactSpace space(10);
  Rng rng(17);
  const auto initial = PolicyParams::uniform(space);
  const auto pool = uniform_pool(space, 4, 16, rng);
  const auto reward = make_score_reward();
  GrpoConfig cfg = GrpoConfig::image_profile();
  cfg.iterations = 60;
  cfg.seed = 777;

  const auto a = train(initial, pool, reward, cfg);
  const auto b = train(initial, pool, reward, cfg);
  CHECK(a.final_params.all_logits() == b.final_params.all_logits());
  std::ostringstream csv_a;
  std::ostringstream csv_b;
  a.trace.write_csv(csv_a);
  b.trace.write_csv(csv_b);
  CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("training raises the reward and empties the error set") {
  const FactSpace space(12);
  Rng rng(5);
  const auto pool = uniform_pool(space, 4, 32, rng);
  GrpoConfig cfg = GrpoConfig::image_profile();
  cfg.iterations = 300;
  cfg.seed = 11;
  const auto result = train(PolicyParams::uniform(space), pool,
                            make_score_reward(), cfg);
  CHECK(result.final_params.expected_correct() / 12.0 > 0.85);
  CHECK(result.final_params.expected_errors() / 12.0 < 0.08);

  // 50-iteration moving average of the mean reward trends upward in at
  // least 90% of windows. A step counts as decreasing only when it drops
  // by more than one group scoring a single judge point lower inside the
  // window (0.1 / 50); smaller dips are below the measurement resolution
  // of the window.
  const double resolution = 0.1 / 50.0;
  const auto& rows = result.trace.rows;
  std::vector<double> ma;
  double window_sum = 0.0;
  for (size_t i = 0; i < rows.size(); ++i) {
    window_sum += rows[i].mean_reward;
    if (i >= 50) {
      window_sum -= rows[i - 50].mean_reward;
    }
    if (i >= 49) {
      ma.push_back(window_sum / 50.0);
    }
  }
  size_t non_decreasing = 0;
  for (size_t i = 1; i < ma.size(); ++i) {
    non_decreasing += ma[i] >= ma[i - 1] - resolution ? 1 : 0;
  }
  CHECK(static_cast<double>(non_decreasing) >= 0.9 * (ma.size() - 1));
}

TEST_CASE("a pure anchor run strictly decreases the KL to the reference") {
  const FactSpace space(6);
  Rng rng(23);
  const auto start = random_policy(space, rng, 2.0);
  const auto anchor = PolicyParams::uniform(space);
  const auto pool = uniform_pool(space, 2, 4, rng);
  // Constant reward: sigma floor zeroes every advantage, leaving only the
  // KL term.
  const CaptionReward flat = [](const Witness&, const CaptionFacts&) {
    return 0.5;
  };
  GrpoConfig cfg = GrpoConfig::image_profile();
  cfg.kl_beta = 1.0;
  cfg.learning_rate = 2.0;
  cfg.iterations = 1;

  PolicyParams current = start;
  double kl = mean_slot_kl(current, anchor);
  CHECK(kl > 1e-6);
  int steps = 0;
  while (kl > 1e-6 && steps < 5000) {
    cfg.seed = steps;
    current = train(current, pool, flat, cfg, &anchor).final_params;
    const double next_kl = mean_slot_kl(current, anchor);
    CHECK(next_kl < kl);
    kl = next_kl;
    ++steps;
  }
  CHECK(kl <= 1e-6);
}

TEST_CASE("trace CSV has one row per iteration with the declared header") {
  const FactSpace space(6);
  Rng rng(2);
  const auto pool = uniform_pool(space, 2, 8, rng);
  GrpoConfig cfg = GrpoConfig::image_profile();
  cfg.iterations = 5;
  const auto result =
      train(PolicyParams::uniform(space), pool, make_score_reward(), cfg);
  std::ostringstream csv;
  result.trace.write_csv(csv);
  const std::string text = csv.str();
  CHECK(text.rfind("iteration,mean_reward,expected_correct,expected_errors,kl,"
                   "grad_norm\n",
                   0) == 0);
  size_t lines = 0;
  for (char ch : text) {
    lines += ch == '\n' ? 1 : 0;
  }
  CHECK(lines == 6);  // header + 5 rows
}
