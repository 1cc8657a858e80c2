// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "caplab/reward.hpp"

using namespace caplab;

TEST_CASE("operand invariants") {
  CHECK_THROWS_AS(RewardOperands(10, 11, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(RewardOperands(10, 2, 6, 5), std::invalid_argument);
  CHECK_NOTHROW(RewardOperands(10, 10, 5, 5));
}

TEST_CASE("completeness factor fixtures") {
  CHECK(p_recall(RewardOperands(10, 2, 5, 0)) == doctest::Approx(2.0 / 9.0));
  // c < m makes coverage impossible
  CHECK(p_recall(RewardOperands(10, 4, 3, 0)) == 0.0);
  // c = N saturates every factor
  for (uint32_t m = 0; m <= 7; ++m) {
    CHECK(p_recall(RewardOperands(7, m, 7, 0)) == 1.0);
  }
  // m = 0 is the empty product
  CHECK(p_recall(RewardOperands(12, 0, 3, 0)) == 1.0);
}

TEST_CASE("correctness factor fixtures") {
  CHECK(p_coll(RewardOperands(10, 3, 0, 2)) == doctest::Approx(7.0 / 15.0));
  CHECK(p_coll(RewardOperands(6, 2, 0, 0)) == 1.0);
  // no slot outside R exists
  CHECK(p_coll(RewardOperands(5, 5, 0, 1)) == 0.0);
}

TEST_CASE("joint factors multiply") {
  const auto f = reward_factors(RewardOperands(10, 2, 5, 2));
  CHECK(f.p_comp == doctest::Approx(2.0 / 9.0));
  CHECK(f.p_corr == doctest::Approx(28.0 / 45.0));
  CHECK(f.joint == doctest::Approx(56.0 / 405.0));
  CHECK(f.joint == f.p_comp * f.p_corr);

  const auto degenerate = reward_factors(RewardOperands(8, 0, 3, 2));
  CHECK(degenerate.p_comp == 1.0);
  CHECK(degenerate.p_corr == 1.0);
  CHECK(degenerate.joint == 1.0);

  const auto optimum = reward_factors(RewardOperands(10, 3, 10, 0));
  CHECK(optimum.joint == 1.0);
}

TEST_CASE("oracle fixtures") {
  const FactSpace n4(4);
  const auto c3 = FactSubset::from_indices(n4, {0, 2, 3});
  const auto r = oracle_recall(n4, c3, 2);
  CHECK(r.exact == Rational(1, 2));  // 3 of the 6 2-subsets

  const FactSpace n5(5);
  CHECK(oracle_recall(n5, FactSubset::full(n5), 3).exact == Rational(1));

  const FactSpace n6(6);
  const auto c2 = FactSubset::from_indices(n6, {1, 4});
  CHECK(oracle_recall(n6, c2, 3).exact == Rational(0));  // c < m

  const auto r2 = FactSubset::from_indices(n6, {0, 5});
  CHECK(oracle_coll(n6, r2, 1).exact == Rational(4, 6));
  CHECK(oracle_coll(n6, FactSubset(n6), 3).exact == Rational(1));

  const auto r3 = FactSubset::from_indices(n4, {0, 1, 2});
  CHECK(oracle_coll(n4, r3, 2).exact == Rational(0));
}

TEST_CASE("closed forms equal the enumeration oracles exactly, N <= 10") {
  for (uint32_t n = 1; n <= 10; ++n) {
    const FactSpace space(n);
    for (uint32_t m = 0; m <= n; ++m) {
      for (uint32_t c = 0; c <= n; ++c) {
        // fix C as the first c slots; exchangeability makes the choice moot
        std::vector<uint32_t> idx(c);
        for (uint32_t i = 0; i < c; ++i) idx[i] = i;
        const auto c_set = FactSubset::from_indices(space, idx);
        CHECK(p_recall_exact(RewardOperands(n, m, c, 0)) ==
              oracle_recall(space, c_set, m).exact);
        for (uint32_t e = 0; e + c <= n; ++e) {
          std::vector<uint32_t> ridx(m);
          for (uint32_t i = 0; i < m; ++i) ridx[i] = i;
          const auto r_set = FactSubset::from_indices(space, ridx);
          CHECK(p_coll_exact(RewardOperands(n, m, c, e)) ==
                oracle_coll(space, r_set, e).exact);
        }
      }
    }
  }
}

TEST_CASE("strict monotonicity in c and e") {
  for (uint32_t n = 2; n <= 12; ++n) {
    for (uint32_t m = 1; m <= n; ++m) {
      for (uint32_t c = m; c + 1 <= n; ++c) {
        CHECK(p_recall_exact(RewardOperands(n, m, c + 1, 0)) >
              p_recall_exact(RewardOperands(n, m, c, 0)));
      }
      for (uint32_t e = 0; e + 1 <= n; ++e) {
        const auto lo = p_coll_exact(RewardOperands(n, m, 0, e));
        if (lo > 0) {
          CHECK(p_coll_exact(RewardOperands(n, m, 0, e + 1)) < lo);
        }
      }
    }
  }
}

TEST_CASE("a larger witness sharpens the multiplicative gradient on c") {
  for (uint32_t n = 3; n <= 12; ++n) {
    for (uint32_t m = 1; m < n; ++m) {
      for (uint32_t m2 = m + 1; m2 < n; ++m2) {
        for (uint32_t c = m2; c < n; ++c) {
          const auto ratio_small =
              p_recall_exact(RewardOperands(n, m, c + 1, 0)) /
              p_recall_exact(RewardOperands(n, m, c, 0));
          const auto ratio_large =
              p_recall_exact(RewardOperands(n, m2, c + 1, 0)) /
              p_recall_exact(RewardOperands(n, m2, c, 0));
          CHECK(ratio_large > ratio_small);
        }
      }
    }
  }
}

TEST_CASE("the joint optimum sits at (c, e) = (N, 0) for every m >= 1") {
  for (uint32_t n = 4; n <= 12; ++n) {
    for (uint32_t m = 1; m <= n; ++m) {
      Rational best(-1);
      uint32_t best_c = 0;
      uint32_t best_e = 0;
      bool unique = true;
      for (uint32_t c = 0; c <= n; ++c) {
        for (uint32_t e = 0; c + e <= n; ++e) {
          const Rational joint =
              p_recall_exact(RewardOperands(n, m, c, e)) *
              p_coll_exact(RewardOperands(n, m, c, e));
          if (joint > best) {
            best = joint;
            best_c = c;
            best_e = e;
            unique = true;
          } else if (joint == best) {
            unique = false;
          }
        }
      }
      CHECK(best_c == n);
      CHECK(best_e == 0);
      CHECK(unique);
    }
  }
}

TEST_CASE("large-N log-space path stays close to the rational form") {
  // N = 40 exceeds the exact-rational threshold; compare against the
  // rational evaluation directly.
  const RewardOperands ops(40, 7, 25, 6);
  const double via_log = p_recall(ops) * p_coll(ops);
  const double via_exact =
      (p_recall_exact(ops) * p_coll_exact(ops)).convert_to<double>();
  CHECK(via_log == doctest::Approx(via_exact).epsilon(1e-12));
}

TEST_CASE("monte carlo estimates converge to the closed forms") {
  Rng rng(2024);
  const RewardOperands ops(10, 2, 5, 2);
  const auto est = mc_estimate(ops, 200000, rng);
  CHECK(std::abs(est.p_comp_hat - 2.0 / 9.0) < 0.01);
  CHECK(std::abs(est.p_comp_hat - p_recall(ops)) < 5.0 * est.se_comp);
  CHECK(std::abs(est.p_corr_hat - p_coll(ops)) < 5.0 * est.se_corr);
  // Under the disjoint C/E coupling the conjunction coincides with R ⊆ C.
  CHECK(std::abs(est.joint_hat - p_recall(ops)) < 5.0 * est.se_joint);
}

TEST_CASE("single-sample estimates are 0 or 1") {
  Rng rng(5);
  const auto est = mc_estimate(RewardOperands(9, 3, 4, 2), 1, rng);
  for (double v : {est.p_comp_hat, est.p_corr_hat, est.joint_hat}) {
    CHECK((v == 0.0 || v == 1.0));
  }
  CHECK(est.se_comp == 3.0);  // rule-of-three bound at one sample
}

TEST_CASE("certain events estimate exactly one") {
  Rng rng(5);
  const auto est = mc_estimate(RewardOperands(10, 3, 10, 0), 1000, rng);
  CHECK(est.p_comp_hat == 1.0);
  CHECK(est.p_corr_hat == 1.0);
  CHECK(est.joint_hat == 1.0);
  CHECK(est.se_comp == doctest::Approx(3.0 / 1000.0));
}
