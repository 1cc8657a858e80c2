// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

#include "caplab/fact_space.hpp"
#include "caplab/rng.hpp"

namespace caplab {

/// Arbitrary-precision rational, used wherever tests demand exact equality.
using Rational = boost::multiprecision::cpp_rational;

/// Sizes entering the closed-form reward factors: a space of N slots, a
/// witness of m armed slots, and a caption with c correct and e erroneous
/// facts (e is the n - c of the caption decomposition).
struct RewardOperands {
  uint32_t n_total;
  uint32_t m_witness;
  uint32_t c_correct;
  uint32_t e_errors;

  RewardOperands(uint32_t n, uint32_t m, uint32_t c, uint32_t e);
};

/// The two per-axis pass probabilities and their product.
/// joint is always the exact double product p_comp * p_corr.
struct RewardFactors {
  double p_comp;
  double p_corr;
  double joint;
};

/// Completeness factor: probability that a uniform m-subset witness lands
/// entirely inside the c correct facts,
///
///   prod_{i=0}^{m-1} (c - i) / (N - i),
///
/// which is 0 when c < m and 1 when m = 0 (empty product).
double p_recall(const RewardOperands& ops);

/// Correctness factor: probability that e uniformly placed errors all
/// avoid the m armed slots,
///
///   prod_{j=0}^{e-1} (N - m - j) / (N - j),
///
/// which is 1 when e = 0 and 0 when e > N - m.
double p_coll(const RewardOperands& ops);

RewardFactors reward_factors(const RewardOperands& ops);

/// Exact-rational forms of the two factors. The double-valued functions
/// above evaluate these for N <= 20 and switch to a log-space float
/// product beyond, where exactness tests no longer apply.
Rational p_recall_exact(const RewardOperands& ops);
Rational p_coll_exact(const RewardOperands& ops);

/// An exact enumeration result: the fraction as a rational plus its
/// double value.
struct OracleResult {
  Rational exact;
  double value;
};

/// Brute-force completeness oracle: the exact fraction, over all
/// binomial(N, m) witnesses R, of those with R ⊆ c_set. Independent of
/// p_recall by construction — it never touches the cumulative product.
OracleResult oracle_recall(const FactSpace& space, const FactSubset& c_set,
                           uint32_t m, uint64_t cap = kDefaultEnumerationCap);

/// Brute-force correctness oracle: the exact fraction of binomial(N, e)
/// error placements disjoint from r_set.
OracleResult oracle_coll(const FactSpace& space, const FactSubset& r_set,
                         uint32_t e, uint64_t cap = kDefaultEnumerationCap);

/// Empirical event frequencies under the sampling model, with binomial
/// standard errors (rule-of-three 3/samples at observed 0 or 1).
///
/// Each sample draws R as a uniform m-subset and, independently, c + e
/// distinct slots of which the first c form C and the rest form E. Under
/// this coupling C and E are disjoint, so the conjunction of R ⊆ C and
/// E ∩ R = ∅ coincides with R ⊆ C; joint_hat therefore estimates the
/// completeness factor, not the product of the two factors.
struct McEstimate {
  double p_comp_hat;
  double p_corr_hat;
  double joint_hat;
  double se_comp;
  double se_corr;
  double se_joint;
  uint64_t samples;
};

McEstimate mc_estimate(const RewardOperands& ops, uint64_t samples, Rng& rng);

}  // namespace caplab
