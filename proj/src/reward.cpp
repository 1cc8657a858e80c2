// SPDX-License-Identifier: Apache-2.0
#include "caplab/reward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace caplab {

namespace {

// Threshold below which the double-valued factors go through the exact
// rational path; beyond it a log-space product avoids underflow.
constexpr uint32_t kExactRationalLimit = 20;

double se_binomial(uint64_t hits, uint64_t samples) {
  if (hits == 0 || hits == samples) {
    return 3.0 / static_cast<double>(samples);
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
}

}  // namespace

RewardOperands::RewardOperands(uint32_t n, uint32_t m, uint32_t c, uint32_t e)
    : n_total(n), m_witness(m), c_correct(c), e_errors(e) {
  if (n == 0) {
    throw std::invalid_argument("RewardOperands: N must be >= 1");
  }
  if (m > n) {
    throw std::invalid_argument("RewardOperands: m = " + std::to_string(m) +
                                " exceeds N = " + std::to_string(n));
  }
  if (static_cast<uint64_t>(c) + e > n) {
    throw std::invalid_argument("RewardOperands: c + e = " +
                                std::to_string(c + e) + " exceeds N = " +
                                std::to_string(n));
  }
}

Rational p_recall_exact(const RewardOperands& ops) {
  if (ops.m_witness == 0) {
    return Rational(1);
  }
  if (ops.c_correct < ops.m_witness) {
    return Rational(0);
  }
  Rational product(1);
  for (uint32_t i = 0; i < ops.m_witness; ++i) {
    product *= Rational(ops.c_correct - i, ops.n_total - i);
  }
  return product;
}

Rational p_coll_exact(const RewardOperands& ops) {
  if (ops.e_errors == 0) {
    return Rational(1);
  }
  if (ops.e_errors > ops.n_total - ops.m_witness) {
    return Rational(0);
  }
  Rational product(1);
  for (uint32_t j = 0; j < ops.e_errors; ++j) {
    product *= Rational(ops.n_total - ops.m_witness - j, ops.n_total - j);
  }
  return product;
}

double p_recall(const RewardOperands& ops) {
  if (ops.n_total <= kExactRationalLimit) {
    return p_recall_exact(ops).convert_to<double>();
  }
  if (ops.m_witness == 0) {
    return 1.0;
  }
  if (ops.c_correct < ops.m_witness) {
    return 0.0;
  }
  double log_sum = 0.0;
  for (uint32_t i = 0; i < ops.m_witness; ++i) {
    log_sum += std::log(static_cast<double>(ops.c_correct - i)) -
               std::log(static_cast<double>(ops.n_total - i));
  }
  return std::exp(log_sum);
}

double p_coll(const RewardOperands& ops) {
  if (ops.n_total <= kExactRationalLimit) {
    return p_coll_exact(ops).convert_to<double>();
  }
  if (ops.e_errors == 0) {
    return 1.0;
  }
  if (ops.e_errors > ops.n_total - ops.m_witness) {
    return 0.0;
  }
  double log_sum = 0.0;
  for (uint32_t j = 0; j < ops.e_errors; ++j) {
    log_sum += std::log(static_cast<double>(ops.n_total - ops.m_witness - j)) -
               std::log(static_cast<double>(ops.n_total - j));
  }
  return std::exp(log_sum);
}

RewardFactors reward_factors(const RewardOperands& ops) {
  const double comp = p_recall(ops);
  const double corr = p_coll(ops);
  return RewardFactors{comp, corr, comp * corr};
}

OracleResult oracle_recall(const FactSpace& space, const FactSubset& c_set,
                           uint32_t m, uint64_t cap) {
  uint64_t hits = 0;
  uint64_t total = 0;
  SubsetEnumerator en(space, m, cap);
  FactSubset witness{space};
  while (en.next(witness)) {
    ++total;
    if (witness.is_subset_of(c_set)) {
      ++hits;
    }
  }
  Rational exact(hits, total);
  return OracleResult{exact, exact.convert_to<double>()};
}

OracleResult oracle_coll(const FactSpace& space, const FactSubset& r_set,
                         uint32_t e, uint64_t cap) {
  uint64_t hits = 0;
  uint64_t total = 0;
  SubsetEnumerator en(space, e, cap);
  FactSubset placement{space};
  while (en.next(placement)) {
    ++total;
    if (placement.intersection_size(r_set) == 0) {
      ++hits;
    }
  }
  Rational exact(hits, total);
  return OracleResult{exact, exact.convert_to<double>()};
}

McEstimate mc_estimate(const RewardOperands& ops, uint64_t samples, Rng& rng) {
  if (samples == 0) {
    throw std::invalid_argument("mc_estimate: samples must be >= 1");
  }
  const FactSpace space(ops.n_total);
  uint64_t comp_hits = 0;
  uint64_t corr_hits = 0;
  uint64_t joint_hits = 0;
  for (uint64_t s = 0; s < samples; ++s) {
    const FactSubset witness = sample_subset(space, ops.m_witness, rng);
    // One draw of c + e distinct slots; the first c become C, the rest E.
    std::vector<uint32_t> scratch(ops.n_total);
    std::iota(scratch.begin(), scratch.end(), 0U);
    FactSubset correct{space};
    FactSubset errors{space};
    const uint32_t picks = ops.c_correct + ops.e_errors;
    for (uint32_t i = 0; i < picks; ++i) {
      const uint64_t j = i + rng.uniform_below(ops.n_total - i);
      std::swap(scratch[i], scratch[j]);
      if (i < ops.c_correct) {
        correct.add(scratch[i]);
      } else {
        errors.add(scratch[i]);
      }
    }
    const bool comp_pass = witness.is_subset_of(correct);
    const bool corr_pass = errors.intersection_size(witness) == 0;
    comp_hits += comp_pass ? 1 : 0;
    corr_hits += corr_pass ? 1 : 0;
    joint_hits += (comp_pass && corr_pass) ? 1 : 0;
  }
  const auto n = static_cast<double>(samples);
  return McEstimate{
      static_cast<double>(comp_hits) / n,
      static_cast<double>(corr_hits) / n,
      static_cast<double>(joint_hits) / n,
      se_binomial(comp_hits, samples),
      se_binomial(corr_hits, samples),
      se_binomial(joint_hits, samples),
      samples,
  };
}

}  // namespace caplab
