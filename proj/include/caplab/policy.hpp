// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "caplab/fact_space.hpp"
#include "caplab/rng.hpp"

namespace caplab {

/// Per-slot action of the synthetic captioner.
enum class SlotDecision : uint8_t { emit_correct = 0, emit_wrong = 1, omit = 2 };

inline constexpr std::array<SlotDecision, 3> kAllDecisions = {
    SlotDecision::emit_correct, SlotDecision::emit_wrong, SlotDecision::omit};

using LogitTriple = std::array<double, 3>;

/// The captioning policy: one independent three-way categorical decision
/// (emit the true fact, emit a wrong fact, stay silent) per fact slot,
/// parameterized by real-valued logits. A caption is the |y| = N vector
/// of decisions, which gives exact per-token log-probabilities.
///
/// Immutable snapshot during sampling; training produces new snapshots.
class PolicyParams {
 public:
  explicit PolicyParams(const FactSpace& space);
  PolicyParams(const FactSpace& space, std::vector<LogitTriple> logits);

  /// Uniform 1/3 mass on each category.
  static PolicyParams uniform(const FactSpace& space);
  /// All mass on one category (logit margin wide enough that the chosen
  /// category's probability is exactly 1.0 in double precision).
  static PolicyParams deterministic(const FactSpace& space, SlotDecision d);
  /// Identical per-slot probability triple (must sum to 1).
  static PolicyParams from_probabilities(const FactSpace& space,
                                         const std::array<double, 3>& probs);

  const FactSpace& space() const noexcept { return space_; }
  uint32_t n_slots() const noexcept { return space_.n_slots(); }

  const LogitTriple& logits(uint32_t slot) const { return logits_.at(slot); }
  LogitTriple& logits(uint32_t slot) { return logits_.at(slot); }
  const std::vector<LogitTriple>& all_logits() const noexcept { return logits_; }

  std::array<double, 3> slot_probabilities(uint32_t slot) const;
  std::array<double, 3> slot_log_probabilities(uint32_t slot) const;

  /// Exact E[|C|] = sum of per-slot emit-correct probabilities.
  double expected_correct() const;
  /// Exact E[|E|].
  double expected_errors() const;

  /// Versioned snapshot serialization (JSON).
  std::string to_json_string(const std::string& note = "") const;
  static PolicyParams from_json_string(const std::string& text);
  void save(const std::string& path, const std::string& note = "") const;
  static PolicyParams load(const std::string& path);

 private:
  FactSpace space_;
  std::vector<LogitTriple> logits_;
};

/// One policy rollout: the decomposed fact sets, the per-slot decisions,
/// and their exact log-probabilities under the sampling policy.
struct CaptionSample {
  CaptionFacts facts;
  std::vector<SlotDecision> decisions;
  std::vector<double> token_logprobs;
  double logprob;
};

CaptionSample sample_caption(const PolicyParams& params, Rng& rng);

struct LogProb {
  double total;
  std::vector<double> per_token;
};

/// Re-evaluates a sample's decisions under `params`, which may differ from
/// the policy that produced the sample (importance ratios).
LogProb caption_logprob(const PolicyParams& params, const CaptionSample& sample);

/// Per-slot argmax decode; exact logit ties break in the fixed order
/// emit_correct > emit_wrong > omit.
CaptionSample greedy_caption(const PolicyParams& params);

/// Reward over a caption with any witness pre-bound or irrelevant.
using SampleReward = std::function<double(const CaptionFacts&)>;

struct BestOfN {
  CaptionSample best;
  size_t best_index;
  std::vector<CaptionSample> all;
  std::vector<double> rewards;
};

/// Samples n captions, scores each, returns the best (earliest index wins
/// ties).
BestOfN best_of_n(const PolicyParams& params, size_t n,
                  const SampleReward& reward, Rng& rng);

/// Per-slot maximum-likelihood categorical fit with Laplace smoothing
/// alpha = 1 over the three categories.
PolicyParams fit_to_samples(const FactSpace& space,
                            const std::vector<CaptionSample>& samples);

struct PoolEntry {
  Witness witness;
  uint32_t round;
  std::string source_id;
};

/// The reference pool a training run draws witnesses from.
struct ReferencePool {
  std::vector<PoolEntry> entries;

  double mean_m() const;
};

enum class GenerationMode { greedy, sample, bon };

struct PoolGenOptions {
  GenerationMode mode = GenerationMode::sample;
  WitnessMode witness_mode = WitnessMode::ideal;
  size_t bon_n = 8;
  SampleReward bon_reward;   // required for GenerationMode::bon
  uint32_t round = 0;
  std::string source_id = "policy";
};

/// Builds a pool by generating pool_size captions from `params` and
/// reading each off as a witness: ideal mode keeps the correct slots only,
/// override mode arms every emitted slot and marks the erroneous ones as
/// tainted.
ReferencePool regenerate_pool(const PolicyParams& params, size_t pool_size,
                              const PoolGenOptions& options, Rng& rng);

/// Exact joint-factor value of a policy: E[p_recall(|C|) * p_coll(|E|)]
/// under a nominal witness size, computed from the exact (|C|, |E|)
/// distribution by dynamic programming over slots.
double expected_joint_reward(const PolicyParams& params, uint32_t m_witness);

/// Exact per-slot categorical KL(p || q) averaged over slots.
double mean_slot_kl(const PolicyParams& p, const PolicyParams& q);

}  // namespace caplab
