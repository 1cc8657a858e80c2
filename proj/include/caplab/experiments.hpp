// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "caplab/grpo.hpp"

namespace caplab {

enum class ExperimentKind { weak_to_strong, self_improvement, ablation, bon };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// One reward lesion: zero one score weight, remove one reference input,
/// or (video profile) drop the per-segment local term.
enum class LesionKind {
  none,
  minus_correctness,
  minus_completeness,
  minus_text_quality,
  minus_reference_caption,
  minus_reference_image,
  minus_local,
};

std::string to_string(LesionKind lesion);
LesionKind lesion_from_string(const std::string& name);

/// Shared verdict thresholds. The directional verdicts demand agreement
/// on at least 4/5 of the paired seeds; speed comparisons need only a
/// majority.
namespace thresholds {
inline constexpr double kDestinationCorrect = 0.85;
inline constexpr double kDestinationErrors = 0.08;
inline constexpr double kConvergenceCorrect = 0.90;
inline constexpr double kConvergenceErrors = 0.05;
inline constexpr double kBonSelfDistillTolerance = 0.02;
inline constexpr double kBonDistillFromRlTolerance = 0.05;
inline constexpr double kSeedSupermajority = 0.8;
}  // namespace thresholds

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::weak_to_strong;
  std::string name = "experiment";
  uint32_t n_slots = 20;
  std::vector<uint32_t> witness_sizes = {3, 6, 9};
  JudgeConfig judge;
  RewardWeights weights;
  LesionKind lesion = LesionKind::none;
  size_t rounds = 2;
  size_t bon_n = 8;
  uint32_t nominal_m = 6;       // witness size entering closed-form metrics
  size_t bon_repetitions = 500;
  size_t pool_size = 64;
  double pool_emit_correct = 0.4;
  double pool_emit_wrong = 0.05;
  /// Pool witness mode. The minus_reference_image lesion always arms the
  /// generator's full emission (override) regardless of this setting.
  WitnessMode witness_mode = WitnessMode::ideal;
  uint32_t video_segments = 0;  // > 0 switches on the two-level video reward
  GrpoConfig grpo;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir;  // default output location; the CLI --out wins

  std::string to_json_string() const;
  static ExperimentSpec from_json_string(const std::string& text);
};

/// One (arm, seed) measurement set.
struct MetricRow {
  std::string arm;
  uint64_t seed;
  std::map<std::string, double> metrics;
};

struct Verdict {
  std::string name;
  bool pass;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  std::string name;
  std::vector<MetricRow> rows;
  std::vector<Verdict> verdicts;

  bool all_pass() const;
  const MetricRow* find_row(const std::string& arm, uint64_t seed) const;
  void write_csv(std::ostream& out) const;
  void write_summary_json(std::ostream& out) const;
};

/// Trains from one shared initial policy per witness size and checks that
/// every m reaches the destination thresholds while larger m gets there
/// no slower.
ExperimentReport run_weak_to_strong(const ExperimentSpec& spec);

/// Round 1 trains against a weak sampled pool; each later round rebuilds
/// the pool from the previous round's final policy (ideal witnesses,
/// greedy generation) and retrains from the same initial policy.
ExperimentReport run_self_improvement(const ExperimentSpec& spec);

/// Paired-seed lesion study: the full reward and the lesioned reward run
/// under identical seeds and pools.
ExperimentReport run_ablation(const ExperimentSpec& spec);

/// Selection-vs-optimization study: the backbone's best-of-n ceiling, a
/// self-distilled student, a GRPO-trained policy, and a student distilled
/// from that policy, all valued by the exact expected joint factor.
ExperimentReport run_bon_study(const ExperimentSpec& spec);

/// Dispatch by spec.kind.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// The two-level video reward: the full-caption judge reward plus
/// w_local times the same reward evaluated on one uniformly chosen
/// contiguous segment of the slot range. segment_rng drives the
/// per-call segment choice.
CaptionReward make_video_reward(uint32_t n_slots, uint32_t segments,
                                const RewardWeights& weights,
                                const JudgeConfig& judge,
                                std::shared_ptr<Rng> segment_rng);

}  // namespace caplab
