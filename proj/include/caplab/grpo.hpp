// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "caplab/judge.hpp"
#include "caplab/policy.hpp"

namespace caplab {

/// Group-relative optimization settings.
///
/// Two presets mirror the production configurations: both use group size 8
/// with KL weight 1e-3 (image profile) or 1e-4 (video profile). clip_eps
/// defaults to the standard 0.2. The learning rate applies plain gradient
/// ascent directly to the logits; the surrogate's 1/|y| length
/// normalization is a constant 1/N for the fixed-length toy policy, so the
/// default rate is calibrated for that scaling.
struct GrpoConfig {
  size_t group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 1e-3;
  double learning_rate = 8.0;
  size_t iterations = 500;
  double min_std = 1e-8;
  uint64_t seed = 0;
  /// Replace the exact per-slot KL by the per-sample estimator
  /// ratio - log(ratio) - 1 evaluated on the rollout group.
  bool sampled_kl = false;

  void validate() const;

  static GrpoConfig image_profile();
  static GrpoConfig video_profile();

  std::string to_json_string() const;
  /// Parses {"profile": "image"|"video", ...field overrides}.
  static GrpoConfig from_json_string(const std::string& text);
};

/// Rewards of one on-policy group with their normalized advantages
/// A_i = (r_i - mean) / std (population std). Degenerate groups with
/// std below min_std get all-zero advantages.
struct AdvantageGroup {
  std::vector<double> rewards;
  double mean_r;
  double std_r;
  std::vector<double> advantages;
};

AdvantageGroup compute_advantages(const std::vector<double>& rewards,
                                  const GrpoConfig& config);

/// Clipped-surrogate value at `params` for a group sampled under
/// `old_params`, anchored to `ref_params`:
///
///   (1/G) sum_i (1/|y_i|) sum_t min(rho_t A_i, clip(rho_t, 1-eps, 1+eps) A_i)
///   - beta * KL(pi_params || pi_ref)
///
/// with per-slot ratios rho_t = exp(logp_new - logp_old) and the KL term
/// computed in closed form per slot and averaged over slots (or via the
/// sampled estimator when config.sampled_kl is set).
struct SurrogateResult {
  double value;
  std::vector<std::vector<double>> per_token_ratios;  // [sample][slot]
};

SurrogateResult surrogate_objective(const PolicyParams& params,
                                    const PolicyParams& old_params,
                                    const PolicyParams& ref_params,
                                    const std::vector<CaptionSample>& group,
                                    const std::vector<double>& advantages,
                                    const GrpoConfig& config);

/// Exact gradient of the surrogate with respect to every logit. Tokens on
/// the active clip branch contribute zero gradient through their ratio.
std::vector<LogitTriple> surrogate_gradient(
    const PolicyParams& params, const PolicyParams& old_params,
    const PolicyParams& ref_params, const std::vector<CaptionSample>& group,
    const std::vector<double>& advantages, const GrpoConfig& config);

struct TraceRow {
  size_t iteration;
  double mean_reward;
  double expected_correct;
  double expected_errors;
  double kl;
  double grad_norm;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;

  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  PolicyParams final_params;
  TrainingTrace trace;
};

/// The training loop. Each iteration draws one witness uniformly from the
/// pool, samples a group of G captions from the current snapshot, scores
/// them, normalizes advantages within the group, and applies one
/// gradient-ascent step on the surrogate. Deterministic given config.seed.
///
/// The KL anchor defaults to the initial policy; pass `ref_params` to
/// anchor elsewhere.
TrainResult train(const PolicyParams& initial, const ReferencePool& pool,
                  const CaptionReward& reward, const GrpoConfig& config,
                  const PolicyParams* ref_params = nullptr);

}  // namespace caplab
