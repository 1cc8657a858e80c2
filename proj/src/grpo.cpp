// SPDX-License-Identifier: Apache-2.0
#include "caplab/grpo.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace caplab {

namespace {

void check_group(const PolicyParams& params, const PolicyParams& old_params,
                 const PolicyParams& ref_params,
                 const std::vector<CaptionSample>& group,
                 const std::vector<double>& advantages) {
  if (params.n_slots() != old_params.n_slots() ||
      params.n_slots() != ref_params.n_slots()) {
    throw DomainMismatchError("grpo: policy snapshots cover different slots");
  }
  if (group.size() != advantages.size()) {
    throw std::invalid_argument("grpo: group and advantages must align");
  }
  for (const auto& sample : group) {
    if (sample.decisions.size() != params.n_slots()) {
      throw DomainMismatchError("grpo: sample slot count differs from policy");
    }
  }
}

/// Sampled KL estimator ratio - log(ratio) - 1 with ratio = p_ref / p_new,
/// averaged over all tokens of the group. Non-negative, zero at p = q.
double sampled_kl_estimate(const PolicyParams& params,
                           const PolicyParams& ref_params,
                           const std::vector<CaptionSample>& group) {
  double total = 0.0;
  size_t tokens = 0;
  for (const auto& sample : group) {
    for (uint32_t s = 0; s < params.n_slots(); ++s) {
      const auto k = static_cast<size_t>(sample.decisions[s]);
      const double log_ratio = ref_params.slot_log_probabilities(s)[k] -
                               params.slot_log_probabilities(s)[k];
      total += std::exp(log_ratio) - log_ratio - 1.0;
      ++tokens;
    }
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

}  // namespace

void GrpoConfig::validate() const {
  if (group_size < 2) {
    throw std::invalid_argument("GrpoConfig: group_size must be >= 2");
  }
  if (clip_eps <= 0.0 || clip_eps >= 1.0) {
    throw std::invalid_argument("GrpoConfig: clip_eps must lie in (0, 1)");
  }
  if (kl_beta < 0.0) {
    throw std::invalid_argument("GrpoConfig: kl_beta must be >= 0");
  }
  if (min_std <= 0.0) {
    throw std::invalid_argument("GrpoConfig: min_std must be > 0");
  }
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw std::invalid_argument("GrpoConfig: learning_rate must be >= 0");
  }
}

GrpoConfig GrpoConfig::image_profile() {
  GrpoConfig cfg;
  cfg.group_size = 8;
  cfg.kl_beta = 1e-3;
  return cfg;
}

GrpoConfig GrpoConfig::video_profile() {
  GrpoConfig cfg;
  cfg.group_size = 8;
  cfg.kl_beta = 1e-4;
  return cfg;
}

std::string GrpoConfig::to_json_string() const {
  nlohmann::json j;
  j["group_size"] = group_size;
  j["clip_eps"] = clip_eps;
  j["kl_beta"] = kl_beta;
  j["learning_rate"] = learning_rate;
  j["iterations"] = iterations;
  j["min_std"] = min_std;
  j["seed"] = seed;
  j["sampled_kl"] = sampled_kl;
  return j.dump(2);
}

GrpoConfig GrpoConfig::from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GrpoConfig cfg;
  if (j.contains("profile")) {
    const auto profile = j.at("profile").get<std::string>();
    if (profile == "image") {
      cfg = image_profile();
    } else if (profile == "video") {
      cfg = video_profile();
    } else {
      throw std::invalid_argument("GrpoConfig: unknown profile '" + profile +
                                  "' (expected image or video)");
    }
  }
  if (j.contains("group_size")) cfg.group_size = j.at("group_size").get<size_t>();
  if (j.contains("clip_eps")) cfg.clip_eps = j.at("clip_eps").get<double>();
  if (j.contains("kl_beta")) cfg.kl_beta = j.at("kl_beta").get<double>();
  if (j.contains("learning_rate"))
    cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<size_t>();
  if (j.contains("min_std")) cfg.min_std = j.at("min_std").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("sampled_kl")) cfg.sampled_kl = j.at("sampled_kl").get<bool>();
  cfg.validate();
  return cfg;
}

AdvantageGroup compute_advantages(const std::vector<double>& rewards,
                                  const GrpoConfig& config) {
  config.validate();
  if (rewards.size() != config.group_size) {
    throw std::invalid_argument(
        "compute_advantages: expected a group of " +
        std::to_string(config.group_size) + " rewards, got " +
        std::to_string(rewards.size()));
  }
  const auto g = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) {
    mean += r;
  }
  mean /= g;
  double var = 0.0;
  for (double r : rewards) {
    var += (r - mean) * (r - mean);
  }
  const double std_r = std::sqrt(var / g);  // population std
  AdvantageGroup out{rewards, mean, std_r, std::vector<double>(rewards.size(), 0.0)};
  if (std_r >= config.min_std) {
    for (size_t i = 0; i < rewards.size(); ++i) {
      out.advantages[i] = (rewards[i] - mean) / std_r;
    }
  }
  return out;
}

SurrogateResult surrogate_objective(const PolicyParams& params,
                                    const PolicyParams& old_params,
                                    const PolicyParams& ref_params,
                                    const std::vector<CaptionSample>& group,
                                    const std::vector<double>& advantages,
                                    const GrpoConfig& config) {
  check_group(params, old_params, ref_params, group, advantages);
  const auto n = static_cast<double>(params.n_slots());
  SurrogateResult out{0.0, {}};
  out.per_token_ratios.reserve(group.size());
  double policy_term = 0.0;
  for (size_t i = 0; i < group.size(); ++i) {
    const auto& sample = group[i];
    const double adv = advantages[i];
    std::vector<double> ratios(params.n_slots());
    double sample_term = 0.0;
    for (uint32_t s = 0; s < params.n_slots(); ++s) {
      const auto k = static_cast<size_t>(sample.decisions[s]);
      const double log_ratio = params.slot_log_probabilities(s)[k] -
                               old_params.slot_log_probabilities(s)[k];
      const double rho = std::exp(log_ratio);
      if (!std::isfinite(rho)) {
        throw std::domain_error("surrogate_objective: non-finite ratio");
      }
      ratios[s] = rho;
      const double clipped =
          std::clamp(rho, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
      sample_term += std::min(rho * adv, clipped * adv);
    }
    policy_term += sample_term / n;
    out.per_token_ratios.push_back(std::move(ratios));
  }
  policy_term /= static_cast<double>(group.size());
  const double kl = config.sampled_kl
                        ? sampled_kl_estimate(params, ref_params, group)
                        : mean_slot_kl(params, ref_params);
  out.value = policy_term - config.kl_beta * kl;
  return out;
}

std::vector<LogitTriple> surrogate_gradient(
    const PolicyParams& params, const PolicyParams& old_params,
    const PolicyParams& ref_params, const std::vector<CaptionSample>& group,
    const std::vector<double>& advantages, const GrpoConfig& config) {
  check_group(params, old_params, ref_params, group, advantages);
  const uint32_t n_slots = params.n_slots();
  const auto n = static_cast<double>(n_slots);
  const auto g = static_cast<double>(group.size());
  std::vector<LogitTriple> grad(n_slots, LogitTriple{0.0, 0.0, 0.0});

  // Policy term. d rho / d logit_{s,k} = rho * (1{k = decision} - p_k),
  // and the min picks the unclipped branch iff moving rho can still change
  // the objective (A >= 0 and rho <= 1+eps, or A < 0 and rho >= 1-eps).
  for (size_t i = 0; i < group.size(); ++i) {
    const auto& sample = group[i];
    const double adv = advantages[i];
    if (adv == 0.0) {
      continue;
    }
    for (uint32_t s = 0; s < n_slots; ++s) {
      const auto k = static_cast<size_t>(sample.decisions[s]);
      const double log_ratio = params.slot_log_probabilities(s)[k] -
                               old_params.slot_log_probabilities(s)[k];
      const double rho = std::exp(log_ratio);
      const bool unclipped = adv >= 0.0 ? rho <= 1.0 + config.clip_eps
                                        : rho >= 1.0 - config.clip_eps;
      if (!unclipped) {
        continue;
      }
      const auto probs = params.slot_probabilities(s);
      const double scale = adv * rho / (g * n);
      for (size_t cat = 0; cat < 3; ++cat) {
        const double indicator = cat == k ? 1.0 : 0.0;
        grad[s][cat] += scale * (indicator - probs[cat]);
      }
    }
  }

  if (config.kl_beta == 0.0) {
    return grad;
  }

  if (!config.sampled_kl) {
    // Exact KL term: d KL_s / d logit_{s,k} = p_k (log(p_k/q_k) - KL_s).
    for (uint32_t s = 0; s < n_slots; ++s) {
      const auto probs = params.slot_probabilities(s);
      const auto lp = params.slot_log_probabilities(s);
      const auto lq = ref_params.slot_log_probabilities(s);
      double kl_s = 0.0;
      for (size_t k = 0; k < 3; ++k) {
        kl_s += probs[k] * (lp[k] - lq[k]);
      }
      for (size_t k = 0; k < 3; ++k) {
        grad[s][k] -= config.kl_beta / n * probs[k] * ((lp[k] - lq[k]) - kl_s);
      }
    }
    return grad;
  }

  // Sampled estimator term: per token, d(r - log r - 1)/d logp = 1 - r
  // with r = p_ref/p_new, then d logp / d logit_{s,cat} = 1{cat=k} - p_cat.
  const auto tokens = static_cast<double>(group.size()) * n;
  for (const auto& sample : group) {
    for (uint32_t s = 0; s < n_slots; ++s) {
      const auto k = static_cast<size_t>(sample.decisions[s]);
      const double log_ratio = ref_params.slot_log_probabilities(s)[k] -
                               params.slot_log_probabilities(s)[k];
      const double r = std::exp(log_ratio);
      const auto probs = params.slot_probabilities(s);
      const double dkl_dlogp = 1.0 - r;
      for (size_t cat = 0; cat < 3; ++cat) {
        const double indicator = cat == k ? 1.0 : 0.0;
        grad[s][cat] -=
            config.kl_beta * dkl_dlogp * (indicator - probs[cat]) / tokens;
      }
    }
  }
  return grad;
}

void TrainingTrace::write_csv(std::ostream& out) const {
  out << "iteration,mean_reward,expected_correct,expected_errors,kl,grad_norm\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& row : rows) {
    out << row.iteration << ',' << row.mean_reward << ','
        << row.expected_correct << ',' << row.expected_errors << ',' << row.kl
        << ',' << row.grad_norm << '\n';
  }
}

TrainResult train(const PolicyParams& initial, const ReferencePool& pool,
                  const CaptionReward& reward, const GrpoConfig& config,
                  const PolicyParams* ref_params) {
  config.validate();
  if (pool.entries.empty()) {
    throw std::invalid_argument("train: reference pool is empty");
  }
  const PolicyParams anchor = ref_params != nullptr ? *ref_params : initial;
  PolicyParams current = initial;
  Rng rng(config.seed);
  TrainingTrace trace;
  trace.rows.reserve(config.iterations);

  for (size_t iter = 0; iter < config.iterations; ++iter) {
    const auto& entry =
        pool.entries[rng.uniform_below(pool.entries.size())];
    std::vector<CaptionSample> group;
    group.reserve(config.group_size);
    std::vector<double> rewards;
    rewards.reserve(config.group_size);
    for (size_t i = 0; i < config.group_size; ++i) {
      group.push_back(sample_caption(current, rng));
      rewards.push_back(reward(entry.witness, group.back().facts));
    }
    const AdvantageGroup adv = compute_advantages(rewards, config);
    // On-policy single step: the sampling snapshot is the old policy.
    const auto grad = surrogate_gradient(current, current, anchor, group,
                                         adv.advantages, config);
    double norm_sq = 0.0;
    for (uint32_t s = 0; s < current.n_slots(); ++s) {
      for (size_t k = 0; k < 3; ++k) {
        current.logits(s)[k] += config.learning_rate * grad[s][k];
        norm_sq += grad[s][k] * grad[s][k];
      }
    }
    trace.rows.push_back(TraceRow{
        iter,
        adv.mean_r,
        current.expected_correct(),
        current.expected_errors(),
        mean_slot_kl(current, anchor),
        std::sqrt(norm_sq),
    });
  }
  return TrainResult{std::move(current), std::move(trace)};
}

}  // namespace caplab
