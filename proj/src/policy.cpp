// SPDX-License-Identifier: Apache-2.0
#include "caplab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "caplab/reward.hpp"

namespace caplab {

namespace {

constexpr int kSnapshotVersion = 1;
// Wide enough that softmax puts probability exactly 1.0 (in double) on the
// favored category.
constexpr double kDeterministicMargin = 60.0;

std::array<double, 3> softmax(const LogitTriple& logits) {
  const double max_logit = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> exps{};
  double sum = 0.0;
  for (size_t k = 0; k < 3; ++k) {
    exps[k] = std::exp(logits[k] - max_logit);
    sum += exps[k];
  }
  for (size_t k = 0; k < 3; ++k) {
    exps[k] /= sum;
  }
  return exps;
}

}  // namespace

PolicyParams::PolicyParams(const FactSpace& space)
    : space_(space), logits_(space.n_slots(), LogitTriple{0.0, 0.0, 0.0}) {}

PolicyParams::PolicyParams(const FactSpace& space,
                           std::vector<LogitTriple> logits)
    : space_(space), logits_(std::move(logits)) {
  if (logits_.size() != space.n_slots()) {
    throw std::invalid_argument("PolicyParams: one logit triple per slot");
  }
  for (const auto& triple : logits_) {
    for (double v : triple) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("PolicyParams: logits must be finite");
      }
    }
  }
}

PolicyParams PolicyParams::uniform(const FactSpace& space) {
  return PolicyParams(space);
}

PolicyParams PolicyParams::deterministic(const FactSpace& space,
                                         SlotDecision d) {
  LogitTriple triple{-kDeterministicMargin, -kDeterministicMargin,
                     -kDeterministicMargin};
  triple[static_cast<size_t>(d)] = kDeterministicMargin;
  return PolicyParams(space,
                      std::vector<LogitTriple>(space.n_slots(), triple));
}

PolicyParams PolicyParams::from_probabilities(
    const FactSpace& space, const std::array<double, 3>& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (p <= 0.0) {
      throw std::invalid_argument(
          "PolicyParams::from_probabilities: probabilities must be positive");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "PolicyParams::from_probabilities: probabilities must sum to 1");
  }
  LogitTriple triple{std::log(probs[0]), std::log(probs[1]),
                     std::log(probs[2])};
  return PolicyParams(space,
                      std::vector<LogitTriple>(space.n_slots(), triple));
}

std::array<double, 3> PolicyParams::slot_probabilities(uint32_t slot) const {
  return softmax(logits_.at(slot));
}

std::array<double, 3> PolicyParams::slot_log_probabilities(
    uint32_t slot) const {
  const auto probs = softmax(logits_.at(slot));
  return {std::log(probs[0]), std::log(probs[1]), std::log(probs[2])};
}

double PolicyParams::expected_correct() const {
  double sum = 0.0;
  for (uint32_t s = 0; s < n_slots(); ++s) {
    sum += slot_probabilities(s)[0];
  }
  return sum;
}

double PolicyParams::expected_errors() const {
  double sum = 0.0;
  for (uint32_t s = 0; s < n_slots(); ++s) {
    sum += slot_probabilities(s)[1];
  }
  return sum;
}

std::string PolicyParams::to_json_string(const std::string& note) const {
  nlohmann::json j;
  j["version"] = kSnapshotVersion;
  j["n_slots"] = n_slots();
  auto& logits = j["logits"] = nlohmann::json::array();
  for (const auto& triple : logits_) {
    logits.push_back({triple[0], triple[1], triple[2]});
  }
  j["metadata"] = {{"note", note}};
  return j.dump(2);
}

PolicyParams PolicyParams::from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("version").get<int>() != kSnapshotVersion) {
    throw std::runtime_error("PolicyParams: unsupported snapshot version");
  }
  const auto n = j.at("n_slots").get<uint32_t>();
  std::vector<LogitTriple> logits;
  logits.reserve(n);
  for (const auto& row : j.at("logits")) {
    logits.push_back(LogitTriple{row.at(0).get<double>(),
                                 row.at(1).get<double>(),
                                 row.at(2).get<double>()});
  }
  return PolicyParams(FactSpace(n), std::move(logits));
}

void PolicyParams::save(const std::string& path,
                        const std::string& note) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("PolicyParams::save: cannot open " + path);
  }
  out << to_json_string(note) << "\n";
}

PolicyParams PolicyParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("PolicyParams::load: cannot open " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_string(buffer.str());
}

CaptionSample sample_caption(const PolicyParams& params, Rng& rng) {
  const FactSpace& space = params.space();
  FactSubset correct{space};
  FactSubset errors{space};
  std::vector<SlotDecision> decisions(params.n_slots());
  std::vector<double> token_logprobs(params.n_slots());
  double total = 0.0;
  for (uint32_t s = 0; s < params.n_slots(); ++s) {
    const auto probs = params.slot_probabilities(s);
    const double u = rng.uniform01();
    size_t k = u < probs[0] ? 0 : (u < probs[0] + probs[1] ? 1 : 2);
    decisions[s] = static_cast<SlotDecision>(k);
    token_logprobs[s] = std::log(probs[k]);
    total += token_logprobs[s];
    if (k == 0) {
      correct.add(s);
    } else if (k == 1) {
      errors.add(s);
    }
  }
  return CaptionSample{CaptionFacts(std::move(correct), std::move(errors)),
                       std::move(decisions), std::move(token_logprobs), total};
}

LogProb caption_logprob(const PolicyParams& params,
                        const CaptionSample& sample) {
  if (sample.decisions.size() != params.n_slots()) {
    throw DomainMismatchError(
        "caption_logprob: sample and params cover different slot counts");
  }
  LogProb out;
  out.per_token.resize(params.n_slots());
  out.total = 0.0;
  for (uint32_t s = 0; s < params.n_slots(); ++s) {
    const auto logp = params.slot_log_probabilities(s);
    out.per_token[s] = logp[static_cast<size_t>(sample.decisions[s])];
    out.total += out.per_token[s];
  }
  return out;
}

CaptionSample greedy_caption(const PolicyParams& params) {
  const FactSpace& space = params.space();
  FactSubset correct{space};
  FactSubset errors{space};
  std::vector<SlotDecision> decisions(params.n_slots());
  std::vector<double> token_logprobs(params.n_slots());
  double total = 0.0;
  for (uint32_t s = 0; s < params.n_slots(); ++s) {
    const auto& logits = params.logits(s);
    size_t k = 0;
    for (size_t cand = 1; cand < 3; ++cand) {
      if (logits[cand] > logits[k]) {
        k = cand;
      }
    }
    decisions[s] = static_cast<SlotDecision>(k);
    token_logprobs[s] = params.slot_log_probabilities(s)[k];
    total += token_logprobs[s];
    if (k == 0) {
      correct.add(s);
    } else if (k == 1) {
      errors.add(s);
    }
  }
  return CaptionSample{CaptionFacts(std::move(correct), std::move(errors)),
                       std::move(decisions), std::move(token_logprobs), total};
}

BestOfN best_of_n(const PolicyParams& params, size_t n,
                  const SampleReward& reward, Rng& rng) {
  if (n == 0) {
    throw std::invalid_argument("best_of_n: n must be >= 1");
  }
  BestOfN out{sample_caption(params, rng), 0, {}, {}};
  out.all.push_back(out.best);
  out.rewards.push_back(reward(out.best.facts));
  for (size_t i = 1; i < n; ++i) {
    CaptionSample sample = sample_caption(params, rng);
    const double r = reward(sample.facts);
    out.all.push_back(std::move(sample));
    out.rewards.push_back(r);
    if (r > out.rewards[out.best_index]) {
      out.best_index = i;
      out.best = out.all[i];
    }
  }
  return out;
}

PolicyParams fit_to_samples(const FactSpace& space,
                            const std::vector<CaptionSample>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("fit_to_samples: sample list is empty");
  }
  for (const auto& s : samples) {
    if (s.decisions.size() != space.n_slots()) {
      throw DomainMismatchError(
          "fit_to_samples: sample slot count differs from the space");
    }
  }
  std::vector<LogitTriple> logits(space.n_slots());
  const double denom = static_cast<double>(samples.size()) + 3.0;
  for (uint32_t s = 0; s < space.n_slots(); ++s) {
    std::array<double, 3> counts{0.0, 0.0, 0.0};
    for (const auto& sample : samples) {
      counts[static_cast<size_t>(sample.decisions[s])] += 1.0;
    }
    for (size_t k = 0; k < 3; ++k) {
      logits[s][k] = std::log((counts[k] + 1.0) / denom);
    }
  }
  return PolicyParams(space, std::move(logits));
}

double ReferencePool::mean_m() const {
  if (entries.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& e : entries) {
    sum += e.witness.size();
  }
  return sum / static_cast<double>(entries.size());
}

ReferencePool regenerate_pool(const PolicyParams& params, size_t pool_size,
                              const PoolGenOptions& options, Rng& rng) {
  if (pool_size == 0) {
    throw std::invalid_argument("regenerate_pool: pool_size must be >= 1");
  }
  if (options.mode == GenerationMode::bon && !options.bon_reward) {
    throw std::invalid_argument("regenerate_pool: bon mode needs a reward");
  }
  ReferencePool pool;
  pool.entries.reserve(pool_size);
  for (size_t i = 0; i < pool_size; ++i) {
    CaptionSample caption = [&] {
      switch (options.mode) {
        case GenerationMode::greedy:
          return greedy_caption(params);
        case GenerationMode::sample:
          return sample_caption(params, rng);
        case GenerationMode::bon:
          return best_of_n(params, options.bon_n, options.bon_reward, rng).best;
      }
      throw std::logic_error("regenerate_pool: unknown mode");
    }();
    Witness witness =
        options.witness_mode == WitnessMode::ideal
            ? Witness(caption.facts.correct, WitnessMode::ideal)
            : Witness(caption.facts.emitted(), caption.facts.errors,
                      WitnessMode::override_all);
    pool.entries.push_back(
        PoolEntry{std::move(witness), options.round, options.source_id});
  }
  return pool;
}

double expected_joint_reward(const PolicyParams& params, uint32_t m_witness) {
  const uint32_t n = params.n_slots();
  // dp[c][e] = P(|C| = c, |E| = e) after the slots processed so far.
  std::vector<std::vector<double>> dp(n + 1, std::vector<double>(n + 1, 0.0));
  dp[0][0] = 1.0;
  for (uint32_t s = 0; s < n; ++s) {
    const auto probs = params.slot_probabilities(s);
    std::vector<std::vector<double>> next(n + 1,
                                          std::vector<double>(n + 1, 0.0));
    for (uint32_t c = 0; c <= s; ++c) {
      for (uint32_t e = 0; c + e <= s; ++e) {
        const double mass = dp[c][e];
        if (mass == 0.0) {
          continue;
        }
        next[c + 1][e] += mass * probs[0];
        next[c][e + 1] += mass * probs[1];
        next[c][e] += mass * probs[2];
      }
    }
    dp.swap(next);
  }
  double value = 0.0;
  for (uint32_t c = 0; c <= n; ++c) {
    for (uint32_t e = 0; c + e <= n; ++e) {
      if (dp[c][e] == 0.0) {
        continue;
      }
      value += dp[c][e] * reward_factors(RewardOperands(n, m_witness, c, e)).joint;
    }
  }
  return value;
}

double mean_slot_kl(const PolicyParams& p, const PolicyParams& q) {
  if (p.n_slots() != q.n_slots()) {
    throw DomainMismatchError("mean_slot_kl: slot counts differ");
  }
  double total = 0.0;
  for (uint32_t s = 0; s < p.n_slots(); ++s) {
    const auto lp = p.slot_log_probabilities(s);
    const auto lq = q.slot_log_probabilities(s);
    const auto probs = p.slot_probabilities(s);
    for (size_t k = 0; k < 3; ++k) {
      total += probs[k] * (lp[k] - lq[k]);
    }
  }
  return total / p.n_slots();
}

}  // namespace caplab
