// SPDX-License-Identifier: Apache-2.0
#include "caplab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace caplab {

namespace {

// Stream indices for per-seed derived RNGs, so every generator consumed by
// a driver is pinned to (seed, purpose).
enum StreamId : uint64_t {
  kPoolStream = 11,
  kBonStream = 12,
  kSegmentStream = 13,
  kDistillStream = 14,
};

PolicyParams weak_generator(const ExperimentSpec& spec) {
  const double omit = 1.0 - spec.pool_emit_correct - spec.pool_emit_wrong;
  return PolicyParams::from_probabilities(
      FactSpace(spec.n_slots),
      {spec.pool_emit_correct, spec.pool_emit_wrong, omit});
}

ReferencePool uniform_witness_pool(const FactSpace& space, uint32_t m,
                                   size_t pool_size, Rng& rng) {
  ReferencePool pool;
  pool.entries.reserve(pool_size);
  for (size_t i = 0; i < pool_size; ++i) {
    pool.entries.push_back(
        PoolEntry{Witness(sample_subset(space, m, rng)), 0, "uniform"});
  }
  return pool;
}

/// The spec's standard reward: two-level video form when segments are
/// configured, plain judge reward otherwise.
CaptionReward standard_reward(const ExperimentSpec& spec,
                              const RewardWeights& weights, uint64_t seed) {
  if (spec.video_segments > 0) {
    return make_video_reward(spec.n_slots, spec.video_segments, weights,
                             spec.judge,
                             std::make_shared<Rng>(Rng(seed).derive(kSegmentStream)));
  }
  return make_score_reward(weights, spec.judge);
}

CaptionReward lesioned_reward(const ExperimentSpec& spec, uint64_t seed) {
  RewardWeights weights = spec.weights;
  switch (spec.lesion) {
    case LesionKind::minus_correctness:
      weights.w_corr = 0.0;
      return standard_reward(spec, weights, seed);
    case LesionKind::minus_completeness:
      weights.w_comp = 0.0;
      return standard_reward(spec, weights, seed);
    case LesionKind::minus_text_quality:
      weights.w_txt = 0.0;
      return standard_reward(spec, weights, seed);
    case LesionKind::minus_reference_caption:
      // The judge sees no witness: one coarse holistic score.
      return [weights](const Witness&, const CaptionFacts& caption) {
        return aggregate(holistic_judge(caption), weights);
      };
    case LesionKind::minus_reference_image: {
      const JudgeConfig judge = spec.judge;
      return [weights, judge](const Witness& witness,
                              const CaptionFacts& caption) {
        return aggregate(unadjudicated_judge(witness, caption, judge), weights);
      };
    }
    case LesionKind::minus_local: {
      if (spec.video_segments == 0) {
        throw std::invalid_argument(
            "ablation: minus_local needs video_segments > 0");
      }
      weights.w_local = 0.0;
      return standard_reward(spec, weights, seed);
    }
    case LesionKind::none:
      break;
  }
  throw std::invalid_argument("ablation: the spec must name exactly one lesion");
}

/// First trace iteration at which the destination thresholds hold;
/// returns the row count (one past the end) when never reached.
double iterations_to_threshold(const TrainingTrace& trace, uint32_t n_slots) {
  const auto n = static_cast<double>(n_slots);
  for (const auto& row : trace.rows) {
    if (row.expected_correct / n >= thresholds::kDestinationCorrect &&
        row.expected_errors / n <= thresholds::kDestinationErrors) {
      return static_cast<double>(row.iteration);
    }
  }
  return static_cast<double>(trace.rows.size());
}

bool destination_reached(double correct_frac, double error_frac) {
  return correct_frac >= thresholds::kDestinationCorrect &&
         error_frac <= thresholds::kDestinationErrors;
}

size_t supermajority(size_t n_seeds) {
  return static_cast<size_t>(
      std::ceil(thresholds::kSeedSupermajority * static_cast<double>(n_seeds) -
                1e-9));
}

double metric(const ExperimentReport& report, const std::string& arm,
              uint64_t seed, const std::string& key) {
  const MetricRow* row = report.find_row(arm, seed);
  if (row == nullptr) {
    throw std::logic_error("report: missing row " + arm + "/seed " +
                           std::to_string(seed));
  }
  return row->metrics.at(key);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::weak_to_strong:
      return "weak_to_strong";
    case ExperimentKind::self_improvement:
      return "self_improvement";
    case ExperimentKind::ablation:
      return "ablation";
    case ExperimentKind::bon:
      return "bon";
  }
  throw std::logic_error("to_string: unknown ExperimentKind");
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "weak_to_strong") return ExperimentKind::weak_to_strong;
  if (name == "self_improvement") return ExperimentKind::self_improvement;
  if (name == "ablation") return ExperimentKind::ablation;
  if (name == "bon") return ExperimentKind::bon;
  throw std::invalid_argument(
      "unknown experiment '" + name +
      "' (expected weak_to_strong, self_improvement, ablation, or bon)");
}

std::string to_string(LesionKind lesion) {
  switch (lesion) {
    case LesionKind::none:
      return "none";
    case LesionKind::minus_correctness:
      return "minus_correctness";
    case LesionKind::minus_completeness:
      return "minus_completeness";
    case LesionKind::minus_text_quality:
      return "minus_text_quality";
    case LesionKind::minus_reference_caption:
      return "minus_reference_caption";
    case LesionKind::minus_reference_image:
      return "minus_reference_image";
    case LesionKind::minus_local:
      return "minus_local";
  }
  throw std::logic_error("to_string: unknown LesionKind");
}

LesionKind lesion_from_string(const std::string& name) {
  if (name == "none") return LesionKind::none;
  if (name == "minus_correctness") return LesionKind::minus_correctness;
  if (name == "minus_completeness") return LesionKind::minus_completeness;
  if (name == "minus_text_quality") return LesionKind::minus_text_quality;
  if (name == "minus_reference_caption")
    return LesionKind::minus_reference_caption;
  if (name == "minus_reference_image")
    return LesionKind::minus_reference_image;
  if (name == "minus_local") return LesionKind::minus_local;
  throw std::invalid_argument(
      "unknown lesion '" + name +
      "' (expected minus_correctness, minus_completeness, "
      "minus_text_quality, minus_reference_caption, minus_reference_image, "
      "or minus_local)");
}

std::string ExperimentSpec::to_json_string() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["name"] = name;
  j["n_slots"] = n_slots;
  j["witness_sizes"] = witness_sizes;
  j["judge"] = {{"penalty_per_collision", judge.penalty_per_collision},
                {"p_flip", judge.p_flip}};
  j["weights"] = {{"w_corr", weights.w_corr},
                  {"w_comp", weights.w_comp},
                  {"w_txt", weights.w_txt},
                  {"w_local", weights.w_local}};
  j["lesion"] = to_string(lesion);
  j["rounds"] = rounds;
  j["bon_n"] = bon_n;
  j["nominal_m"] = nominal_m;
  j["bon_repetitions"] = bon_repetitions;
  j["pool_size"] = pool_size;
  j["pool_emit_correct"] = pool_emit_correct;
  j["pool_emit_wrong"] = pool_emit_wrong;
  j["witness_mode"] =
      witness_mode == WitnessMode::ideal ? "ideal" : "override";
  j["video_segments"] = video_segments;
  j["grpo"] = nlohmann::json::parse(grpo.to_json_string());
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  return j.dump(2);
}

ExperimentSpec ExperimentSpec::from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ExperimentSpec spec;
  spec.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  spec.name = j.value("name", to_string(spec.kind));
  spec.n_slots = j.value("n_slots", spec.n_slots);
  if (j.contains("witness_sizes")) {
    spec.witness_sizes = j.at("witness_sizes").get<std::vector<uint32_t>>();
  }
  if (j.contains("judge")) {
    spec.judge.penalty_per_collision =
        j.at("judge").value("penalty_per_collision", 3);
    spec.judge.p_flip = j.at("judge").value("p_flip", 0.0);
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    spec.weights.w_corr = w.value("w_corr", spec.weights.w_corr);
    spec.weights.w_comp = w.value("w_comp", spec.weights.w_comp);
    spec.weights.w_txt = w.value("w_txt", spec.weights.w_txt);
    spec.weights.w_local = w.value("w_local", spec.weights.w_local);
  }
  if (j.contains("lesion")) {
    spec.lesion = lesion_from_string(j.at("lesion").get<std::string>());
  }
  spec.rounds = j.value("rounds", spec.rounds);
  spec.bon_n = j.value("bon_n", spec.bon_n);
  spec.nominal_m = j.value("nominal_m", spec.nominal_m);
  spec.bon_repetitions = j.value("bon_repetitions", spec.bon_repetitions);
  spec.pool_size = j.value("pool_size", spec.pool_size);
  spec.pool_emit_correct = j.value("pool_emit_correct", spec.pool_emit_correct);
  spec.pool_emit_wrong = j.value("pool_emit_wrong", spec.pool_emit_wrong);
  if (j.contains("witness_mode")) {
    const auto mode = j.at("witness_mode").get<std::string>();
    if (mode == "ideal") {
      spec.witness_mode = WitnessMode::ideal;
    } else if (mode == "override") {
      spec.witness_mode = WitnessMode::override_all;
    } else {
      throw std::invalid_argument(
          "unknown witness_mode '" + mode + "' (expected ideal or override)");
    }
  }
  spec.video_segments = j.value("video_segments", spec.video_segments);
  if (j.contains("grpo")) {
    spec.grpo = GrpoConfig::from_json_string(j.at("grpo").dump());
  }
  if (j.contains("seeds")) {
    spec.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  }
  spec.output_dir = j.value("output_dir", spec.output_dir);
  return spec;
}

bool ExperimentReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const Verdict& v) { return v.pass; });
}

const MetricRow* ExperimentReport::find_row(const std::string& arm,
                                            uint64_t seed) const {
  for (const auto& row : rows) {
    if (row.arm == arm && row.seed == seed) {
      return &row;
    }
  }
  return nullptr;
}

void ExperimentReport::write_csv(std::ostream& out) const {
  std::set<std::string> keys;
  for (const auto& row : rows) {
    for (const auto& [key, value] : row.metrics) {
      keys.insert(key);
    }
  }
  out << "experiment,name,arm,seed";
  for (const auto& key : keys) {
    out << ',' << key;
  }
  out << '\n';
  out << std::fixed << std::setprecision(6);
  for (const auto& row : rows) {
    out << experiment << ',' << name << ',' << row.arm << ',' << row.seed;
    for (const auto& key : keys) {
      out << ',';
      const auto it = row.metrics.find(key);
      if (it != row.metrics.end()) {
        out << it->second;
      }
    }
    out << '\n';
  }
}

void ExperimentReport::write_summary_json(std::ostream& out) const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["name"] = name;
  j["row_count"] = rows.size();
  j["all_pass"] = all_pass();
  auto& verdict_list = j["verdicts"] = nlohmann::json::array();
  for (const auto& verdict : verdicts) {
    verdict_list.push_back({{"name", verdict.name},
                            {"pass", verdict.pass},
                            {"detail", verdict.detail}});
  }
  // per-arm metric means
  std::map<std::string, std::map<std::string, std::pair<double, size_t>>> agg;
  for (const auto& row : rows) {
    for (const auto& [key, value] : row.metrics) {
      auto& slot = agg[row.arm][key];
      slot.first += value;
      slot.second += 1;
    }
  }
  auto& arms = j["arms"] = nlohmann::json::object();
  for (const auto& [arm, metrics] : agg) {
    auto& entry = arms[arm] = nlohmann::json::object();
    for (const auto& [key, sum_count] : metrics) {
      entry[key] = sum_count.first / static_cast<double>(sum_count.second);
    }
  }
  out << j.dump(2) << '\n';
}

CaptionReward make_video_reward(uint32_t n_slots, uint32_t segments,
                                const RewardWeights& weights,
                                const JudgeConfig& judge,
                                std::shared_ptr<Rng> segment_rng) {
  if (segments == 0 || segments > n_slots) {
    throw std::invalid_argument("make_video_reward: bad segment count");
  }
  if (segment_rng == nullptr) {
    throw std::invalid_argument("make_video_reward: segment rng required");
  }
  return [n_slots, segments, weights, judge, segment_rng](
             const Witness& witness, const CaptionFacts& caption) {
    const double r_global =
        aggregate(score_judge(witness, caption, judge), weights);
    // one uniformly chosen contiguous segment per evaluation
    const auto segment = static_cast<uint32_t>(segment_rng->uniform_below(segments));
    const uint32_t lo = segment * n_slots / segments;
    const uint32_t hi = (segment + 1) * n_slots / segments;
    const Witness local_witness(witness.slots.restrict_to_range(lo, hi),
                                witness.tainted.restrict_to_range(lo, hi),
                                witness.mode);
    const CaptionFacts local_caption(
        caption.correct.restrict_to_range(lo, hi),
        caption.errors.restrict_to_range(lo, hi));
    const double r_local =
        aggregate(score_judge(local_witness, local_caption, judge), weights);
    return aggregate_video(r_global, r_local, weights);
  };
}

ExperimentReport run_weak_to_strong(const ExperimentSpec& spec) {
  if (spec.witness_sizes.empty()) {
    throw std::invalid_argument("weak_to_strong: sweep at least one m");
  }
  const FactSpace space(spec.n_slots);
  const auto n = static_cast<double>(spec.n_slots);
  ExperimentReport report{to_string(spec.kind), spec.name, {}, {}};

  for (const uint32_t m : spec.witness_sizes) {
    const std::string arm = "m=" + std::to_string(m);
    for (const uint64_t seed : spec.seeds) {
      Rng pool_rng = Rng(seed).derive(kPoolStream + m);
      const auto pool = uniform_witness_pool(space, m, spec.pool_size, pool_rng);
      GrpoConfig cfg = spec.grpo;
      cfg.seed = seed;
      const auto reward = standard_reward(spec, spec.weights, seed);
      const auto result =
          train(PolicyParams::uniform(space), pool, reward, cfg);
      MetricRow row{arm, seed, {}};
      row.metrics["pool_mean_m"] = pool.mean_m();
      row.metrics["final_correct_frac"] =
          result.final_params.expected_correct() / n;
      row.metrics["final_error_frac"] =
          result.final_params.expected_errors() / n;
      row.metrics["final_mean_reward"] =
          result.trace.rows.empty() ? 0.0
                                    : result.trace.rows.back().mean_reward;
      row.metrics["iters_to_threshold"] =
          iterations_to_threshold(result.trace, spec.n_slots);
      row.metrics["reached"] = destination_reached(
          row.metrics["final_correct_frac"], row.metrics["final_error_frac"]);
      report.rows.push_back(std::move(row));
    }
  }

  // Verdicts read the report only.
  const size_t need = supermajority(spec.seeds.size());
  for (const uint32_t m : spec.witness_sizes) {
    if (m == 0) {
      report.verdicts.push_back(
          {"destination m=0", true,
           "skipped: no supervision, excluded from convergence claims"});
      continue;
    }
    const std::string arm = "m=" + std::to_string(m);
    size_t hit = 0;
    for (const uint64_t seed : spec.seeds) {
      hit += destination_reached(
                 metric(report, arm, seed, "final_correct_frac"),
                 metric(report, arm, seed, "final_error_frac"))
                 ? 1
                 : 0;
    }
    report.verdicts.push_back(
        {"destination " + arm, hit >= need,
         std::to_string(hit) + "/" + std::to_string(spec.seeds.size()) +
             " seeds reached the destination thresholds"});
  }

  std::vector<uint32_t> positive_ms;
  for (uint32_t m : spec.witness_sizes) {
    if (m >= 1) {
      positive_ms.push_back(m);
    }
  }
  std::sort(positive_ms.begin(), positive_ms.end());
  if (positive_ms.size() >= 2) {
    size_t monotone_seeds = 0;
    for (const uint64_t seed : spec.seeds) {
      bool monotone = true;
      for (size_t i = 0; i + 1 < positive_ms.size(); ++i) {
        const auto lo = "m=" + std::to_string(positive_ms[i]);
        const auto hi = "m=" + std::to_string(positive_ms[i + 1]);
        if (metric(report, lo, seed, "reached") != 1.0 ||
            metric(report, hi, seed, "reached") != 1.0 ||
            metric(report, hi, seed, "iters_to_threshold") >
                metric(report, lo, seed, "iters_to_threshold")) {
          monotone = false;
          break;
        }
      }
      monotone_seeds += monotone ? 1 : 0;
    }
    report.verdicts.push_back(
        {"speed non-increasing in m",
         monotone_seeds * 2 > spec.seeds.size(),
         std::to_string(monotone_seeds) + "/" +
             std::to_string(spec.seeds.size()) +
             " seeds have non-increasing iterations-to-threshold"});
  } else {
    report.verdicts.push_back(
        {"speed non-increasing in m", true,
         "skipped: single witness size, destination criterion only"});
  }
  return report;
}

ExperimentReport run_self_improvement(const ExperimentSpec& spec) {
  if (spec.rounds < 2) {
    throw std::invalid_argument("self_improvement: rounds must be >= 2");
  }
  const FactSpace space(spec.n_slots);
  const auto n = static_cast<double>(spec.n_slots);
  ExperimentReport report{to_string(spec.kind), spec.name, {}, {}};
  const auto generator = weak_generator(spec);

  for (const uint64_t seed : spec.seeds) {
    Rng pool_rng = Rng(seed).derive(kPoolStream);
    PoolGenOptions weak_opts;
    weak_opts.mode = GenerationMode::sample;
    weak_opts.witness_mode = spec.witness_mode;
    weak_opts.round = 1;
    weak_opts.source_id = "weak-generator";
    ReferencePool pool =
        regenerate_pool(generator, spec.pool_size, weak_opts, pool_rng);

    const PolicyParams initial = PolicyParams::uniform(space);
    for (size_t round = 1; round <= spec.rounds; ++round) {
      GrpoConfig cfg = spec.grpo;
      cfg.seed = seed;
      const auto reward = standard_reward(spec, spec.weights, seed);
      const auto result = train(initial, pool, reward, cfg);

      MetricRow row{"round=" + std::to_string(round), seed, {}};
      row.metrics["pool_mean_m"] = pool.mean_m();
      row.metrics["final_correct_frac"] =
          result.final_params.expected_correct() / n;
      row.metrics["final_error_frac"] =
          result.final_params.expected_errors() / n;
      row.metrics["final_mean_reward"] =
          result.trace.rows.empty() ? 0.0
                                    : result.trace.rows.back().mean_reward;
      report.rows.push_back(std::move(row));

      if (round < spec.rounds) {
        PoolGenOptions regen;
        regen.mode = GenerationMode::greedy;
        regen.witness_mode = spec.witness_mode;
        regen.round = static_cast<uint32_t>(round + 1);
        regen.source_id = "round-" + std::to_string(round) + "-policy";
        pool = regenerate_pool(result.final_params, spec.pool_size, regen,
                               pool_rng);
      }
    }
  }

  const size_t need = supermajority(spec.seeds.size());
  for (size_t round = 1; round + 1 <= spec.rounds; ++round) {
    const auto lo = "round=" + std::to_string(round);
    const auto hi = "round=" + std::to_string(round + 1);
    size_t grew = 0;
    size_t improved = 0;
    for (const uint64_t seed : spec.seeds) {
      const double m_lo = metric(report, lo, seed, "pool_mean_m");
      const double m_hi = metric(report, hi, seed, "pool_mean_m");
      // strict growth expected only out of the weak starting pool
      grew += (round == 1 ? m_hi > m_lo : m_hi >= m_lo) ? 1 : 0;
      improved += metric(report, hi, seed, "final_correct_frac") >=
                          metric(report, lo, seed, "final_correct_frac")
                      ? 1
                      : 0;
    }
    report.verdicts.push_back(
        {"witness growth " + lo + " -> " + hi, grew >= need,
         std::to_string(grew) + "/" + std::to_string(spec.seeds.size()) +
             " seeds grew the pool mean witness size"});
    report.verdicts.push_back(
        {"final correctness " + lo + " -> " + hi, improved >= need,
         std::to_string(improved) + "/" + std::to_string(spec.seeds.size()) +
             " seeds kept or raised final expected correct"});
  }
  return report;
}

ExperimentReport run_ablation(const ExperimentSpec& spec) {
  if (spec.lesion == LesionKind::none) {
    throw std::invalid_argument("ablation: the spec must name exactly one lesion");
  }
  const FactSpace space(spec.n_slots);
  const auto n = static_cast<double>(spec.n_slots);
  ExperimentReport report{to_string(spec.kind), spec.name, {}, {}};
  const auto generator = weak_generator(spec);
  const std::string lesion_arm = to_string(spec.lesion);

  for (const uint64_t seed : spec.seeds) {
    Rng pool_rng = Rng(seed).derive(kPoolStream);
    PoolGenOptions pool_opts;
    pool_opts.mode = GenerationMode::sample;
    pool_opts.witness_mode = spec.lesion == LesionKind::minus_reference_image
                                 ? WitnessMode::override_all
                                 : spec.witness_mode;
    pool_opts.round = 1;
    pool_opts.source_id = "weak-generator";
    const auto pool =
        regenerate_pool(generator, spec.pool_size, pool_opts, pool_rng);

    const PolicyParams initial = PolicyParams::uniform(space);
    for (const bool lesioned : {false, true}) {
      GrpoConfig cfg = spec.grpo;
      cfg.seed = seed;  // paired seeds across arms
      const auto reward = lesioned ? lesioned_reward(spec, seed)
                                   : standard_reward(spec, spec.weights, seed);
      const auto result = train(initial, pool, reward, cfg);
      MetricRow row{lesioned ? lesion_arm : "full", seed, {}};
      row.metrics["final_correct_frac"] =
          result.final_params.expected_correct() / n;
      row.metrics["final_error_frac"] =
          result.final_params.expected_errors() / n;
      row.metrics["final_mean_reward"] =
          result.trace.rows.empty() ? 0.0
                                    : result.trace.rows.back().mean_reward;
      row.metrics["joint_factor"] =
          expected_joint_reward(result.final_params, spec.nominal_m);
      report.rows.push_back(std::move(row));
    }
  }

  const size_t need = supermajority(spec.seeds.size());
  const size_t n_seeds = spec.seeds.size();
  auto count_seeds = [&](auto&& predicate) {
    size_t count = 0;
    for (const uint64_t seed : spec.seeds) {
      count += predicate(seed) ? 1 : 0;
    }
    return count;
  };

  switch (spec.lesion) {
    case LesionKind::minus_completeness: {
      const size_t count = count_seeds([&](uint64_t seed) {
        return metric(report, lesion_arm, seed, "final_correct_frac") <
               metric(report, "full", seed, "final_correct_frac");
      });
      report.verdicts.push_back(
          {"lesion lowers expected correct", count >= need,
           std::to_string(count) + "/" + std::to_string(n_seeds) +
               " paired seeds"});
      break;
    }
    case LesionKind::minus_correctness: {
      const size_t count = count_seeds([&](uint64_t seed) {
        return metric(report, lesion_arm, seed, "final_error_frac") >
               metric(report, "full", seed, "final_error_frac");
      });
      report.verdicts.push_back(
          {"lesion raises expected errors", count >= need,
           std::to_string(count) + "/" + std::to_string(n_seeds) +
               " paired seeds"});
      break;
    }
    case LesionKind::minus_text_quality: {
      // Paired joint-factor difference; the CI must contain zero.
      std::vector<double> diffs;
      for (const uint64_t seed : spec.seeds) {
        diffs.push_back(metric(report, lesion_arm, seed, "joint_factor") -
                        metric(report, "full", seed, "joint_factor"));
      }
      double mean = 0.0;
      for (double d : diffs) mean += d;
      mean /= static_cast<double>(diffs.size());
      double var = 0.0;
      for (double d : diffs) var += (d - mean) * (d - mean);
      const double se = diffs.size() > 1
                            ? std::sqrt(var / (diffs.size() - 1)) /
                                  std::sqrt(static_cast<double>(diffs.size()))
                            : 0.0;
      // Half-width floor at the numerical precision of the metric: the
      // paired trajectories differ only by float roundoff (the lesion
      // shifts every reward by a constant, which z-scored advantages
      // cancel), so diffs of order 1e-16 are measurement noise.
      const double half_width = std::max(1.96 * se, 1e-9);
      const double lo = mean - half_width;
      const double hi = mean + half_width;
      std::ostringstream detail;
      detail << std::setprecision(6) << "paired diff CI [" << lo << ", " << hi
             << "]";
      report.verdicts.push_back(
          {"joint factor within noise of full", lo <= 0.0 && 0.0 <= hi,
           detail.str()});
      break;
    }
    case LesionKind::minus_reference_caption:
    case LesionKind::minus_reference_image: {
      const size_t count = count_seeds([&](uint64_t seed) {
        return metric(report, lesion_arm, seed, "final_correct_frac") <
                   metric(report, "full", seed, "final_correct_frac") &&
               metric(report, lesion_arm, seed, "final_error_frac") >
                   metric(report, "full", seed, "final_error_frac");
      });
      report.verdicts.push_back(
          {"lesion degrades both axes", count >= need,
           std::to_string(count) + "/" + std::to_string(n_seeds) +
               " paired seeds"});
      break;
    }
    case LesionKind::minus_local: {
      report.verdicts.push_back(
          {"local term lesion reported", true,
           "paired metrics recorded; no directional claim at this scale"});
      break;
    }
    case LesionKind::none:
      break;
  }
  return report;
}

ExperimentReport run_bon_study(const ExperimentSpec& spec) {
  if (spec.bon_n < 1) {
    throw std::invalid_argument("bon: bon_n must be >= 1");
  }
  const FactSpace space(spec.n_slots);
  ExperimentReport report{to_string(spec.kind), spec.name, {}, {}};
  const auto joint = make_joint_factor_reward(spec.n_slots, spec.nominal_m);
  const Witness no_witness{FactSubset(space)};
  const SampleReward sample_reward = [&](const CaptionFacts& facts) {
    return joint(no_witness, facts);
  };

  for (const uint64_t seed : spec.seeds) {
    const PolicyParams backbone = PolicyParams::uniform(space);

    // Ceiling and self-distillation targets from one stream of draws.
    Rng bon_rng = Rng(seed).derive(kBonStream);
    std::vector<CaptionSample> targets;
    targets.reserve(spec.bon_repetitions);
    double ceiling_sum = 0.0;
    for (size_t rep = 0; rep < spec.bon_repetitions; ++rep) {
      auto bon = best_of_n(backbone, spec.bon_n, sample_reward, bon_rng);
      ceiling_sum += bon.rewards[bon.best_index];
      targets.push_back(std::move(bon.best));
    }
    const double ceiling =
        ceiling_sum / static_cast<double>(spec.bon_repetitions);
    const double self_distill_value = expected_joint_reward(
        fit_to_samples(space, targets), spec.nominal_m);

    GrpoConfig cfg = spec.grpo;
    cfg.seed = seed;
    Rng pool_rng = Rng(seed).derive(kPoolStream);
    const auto pool =
        uniform_witness_pool(space, spec.nominal_m, spec.pool_size, pool_rng);
    const auto rl = train(backbone, pool, joint, cfg);
    const double rl_value =
        expected_joint_reward(rl.final_params, spec.nominal_m);

    Rng distill_rng = Rng(seed).derive(kDistillStream);
    std::vector<CaptionSample> rl_targets;
    rl_targets.reserve(spec.bon_repetitions);
    for (size_t rep = 0; rep < spec.bon_repetitions; ++rep) {
      rl_targets.push_back(
          best_of_n(rl.final_params, spec.bon_n, sample_reward, distill_rng)
              .best);
    }
    const double distill_from_rl_value = expected_joint_reward(
        fit_to_samples(space, rl_targets), spec.nominal_m);

    const double backbone_value =
        expected_joint_reward(backbone, spec.nominal_m);
    report.rows.push_back(
        {"backbone", seed, {{"expected_joint_reward", backbone_value}}});
    report.rows.push_back(
        {"ceiling", seed, {{"expected_joint_reward", ceiling}}});
    report.rows.push_back({"self_distill",
                           seed,
                           {{"expected_joint_reward", self_distill_value}}});
    report.rows.push_back(
        {"rl", seed, {{"expected_joint_reward", rl_value}}});
    report.rows.push_back({"distill_from_rl",
                           seed,
                           {{"expected_joint_reward", distill_from_rl_value}}});
  }

  const size_t need = supermajority(spec.seeds.size());
  size_t under_ceiling = 0;
  size_t beats_ceiling = 0;
  size_t tracks_teacher = 0;
  for (const uint64_t seed : spec.seeds) {
    const double ceiling =
        metric(report, "ceiling", seed, "expected_joint_reward");
    under_ceiling +=
        metric(report, "self_distill", seed, "expected_joint_reward") <=
                ceiling + thresholds::kBonSelfDistillTolerance
            ? 1
            : 0;
    const double rl = metric(report, "rl", seed, "expected_joint_reward");
    beats_ceiling += rl > ceiling ? 1 : 0;
    tracks_teacher +=
        std::abs(metric(report, "distill_from_rl", seed,
                        "expected_joint_reward") -
                 rl) <= thresholds::kBonDistillFromRlTolerance
            ? 1
            : 0;
  }
  const auto n_seeds = spec.seeds.size();
  report.verdicts.push_back(
      {"self-distillation stays at or below the ceiling",
       under_ceiling == n_seeds,
       std::to_string(under_ceiling) + "/" + std::to_string(n_seeds) +
           " seeds"});
  report.verdicts.push_back(
      {"optimization crosses the ceiling", beats_ceiling >= need,
       std::to_string(beats_ceiling) + "/" + std::to_string(n_seeds) +
           " seeds"});
  report.verdicts.push_back(
      {"distilled student tracks its teacher", tracks_teacher == n_seeds,
       std::to_string(tracks_teacher) + "/" + std::to_string(n_seeds) +
           " seeds"});
  return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::weak_to_strong:
      return run_weak_to_strong(spec);
    case ExperimentKind::self_improvement:
      return run_self_improvement(spec);
    case ExperimentKind::ablation:
      return run_ablation(spec);
    case ExperimentKind::bon:
      return run_bon_study(spec);
  }
  throw std::logic_error("run_experiment: unknown kind");
}

}  // namespace caplab
