// SPDX-License-Identifier: Apache-2.0
//
// caplab: command-line surface over the library. Subcommands: reward, mc,
// train, experiment, agree, ingest-annotations, score. Every command with
// file outputs writes a manifest.json whose configuration snapshot and
// seed replay the run.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "caplab/agreement.hpp"
#include "caplab/experiments.hpp"
#include "caplab/judge_adapter.hpp"
#include "caplab/manifest.hpp"
#include "caplab/reward.hpp"

namespace fs = std::filesystem;
using namespace caplab;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

/// Single-run training specification consumed by `train`.
struct TrainSpec {
  uint32_t n_slots = 20;
  uint32_t witness_size = 6;
  std::string pool_kind = "uniform";  // uniform | weak
  size_t pool_size = 64;
  double pool_emit_correct = 0.4;
  double pool_emit_wrong = 0.05;
  std::string reward_kind = "score";  // score | joint
  uint32_t video_segments = 0;
  RewardWeights weights;
  JudgeConfig judge;
  GrpoConfig grpo;

  static TrainSpec from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    TrainSpec spec;
    spec.n_slots = j.value("n_slots", spec.n_slots);
    spec.witness_size = j.value("witness_size", spec.witness_size);
    spec.pool_kind = j.value("pool_kind", spec.pool_kind);
    spec.pool_size = j.value("pool_size", spec.pool_size);
    spec.pool_emit_correct =
        j.value("pool_emit_correct", spec.pool_emit_correct);
    spec.pool_emit_wrong = j.value("pool_emit_wrong", spec.pool_emit_wrong);
    spec.reward_kind = j.value("reward_kind", spec.reward_kind);
    spec.video_segments = j.value("video_segments", spec.video_segments);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      spec.weights.w_corr = w.value("w_corr", spec.weights.w_corr);
      spec.weights.w_comp = w.value("w_comp", spec.weights.w_comp);
      spec.weights.w_txt = w.value("w_txt", spec.weights.w_txt);
      spec.weights.w_local = w.value("w_local", spec.weights.w_local);
    }
    if (j.contains("judge")) {
      spec.judge.penalty_per_collision =
          j.at("judge").value("penalty_per_collision", 3);
      spec.judge.p_flip = j.at("judge").value("p_flip", 0.0);
    }
    if (j.contains("grpo")) {
      spec.grpo = GrpoConfig::from_json_string(j.at("grpo").dump());
    }
    if (spec.pool_kind != "uniform" && spec.pool_kind != "weak") {
      throw std::invalid_argument("train: pool_kind must be uniform or weak");
    }
    if (spec.reward_kind != "score" && spec.reward_kind != "joint") {
      throw std::invalid_argument("train: reward_kind must be score or joint");
    }
    return spec;
  }

  std::string to_json_string() const {
    nlohmann::json j;
    j["n_slots"] = n_slots;
    j["witness_size"] = witness_size;
    j["pool_kind"] = pool_kind;
    j["pool_size"] = pool_size;
    j["pool_emit_correct"] = pool_emit_correct;
    j["pool_emit_wrong"] = pool_emit_wrong;
    j["reward_kind"] = reward_kind;
    j["video_segments"] = video_segments;
    j["weights"] = {{"w_corr", weights.w_corr},
                    {"w_comp", weights.w_comp},
                    {"w_txt", weights.w_txt},
                    {"w_local", weights.w_local}};
    j["judge"] = {{"penalty_per_collision", judge.penalty_per_collision},
                  {"p_flip", judge.p_flip}};
    j["grpo"] = nlohmann::json::parse(grpo.to_json_string());
    return j.dump(2);
  }
};

int cmd_reward(uint32_t n, uint32_t m, uint32_t c, uint32_t e, bool oracle,
               const std::optional<std::string>& out_dir) {
  const RewardOperands ops(n, m, c, e);
  const auto factors = reward_factors(ops);
  std::ostringstream text;
  text << std::fixed << std::setprecision(6);
  text << "p_comp " << factors.p_comp << "\n"
       << "p_corr " << factors.p_corr << "\n"
       << "joint " << factors.joint << "\n";
  if (oracle) {
    const FactSpace space(n);
    std::vector<uint32_t> c_idx(c), r_idx(m);
    for (uint32_t i = 0; i < c; ++i) c_idx[i] = i;
    for (uint32_t i = 0; i < m; ++i) r_idx[i] = i;
    const auto recall =
        oracle_recall(space, FactSubset::from_indices(space, c_idx), m);
    const auto coll =
        oracle_coll(space, FactSubset::from_indices(space, r_idx), e);
    const bool match = p_recall_exact(ops) == recall.exact &&
                       p_coll_exact(ops) == coll.exact;
    text << "oracle_p_comp " << recall.value << "\n"
         << "oracle_p_corr " << coll.value << "\n"
         << "oracle_match " << (match ? 1 : 0) << "\n";
  }
  std::cout << text.str();
  if (out_dir) {
    fs::create_directories(*out_dir);
    open_output(fs::path(*out_dir) / "reward.txt") << text.str();
    RunManifest manifest;
    manifest.mark_start();
    manifest.command = "reward";
    nlohmann::json cfg{{"n", n}, {"m", m}, {"c", c}, {"e", e}, {"oracle", oracle}};
    manifest.config_json = cfg.dump();
    manifest.outputs = {"reward.txt"};
    manifest.mark_finish();
    manifest.write((fs::path(*out_dir) / "manifest.json").string());
  }
  return 0;
}

int cmd_mc(uint32_t n, uint32_t m, uint32_t c, uint32_t e, uint64_t samples,
           uint64_t seed, const std::optional<std::string>& out_dir) {
  const RewardOperands ops(n, m, c, e);
  Rng rng(seed);
  const auto est = mc_estimate(ops, samples, rng);
  const auto factors = reward_factors(ops);
  std::ostringstream text;
  text << std::fixed << std::setprecision(6);
  text << "p_comp_hat " << est.p_comp_hat << " se " << est.se_comp
       << " closed_form " << factors.p_comp << "\n"
       << "p_corr_hat " << est.p_corr_hat << " se " << est.se_corr
       << " closed_form " << factors.p_corr << "\n"
       << "joint_hat " << est.joint_hat << " se " << est.se_joint << "\n";
  std::cout << text.str();
  if (out_dir) {
    fs::create_directories(*out_dir);
    open_output(fs::path(*out_dir) / "mc.txt") << text.str();
    RunManifest manifest;
    manifest.mark_start();
    manifest.command = "mc";
    nlohmann::json cfg{{"n", n},       {"m", m},          {"c", c},
                       {"e", e},       {"samples", samples}, {"seed", seed}};
    manifest.config_json = cfg.dump();
    manifest.seed = seed;
    manifest.outputs = {"mc.txt"};
    manifest.mark_finish();
    manifest.write((fs::path(*out_dir) / "manifest.json").string());
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::optional<uint64_t>& seed_override) {
  RunManifest manifest;
  manifest.mark_start();
  TrainSpec spec = TrainSpec::from_json_string(read_file(config_path));
  if (seed_override) {
    spec.grpo.seed = *seed_override;
  }
  const FactSpace space(spec.n_slots);

  Rng pool_rng = Rng(spec.grpo.seed).derive(1);
  ReferencePool pool;
  if (spec.pool_kind == "uniform") {
    for (size_t i = 0; i < spec.pool_size; ++i) {
      pool.entries.push_back(PoolEntry{
          Witness(sample_subset(space, spec.witness_size, pool_rng)), 0,
          "uniform"});
    }
  } else {
    const double omit = 1.0 - spec.pool_emit_correct - spec.pool_emit_wrong;
    const auto generator = PolicyParams::from_probabilities(
        space, {spec.pool_emit_correct, spec.pool_emit_wrong, omit});
    pool = regenerate_pool(generator, spec.pool_size, PoolGenOptions{},
                           pool_rng);
  }

  CaptionReward reward;
  if (spec.reward_kind == "joint") {
    reward = make_joint_factor_reward(spec.n_slots, spec.witness_size);
  } else if (spec.video_segments > 0) {
    reward = make_video_reward(
        spec.n_slots, spec.video_segments, spec.weights, spec.judge,
        std::make_shared<Rng>(Rng(spec.grpo.seed).derive(2)));
  } else {
    reward = make_score_reward(spec.weights, spec.judge);
  }

  const auto result =
      train(PolicyParams::uniform(space), pool, reward, spec.grpo);

  fs::create_directories(out_dir);
  {
    auto trace = open_output(fs::path(out_dir) / "trace.csv");
    result.trace.write_csv(trace);
  }
  result.final_params.save((fs::path(out_dir) / "policy.json").string(),
                           "final checkpoint");
  manifest.command = "train";
  manifest.config_json = spec.to_json_string();
  manifest.seed = spec.grpo.seed;
  manifest.inputs = {config_path};
  manifest.outputs = {"trace.csv", "policy.json"};
  manifest.mark_finish();
  manifest.write((fs::path(out_dir) / "manifest.json").string());

  std::printf("train: %zu iterations, final E[|C|]/N %.6f, E[|E|]/N %.6f\n",
              result.trace.rows.size(),
              result.final_params.expected_correct() / spec.n_slots,
              result.final_params.expected_errors() / spec.n_slots);
  return 0;
}

int cmd_experiment(const std::string& config_path,
                   const std::optional<std::string>& out_override,
                   const std::optional<uint64_t>& seed_override) {
  RunManifest manifest;
  manifest.mark_start();
  ExperimentSpec spec = ExperimentSpec::from_json_string(read_file(config_path));
  if (seed_override) {
    spec.grpo.seed = *seed_override;
  }
  const std::string out_dir = out_override.value_or(
      spec.output_dir.empty() ? "experiment_out" : spec.output_dir);
  const auto report = run_experiment(spec);

  fs::create_directories(out_dir);
  {
    auto csv = open_output(fs::path(out_dir) / "report.csv");
    report.write_csv(csv);
  }
  {
    auto summary = open_output(fs::path(out_dir) / "summary.json");
    report.write_summary_json(summary);
  }
  manifest.command = "experiment";
  manifest.config_json = spec.to_json_string();
  manifest.seed = spec.grpo.seed;
  manifest.inputs = {config_path};
  manifest.outputs = {"report.csv", "summary.json"};
  manifest.mark_finish();
  manifest.write((fs::path(out_dir) / "manifest.json").string());

  for (const auto& verdict : report.verdicts) {
    std::printf("%s  %s (%s)\n", verdict.pass ? "PASS" : "FAIL",
                verdict.name.c_str(), verdict.detail.c_str());
  }
  return 0;
}

int cmd_agree(const std::string& reward_csv, const std::string& human_csv,
              const std::optional<std::string>& out_dir) {
  std::ifstream reward_in(reward_csv);
  if (!reward_in) {
    throw std::runtime_error("cannot open " + reward_csv);
  }
  std::ifstream human_in(human_csv);
  if (!human_in) {
    throw std::runtime_error("cannot open " + human_csv);
  }
  const auto reward_scores = RankTable::read_csv(reward_in);
  auto human_ranks = RankTable::read_csv(human_in);
  validate_strict_ranks(human_ranks);
  const auto reward_ranks = scores_table_to_ranks(reward_scores);
  const auto agreement = pairwise_agreement(reward_ranks, human_ranks);
  std::printf("mean_agreement %.6f\n", agreement.mean);
  if (out_dir) {
    fs::create_directories(*out_dir);
    {
      auto out = open_output(fs::path(*out_dir) / "agreement.csv");
      agreement.write_csv(out);
    }
    RunManifest manifest;
    manifest.mark_start();
    manifest.command = "agree";
    nlohmann::json cfg{{"reward_csv", reward_csv}, {"human_csv", human_csv}};
    manifest.config_json = cfg.dump();
    manifest.inputs = {reward_csv, human_csv};
    manifest.outputs = {"agreement.csv"};
    manifest.mark_finish();
    manifest.write((fs::path(*out_dir) / "manifest.json").string());
  }
  return 0;
}

int cmd_ingest(const std::string& in_path,
               const std::optional<std::string>& out_dir) {
  std::ifstream in(in_path);
  if (!in) {
    throw std::runtime_error("cannot open " + in_path);
  }
  const auto records = read_annotations_csv(in);
  const auto counts = ingest_annotations(records);
  write_confirmed_counts_csv(std::cout, counts);
  if (out_dir) {
    fs::create_directories(*out_dir);
    {
      auto out = open_output(fs::path(*out_dir) / "confirmed_counts.csv");
      write_confirmed_counts_csv(out, counts);
    }
    RunManifest manifest;
    manifest.mark_start();
    manifest.command = "ingest-annotations";
    nlohmann::json cfg{{"input", in_path}};
    manifest.config_json = cfg.dump();
    manifest.inputs = {in_path};
    manifest.outputs = {"confirmed_counts.csv"};
    manifest.mark_finish();
    manifest.write((fs::path(*out_dir) / "manifest.json").string());
  }
  return 0;
}

int cmd_score(const std::string& batch_path, const std::string& adapter_path,
              const std::string& out_dir) {
  RunManifest manifest;
  manifest.mark_start();
  const auto config = AdapterConfig::from_json_string(read_file(adapter_path));
  std::ifstream batch_in(batch_path);
  if (!batch_in) {
    throw std::runtime_error("cannot open " + batch_path);
  }
  const auto rows = read_score_batch(batch_in);
  const auto result = run_score_batch(rows, config);

  fs::create_directories(out_dir);
  {
    auto rewards = open_output(fs::path(out_dir) / "rewards.csv");
    write_rewards_csv(rewards, result);
  }
  {
    std::ofstream log(fs::path(out_dir) / "verdict_log.jsonl", std::ios::app);
    if (!log) {
      throw std::runtime_error("cannot write verdict_log.jsonl");
    }
    write_verdict_log(log, result);
  }
  manifest.command = "score";
  manifest.config_json = read_file(adapter_path);
  manifest.inputs = {batch_path, adapter_path};
  manifest.outputs = {"rewards.csv", "verdict_log.jsonl"};
  manifest.mark_finish();
  manifest.write((fs::path(out_dir) / "manifest.json").string());

  size_t failed = 0;
  for (const auto& record : result.rows) {
    failed += record.ok() ? 0 : 1;
  }
  std::printf("score: %zu rows, %zu failed, %zu combined\n", result.rows.size(),
              failed, result.combined.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fact-level captioning reward laboratory"};
  app.require_subcommand(1);

  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string global_config;
  app.add_option("--seed", seed, "Seed override")->group("Global");
  app.add_option("--out", out_dir, "Output directory")->group("Global");
  app.add_option("--config", global_config, "Configuration file")
      ->group("Global");
  app.fallthrough();

  // reward
  auto* reward_cmd =
      app.add_subcommand("reward", "Closed-form reward factors for (N, m, c, e)");
  uint32_t n = 10, m = 2, c = 5, e = 2;
  bool oracle = false;
  reward_cmd->add_option("--n", n, "Fact-space size N")->required();
  reward_cmd->add_option("--m", m, "Witness size m")->required();
  reward_cmd->add_option("--c", c, "Correct facts c")->required();
  reward_cmd->add_option("--e", e, "Erroneous facts e")->required();
  reward_cmd->add_flag("--oracle", oracle, "Cross-check against enumeration");

  // mc
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo event frequencies");
  uint64_t samples = 200000;
  mc_cmd->add_option("--n", n, "Fact-space size N")->required();
  mc_cmd->add_option("--m", m, "Witness size m")->required();
  mc_cmd->add_option("--c", c, "Correct facts c")->required();
  mc_cmd->add_option("--e", e, "Erroneous facts e")->required();
  mc_cmd->add_option("--samples", samples, "Sample count");

  // train
  auto* train_cmd = app.add_subcommand("train", "One training run");
  std::string config_path;
  train_cmd->add_option("--config", config_path, "Train spec JSON")
      ->check(CLI::ExistingFile);

  // experiment
  auto* experiment_cmd =
      app.add_subcommand("experiment", "Scripted experiment driver");
  experiment_cmd->add_option("--config", config_path, "Experiment spec JSON")
      ->check(CLI::ExistingFile);

  // agree
  auto* agree_cmd =
      app.add_subcommand("agree", "Reward-vs-human pairwise agreement");
  std::string reward_csv;
  std::string human_csv;
  agree_cmd->add_option("--reward", reward_csv, "Reward score table CSV")
      ->required()
      ->check(CLI::ExistingFile);
  agree_cmd->add_option("--human", human_csv, "Human rank table CSV")
      ->required()
      ->check(CLI::ExistingFile);

  // ingest-annotations
  auto* ingest_cmd = app.add_subcommand("ingest-annotations",
                                        "Two-step label file to confirmed counts");
  std::string annotations_path;
  ingest_cmd->add_option("--in", annotations_path, "Annotation CSV")
      ->required()
      ->check(CLI::ExistingFile);

  // score
  auto* score_cmd =
      app.add_subcommand("score", "External-judge batch scoring");
  std::string batch_path;
  std::string adapter_path;
  score_cmd->add_option("--batch", batch_path, "Batch JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--adapter", adapter_path, "Adapter config JSON")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    // the per-subcommand --config wins over the global one
    const std::string resolved_config =
        !config_path.empty() ? config_path : global_config;
    const auto require_config = [&]() -> const std::string& {
      if (resolved_config.empty()) {
        throw std::runtime_error("a --config file is required");
      }
      return resolved_config;
    };
    if (reward_cmd->parsed()) {
      return cmd_reward(n, m, c, e, oracle, out_dir);
    }
    if (mc_cmd->parsed()) {
      return cmd_mc(n, m, c, e, samples, seed.value_or(0), out_dir);
    }
    if (train_cmd->parsed()) {
      return cmd_train(require_config(), out_dir.value_or("train_out"), seed);
    }
    if (experiment_cmd->parsed()) {
      return cmd_experiment(require_config(), out_dir, seed);
    }
    if (agree_cmd->parsed()) {
      return cmd_agree(reward_csv, human_csv, out_dir);
    }
    if (ingest_cmd->parsed()) {
      return cmd_ingest(annotations_path, out_dir);
    }
    if (score_cmd->parsed()) {
      return cmd_score(batch_path, adapter_path, out_dir.value_or("score_out"));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
