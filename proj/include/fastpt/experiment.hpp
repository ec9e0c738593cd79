#pragma once

// Glue shared by the command line and the acceptance suite: a lab config
// file, backbone construction, activation profiles and run directories.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fastpt/analysis.hpp"
#include "fastpt/serialize.hpp"
#include "fastpt/trainer.hpp"

namespace fastpt {

struct PretrainConfig {
  int steps = 6000;
  int corpus_size = 20000;
  int batch_size = 16;
  float learning_rate = 2e-3F;
  OptimizerKind optimizer = OptimizerKind::adam;
  double shift_prob = 0.0;
  std::uint64_t seed = 0;
  GrammarConfig grammar;
};

struct LabConfig {
  ModelConfig model;
  TaskSpec task;
  Hyper hyper;
  PretrainConfig pretrain;
  int steps = 2000;            // prompt-tuning steps per run
  int profile_samples = 200;   // examples used for activation profiling
  PresetOptions preset_options;
};

Json to_json(const LabConfig& c);
LabConfig lab_config_from_json(const Json& j);
LabConfig load_lab_config(const std::filesystem::path& path);

/// Pretrains a backbone from the lab config (deterministic in pretrain.seed).
PretrainResult build_backbone(const LabConfig& lab);

/// Loads config.json + weights.bin from a backbone directory.
ModelWeights load_backbone(const std::filesystem::path& dir, const ModelConfig& expected);
void save_backbone(const std::filesystem::path& dir, const ModelWeights& weights,
                   const std::vector<float>& losses);

/// Profile on the first profile_samples training examples, prompt stream (seed, "profile").
ActivationProfile lab_profile(const ModelWeights& weights, const LabConfig& lab,
                              const TaskData& data, std::uint64_t seed);

/// Writes config.json, schedule.json, weights.bin, prompt.bin,
/// prompt_stage<i>.bin, record.csv and metrics.csv into dir.
void save_run(const std::filesystem::path& dir, const Json& config, const Schedule& schedule,
              const ModelWeights& weights, const TrainResult& result);

struct LoadedRun {
  std::filesystem::path dir;
  std::string task;
  std::uint64_t seed = 0;
  Schedule schedule;
  std::vector<SoftPrompt> stage_prompts;
};

LoadedRun load_run(const std::filesystem::path& dir, const ModelConfig& config);

/// Run directories (holding schedule.json) at or below root, sorted by path.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root);

struct SweepPoint {
  double boundary = 0.0;  // final expansion boundary as a fraction of steps
  std::uint64_t seed = 0;
  double em = 0.0;
};

/// The named preset ladder with the first stages sharing `boundary` of the
/// steps equally and the final stage taking the rest.
Schedule boundary_schedule(std::string_view preset, const ModelConfig& config, int total_steps,
                           double boundary, const ActivationProfile* profile, const Rng& rng,
                           const PresetOptions& options = {});

struct AblationArm {
  std::string strategy;
  ReductionPlan plan;
};

/// activation / random at width 1/4 (all layers), uniform / last at depth
/// 1/2 (full width).
std::vector<AblationArm> default_ablation_arms();
const std::vector<std::pair<std::string, std::string>>& default_ablation_pairs();

/// Prompt tuning on the arm's partial model for lab.steps steps, scored by
/// exact match of that partial model on the dev set.
AblationRun run_ablation_arm(const ModelWeights& weights, const LabConfig& lab,
                             const TaskData& data, const ActivationProfile& profile,
                             const AblationArm& arm, std::uint64_t seed);

}  // namespace fastpt
