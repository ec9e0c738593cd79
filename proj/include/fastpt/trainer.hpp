#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fastpt/cost.hpp"
#include "fastpt/model.hpp"
#include "fastpt/optim.hpp"
#include "fastpt/schedule.hpp"
#include "fastpt/tasks.hpp"

namespace fastpt {

struct Hyper {
  float learning_rate = 0.05F;
  int batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::adafactor;
  int eval_every = 0;  // 0: evaluate once, after the last step
  std::uint64_t seed = 0;
  bool reset_optimizer = true;  // fresh optimizer state at each stage boundary

  void validate() const;
  friend bool operator==(const Hyper&, const Hyper&) = default;
};

struct Metrics {
  double em = 0.0;
  double loss = 0.0;
  std::size_t count = 0;
};

struct EvalPoint {
  int step = 0;  // number of updates applied before the evaluation
  double em = 0.0;
  double loss = 0.0;
  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct RunRecord {
  std::vector<float> losses;  // training loss at each step, before its update
  std::vector<int> stage_of_step;
  std::vector<double> cum_flops;  // modeled FLOPs after each step
  std::vector<EvalPoint> evals;
  std::vector<int> stage_boundaries;
  std::vector<SoftPrompt> stage_prompts;  // prompt at the end of each stage

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct TrainResult {
  SoftPrompt prompt;
  RunRecord record;
};

/// Called before the update of every step with the prompt that step sees.
using StepHook = std::function<void(int step, int stage, const SoftPrompt& prompt)>;

/// Teacher-forced loss and greedy exact match over data.
Metrics evaluate(const ModelView& view, const SoftPrompt* prompt, const std::vector<Example>& data,
                 std::size_t batch_size = 64);
Metrics evaluate(const ModelWeights& weights, const PartialSpec& spec, const SoftPrompt* prompt,
                 const std::vector<Example>& data);

/// Prompt initialisation used by every training entry point for a seed.
SoftPrompt initial_prompt(const ModelConfig& config, std::uint64_t seed);

/// The prompt lives in the d-wide embedding space, so it moves unchanged.
SoftPrompt recycle_prompt(const SoftPrompt& p, const ModelConfig& to);

/// Runs the stages in order, carrying the prompt across boundaries.
TrainResult run_schedule(const ModelWeights& weights, const Schedule& schedule,
                         const SoftPrompt& prompt_init, const TaskData& data, const Hyper& hyper,
                         const StepHook& hook = {});

TrainResult pt_train(const ModelWeights& weights, const PartialSpec& spec,
                     const SoftPrompt& prompt_init, const TaskData& data, int steps,
                     const Hyper& hyper);

/// Stage 1 starts from initial_prompt(config, hyper.seed).
TrainResult fpt_train(const ModelWeights& weights, const Schedule& schedule, const TaskData& data,
                      const Hyper& hyper, const StepHook& hook = {});

struct PretrainResult {
  ModelWeights weights;
  std::vector<float> losses;
};

/// Full-parameter training on marker-tagged corpus objectives, starting
/// from init_weights(config, Rng(hyper.seed, "backbone")). The marker takes
/// encoder position prompt_len - 1; with probability shift_prob an example
/// is placed at a uniformly random offset instead.
PretrainResult pretrain(const ModelConfig& config, const Corpus& corpus, int steps,
                        const Hyper& hyper, double shift_prob = 0.0);

/// Held-out corpus loss of a backbone at the pretraining placement, with
/// objectives drawn from (seed, "heldout").
double corpus_loss(const ModelWeights& weights, const Corpus& corpus, std::uint64_t seed);

/// Trains every backbone tensor on the task without a prompt.
RunRecord finetune_baseline(const ModelWeights& weights, const TaskData& data, int steps,
                            const Hyper& hyper, ModelWeights* tuned = nullptr);

/// First step whose trailing mean loss over `window` steps is <= tau.
std::optional<int> steps_to_loss(const std::vector<float>& losses, double tau, int window = 10);

}  // namespace fastpt
