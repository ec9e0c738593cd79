#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fastpt/partial.hpp"

namespace fastpt {

struct Stage {
  PartialSpec spec;
  int steps = 0;
  std::string label;
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct Schedule {
  std::vector<Stage> stages;

  int total_steps() const;
  std::vector<double> fractions() const;
  /// First step index of every stage after the first.
  std::vector<int> boundaries() const;
  /// With require_full_final the last stage must be the identity spec.
  void validate(const ModelConfig& config, bool require_full_final = true) const;
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// floor(fraction * total) per stage, remainder to the last stage.
std::vector<int> split_steps(int total, const std::vector<double>& fractions);

Schedule make_schedule(const ModelConfig& config, const std::vector<ReductionPlan>& plans,
                       const std::vector<double>& step_fractions, int total_steps,
                       const ActivationProfile* profile, const Rng& rng);

/// Single stage on the full model.
Schedule identity_schedule(const ModelConfig& config, int steps);

struct PresetOptions {
  LayerStrategy layer_strategy = LayerStrategy::uniform;
  NeuronStrategy neuron_strategy = NeuronStrategy::activation;
  DecoderPolicy decoder_policy = DecoderPolicy::reduce;
};

struct PresetDefinition {
  std::vector<ReductionPlan> plans;
  std::vector<double> step_fractions;
};

/// ld-4stage, fr-4stage, cr-4stage, ld-2stage.
const std::vector<std::string>& preset_names();
PresetDefinition preset_definition(std::string_view name, const PresetOptions& options = {});
bool preset_needs_profile(std::string_view name);
Schedule preset_schedule(std::string_view name, const ModelConfig& config, int total_steps,
                         const ActivationProfile* profile, const Rng& rng,
                         const PresetOptions& options = {});

}  // namespace fastpt
