#pragma once

// Building partial models: layer selection, activation profiling, neuron
// selection and their composition into a PartialSpec.

#include <cstdint>
#include <string_view>
#include <vector>

#include "fastpt/model.hpp"
#include "fastpt/partial_spec.hpp"
#include "fastpt/rng.hpp"

namespace fastpt {

enum class LayerStrategy { uniform, last };
enum class NeuronStrategy { activation, random };

std::string_view to_string(LayerStrategy s);
std::string_view to_string(NeuronStrategy s);
LayerStrategy layer_strategy_from(std::string_view name);
NeuronStrategy neuron_strategy_from(std::string_view name);

/// round(1 + (i-1)(L-1)/(k-1)) for i = 1..k, halves rounded down.
std::vector<int> select_layers_uniform(int L, int k);
/// {1, ..., k}
std::vector<int> select_layers_last(int L, int k);
std::vector<int> select_layers(LayerStrategy s, int L, int k);

/// Sum over tokens of |relu(x W1 + b1)| per neuron, for every FFN layer.
struct ActivationProfile {
  std::vector<std::vector<double>> encoder;  // [enc layer][neuron]
  std::vector<std::vector<double>> decoder;  // [dec layer][neuron]
  std::size_t sample_count = 0;
  std::uint64_t prompt_seed = 0;

  void validate(const ModelConfig& config) const;
  friend bool operator==(const ActivationProfile&, const ActivationProfile&) = default;
};

/// Adds |relu(x W1 + b1)| of every row of x to scores, rows in ascending order.
void accumulate_activation(const FfnWeights& w, const Tensor& x, std::vector<double>& scores);

/// Full model, freshly initialised prompt drawn from rng. Encoder scores
/// cover the input-token positions (prompt rows excluded); decoder scores
/// cover the teacher-forced decoder positions.
ActivationProfile profile_activations(const ModelWeights& weights,
                                      const std::vector<Example>& sample, Rng& rng,
                                      std::size_t batch_size = 32);

/// Number of neurons kept at a width fraction: ceil(fraction * d_ff).
std::size_t kept_neurons(double keep_fraction, int d_ff);
/// Number of layers kept at a depth fraction: round(fraction * L), at least 1.
int kept_layers(double depth_fraction, int L);

/// Highest scores win; equal scores go to the lower index.
NeuronMask top_neurons(const std::vector<double>& scores, std::size_t keep);
NeuronMask random_neurons(std::size_t d_ff, std::size_t keep, Rng rng);

struct LayerMasks {
  std::vector<NeuronMask> encoder;  // one per original encoder layer
  std::vector<NeuronMask> decoder;
};

/// profile is only read by the activation strategy.
LayerMasks select_neurons(const ActivationProfile* profile, const ModelConfig& config,
                          double keep_fraction, NeuronStrategy strategy, const Rng& rng);

struct ReductionPlan {
  double depth_fraction = 1.0;
  double width_fraction = 1.0;
  LayerStrategy layer_strategy = LayerStrategy::uniform;
  NeuronStrategy neuron_strategy = NeuronStrategy::activation;
  DecoderPolicy decoder_policy = DecoderPolicy::reduce;
};

PartialSpec make_partial_spec(const ModelConfig& config, const ReductionPlan& plan,
                              const ActivationProfile* profile, const Rng& rng);

/// a's layers are a subset of b's and each shared mask of a is <= b's.
bool is_subsumed(const PartialSpec& a, const PartialSpec& b, const ModelConfig& config);

}  // namespace fastpt
