#include "fastpt/partial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fastpt/vocab.hpp"

namespace fastpt {

std::string_view to_string(LayerStrategy s) { return s == LayerStrategy::uniform ? "uniform" : "last"; }

std::string_view to_string(NeuronStrategy s) {
  return s == NeuronStrategy::activation ? "activation" : "random";
}

LayerStrategy layer_strategy_from(std::string_view name) {
  if (name == "uniform") return LayerStrategy::uniform;
  if (name == "last") return LayerStrategy::last;
  throw std::invalid_argument("unknown layer strategy '" + std::string(name) + "'");
}

NeuronStrategy neuron_strategy_from(std::string_view name) {
  if (name == "activation") return NeuronStrategy::activation;
  if (name == "random") return NeuronStrategy::random;
  throw std::invalid_argument("unknown neuron strategy '" + std::string(name) + "'");
}

namespace {

void check_k(int L, int k) {
  if (L < 1 || k < 1 || k > L) {
    throw std::invalid_argument("layer selection needs 1 <= k <= L, got k=" + std::to_string(k) +
                                " L=" + std::to_string(L));
  }
}

}  // namespace

std::vector<int> select_layers_uniform(int L, int k) {
  check_k(L, k);
  if (k == 1) return {1};
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  // position = 1 + num / den with num = (i-1)(L-1), den = k-1; exact integer rounding
  const long den = k - 1;
  for (long i = 1; i <= k; ++i) {
    const long num = (i - 1) * (L - 1);
    long q = num / den;
    const long r = num % den;
    if (2 * r > den) ++q;  // strictly above one half rounds up, ties stay down
    out.push_back(static_cast<int>(1 + q));
  }
  return out;
}

std::vector<int> select_layers_last(int L, int k) {
  check_k(L, k);
  std::vector<int> out(static_cast<std::size_t>(k));
  std::iota(out.begin(), out.end(), 1);
  return out;
}

std::vector<int> select_layers(LayerStrategy s, int L, int k) {
  return s == LayerStrategy::uniform ? select_layers_uniform(L, k) : select_layers_last(L, k);
}

void ActivationProfile::validate(const ModelConfig& config) const {
  auto check = [&](const std::vector<std::vector<double>>& side, int layers, const char* name) {
    if (side.size() != static_cast<std::size_t>(layers)) {
      throw std::invalid_argument(std::string("activation profile: ") + name + " has " +
                                  std::to_string(side.size()) + " layers, model has " +
                                  std::to_string(layers));
    }
    for (const auto& s : side) {
      if (s.size() != static_cast<std::size_t>(config.d_ff)) {
        throw std::invalid_argument("activation profile: score vector length " +
                                    std::to_string(s.size()) + " != d_ff " +
                                    std::to_string(config.d_ff));
      }
      for (double v : s) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw std::invalid_argument("activation profile: scores must be finite and >= 0");
        }
      }
    }
  };
  check(encoder, config.enc_layers, "encoder");
  check(decoder, config.dec_layers, "decoder");
}

void accumulate_activation(const FfnWeights& w, const Tensor& x, std::vector<double>& scores) {
  const std::size_t f = w.w1.cols();
  if (scores.size() != f) throw std::invalid_argument("accumulate_activation: score length != d_ff");
  if (x.rank() != 2 || x.cols() != w.w1.rows()) {
    throw std::invalid_argument("accumulate_activation: input " + shape_str(x.shape()) +
                                " does not match W1 " + shape_str(w.w1.shape()));
  }
  if (x.rows() == 0) return;
  ad::Tape tape;
  const Tensor& h =
      ad::relu(ad::add_row(ad::matmul(tape.borrow(x), tape.borrow(w.w1)), tape.borrow(w.b1)))
          .value();
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const float* row = h.ptr() + r * f;
    for (std::size_t j = 0; j < f; ++j) scores[j] += std::fabs(static_cast<double>(row[j]));
  }
}

ActivationProfile profile_activations(const ModelWeights& weights,
                                      const std::vector<Example>& sample, Rng& rng,
                                      std::size_t batch_size) {
  if (sample.empty()) throw std::invalid_argument("profile_activations: empty sample");
  if (batch_size == 0) throw std::invalid_argument("profile_activations: batch_size must be >= 1");
  const ModelConfig& c = weights.config;
  const auto f = static_cast<std::size_t>(c.d_ff);
  const auto d = static_cast<std::size_t>(c.d_model);
  ActivationProfile prof;
  prof.encoder.assign(static_cast<std::size_t>(c.enc_layers), std::vector<double>(f, 0.0));
  prof.decoder.assign(static_cast<std::size_t>(c.dec_layers), std::vector<double>(f, 0.0));
  prof.sample_count = sample.size();
  prof.prompt_seed = rng.seed();
  const SoftPrompt prompt = init_prompt(c, rng);
  const std::size_t l = prompt.length();

  const ModelView view(weights, PartialSpec::identity(c));
  for (std::size_t start = 0; start < sample.size(); start += batch_size) {
    const std::size_t stop = std::min(sample.size(), start + batch_size);
    TokenBatch batch;
    std::vector<std::vector<int>> dec_inputs;
    for (std::size_t i = start; i < stop; ++i) {
      batch.examples.push_back(sample[i]);
      std::vector<int> in{vocab::kBos};
      in.insert(in.end(), sample[i].target.begin(), sample[i].target.end());
      dec_inputs.push_back(std::move(in));
    }
    ad::Tape tape;
    ModelGraph graph(tape, view);
    graph.capture_ffn_inputs = true;
    const auto enc = graph.encode(tape.borrow(prompt.values), batch);
    graph.decode_logits(enc, dec_inputs);

    std::size_t enc_i = 0;
    std::size_t dec_i = 0;
    for (const auto& [key, var] : graph.ffn_inputs) {
      const Tensor& x = var.value();
      if (key.rfind("enc.", 0) == 0) {
        std::size_t n_tokens = 0;
        for (const auto& e : batch.examples) n_tokens += e.input.size();
        Tensor tokens(Shape{n_tokens, d});
        std::size_t out_row = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const std::size_t n = batch.examples[b].input.size();
          std::copy_n(x.ptr() + (enc.offsets[b] + l) * d, n * d, tokens.ptr() + out_row * d);
          out_row += n;
        }
        accumulate_activation(weights.encoder[enc_i].ffn, tokens, prof.encoder[enc_i]);
        ++enc_i;
      } else {
        accumulate_activation(weights.decoder[dec_i].ffn, x, prof.decoder[dec_i]);
        ++dec_i;
      }
    }
  }
  return prof;
}

std::size_t kept_neurons(double keep_fraction, int d_ff) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw std::invalid_argument("keep fraction must lie in (0, 1], got " +
                                std::to_string(keep_fraction));
  }
  const double raw = keep_fraction * static_cast<double>(d_ff);
  // guard against 0.25 * 2816 landing a hair above 704 in floating point
  auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(keep, 1, static_cast<std::size_t>(d_ff));
}

int kept_layers(double depth_fraction, int L) {
  if (!(depth_fraction > 0.0) || depth_fraction > 1.0) {
    throw std::invalid_argument("depth fraction must lie in (0, 1], got " +
                                std::to_string(depth_fraction));
  }
  const auto k = static_cast<int>(std::lround(depth_fraction * L));
  return std::clamp(k, 1, L);
}

NeuronMask top_neurons(const std::vector<double>& scores, std::size_t keep) {
  if (keep > scores.size()) throw std::invalid_argument("top_neurons: keep exceeds neuron count");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  NeuronMask mask(scores.size(), 0);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
  return mask;
}

NeuronMask random_neurons(std::size_t d_ff, std::size_t keep, Rng rng) {
  if (keep > d_ff) throw std::invalid_argument("random_neurons: keep exceeds neuron count");
  std::vector<std::size_t> idx(d_ff);
  std::iota(idx.begin(), idx.end(), 0);
  NeuronMask mask(d_ff, 0);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + rng.index(d_ff - i);
    std::swap(idx[i], idx[j]);
    mask[idx[i]] = 1;
  }
  return mask;
}

LayerMasks select_neurons(const ActivationProfile* profile, const ModelConfig& config,
                          double keep_fraction, NeuronStrategy strategy, const Rng& rng) {
  const std::size_t keep = kept_neurons(keep_fraction, config.d_ff);
  const auto f = static_cast<std::size_t>(config.d_ff);
  LayerMasks out;
  if (keep == f) {
    out.encoder.assign(static_cast<std::size_t>(config.enc_layers), NeuronMask(f, 1));
    out.decoder.assign(static_cast<std::size_t>(config.dec_layers), NeuronMask(f, 1));
    return out;
  }
  if (strategy == NeuronStrategy::activation) {
    if (profile == nullptr) {
      throw std::invalid_argument("activation neuron strategy needs an activation profile");
    }
    profile->validate(config);
    for (const auto& s : profile->encoder) out.encoder.push_back(top_neurons(s, keep));
    for (const auto& s : profile->decoder) out.decoder.push_back(top_neurons(s, keep));
  } else {
    for (int i = 1; i <= config.enc_layers; ++i) {
      out.encoder.push_back(random_neurons(f, keep, rng.child("enc." + std::to_string(i))));
    }
    for (int i = 1; i <= config.dec_layers; ++i) {
      out.decoder.push_back(random_neurons(f, keep, rng.child("dec." + std::to_string(i))));
    }
  }
  return out;
}

PartialSpec make_partial_spec(const ModelConfig& config, const ReductionPlan& plan,
                              const ActivationProfile* profile, const Rng& rng) {
  config.validate();
  const int k_enc = kept_layers(plan.depth_fraction, config.enc_layers);
  const LayerMasks masks =
      select_neurons(profile, config, plan.width_fraction, plan.neuron_strategy, rng);
  const bool full_decoder = plan.decoder_policy == DecoderPolicy::retain_full;

  PartialSpec spec;
  spec.decoder_policy = plan.decoder_policy;
  spec.enc_layers = select_layers(plan.layer_strategy, config.enc_layers, k_enc);
  for (int i : spec.enc_layers) spec.enc_masks.push_back(masks.encoder[static_cast<std::size_t>(i - 1)]);
  if (full_decoder) {
    for (int i = 1; i <= config.dec_layers; ++i) spec.dec_layers.push_back(i);
    spec.dec_masks.assign(spec.dec_layers.size(), NeuronMask(static_cast<std::size_t>(config.d_ff), 1));
  } else {
    const int k_dec = kept_layers(plan.depth_fraction, config.dec_layers);
    spec.dec_layers = select_layers(plan.layer_strategy, config.dec_layers, k_dec);
    for (int i : spec.dec_layers) {
      spec.dec_masks.push_back(masks.decoder[static_cast<std::size_t>(i - 1)]);
    }
  }
  spec.validate(config);
  return spec;
}

bool is_subsumed(const PartialSpec& a, const PartialSpec& b, const ModelConfig& config) {
  a.validate(config);
  b.validate(config);
  auto side = [](const std::vector<int>& la, const std::vector<NeuronMask>& ma,
                 const std::vector<int>& lb, const std::vector<NeuronMask>& mb) {
    for (std::size_t i = 0; i < la.size(); ++i) {
      const auto it = std::find(lb.begin(), lb.end(), la[i]);
      if (it == lb.end()) return false;
      const NeuronMask& big = mb[static_cast<std::size_t>(it - lb.begin())];
      for (std::size_t j = 0; j < big.size(); ++j) {
        if (ma[i][j] > big[j]) return false;
      }
    }
    return true;
  };
  return side(a.enc_layers, a.enc_masks, b.enc_layers, b.enc_masks) &&
         side(a.dec_layers, a.dec_masks, b.dec_layers, b.dec_masks);
}

}  // namespace fastpt
