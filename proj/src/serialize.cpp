#include "fastpt/serialize.hpp"

#include <stdexcept>
#include <string>

namespace fastpt {
namespace {

// Reads an optional field, keeping the default when absent.
template <class T>
void get_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json mask_json(const NeuronMask& m) {
  std::string bits;
  bits.reserve(m.size());
  for (std::uint8_t b : m) bits.push_back(b != 0 ? '1' : '0');
  return bits;
}

NeuronMask mask_from(const Json& j) {
  const auto bits = j.get<std::string>();
  NeuronMask m;
  m.reserve(bits.size());
  for (char ch : bits) {
    if (ch != '0' && ch != '1') throw std::invalid_argument("neuron mask must be a string of 0/1");
    m.push_back(ch == '1' ? 1 : 0);
  }
  return m;
}

}  // namespace

Json to_json(const ModelConfig& c) {
  return Json{{"enc_layers", c.enc_layers}, {"dec_layers", c.dec_layers}, {"d_model", c.d_model},
              {"d_ff", c.d_ff},             {"n_heads", c.n_heads},       {"vocab_size", c.vocab_size},
              {"prompt_len", c.prompt_len}, {"max_len", c.max_len},       {"init_scale", c.init_scale},
              {"embed_std", c.embed_std}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  get_opt(j, "enc_layers", c.enc_layers);
  get_opt(j, "dec_layers", c.dec_layers);
  get_opt(j, "d_model", c.d_model);
  get_opt(j, "d_ff", c.d_ff);
  get_opt(j, "n_heads", c.n_heads);
  get_opt(j, "vocab_size", c.vocab_size);
  get_opt(j, "prompt_len", c.prompt_len);
  get_opt(j, "max_len", c.max_len);
  get_opt(j, "init_scale", c.init_scale);
  get_opt(j, "embed_std", c.embed_std);
  c.validate();
  return c;
}

Json to_json(const TaskSpec& t) {
  return Json{{"kind", std::string(to_string(t.kind))},
              {"vocab_size", t.vocab_size},
              {"min_len", t.min_len},
              {"max_len", t.max_len},
              {"train_size", t.train_size},
              {"dev_size", t.dev_size},
              {"modulus", t.modulus},
              {"seed", t.seed}};
}

TaskSpec task_spec_from_json(const Json& j) {
  TaskSpec t;
  if (j.contains("kind")) t.kind = task_kind_from(j.at("kind").get<std::string>());
  get_opt(j, "vocab_size", t.vocab_size);
  get_opt(j, "min_len", t.min_len);
  get_opt(j, "max_len", t.max_len);
  get_opt(j, "train_size", t.train_size);
  get_opt(j, "dev_size", t.dev_size);
  get_opt(j, "modulus", t.modulus);
  get_opt(j, "seed", t.seed);
  t.validate();
  return t;
}

Json to_json(const Hyper& h) {
  return Json{{"learning_rate", h.learning_rate},
              {"batch_size", h.batch_size},
              {"optimizer", std::string(to_string(h.optimizer))},
              {"eval_every", h.eval_every},
              {"seed", h.seed},
              {"reset_optimizer", h.reset_optimizer}};
}

Hyper hyper_from_json(const Json& j) {
  Hyper h;
  get_opt(j, "learning_rate", h.learning_rate);
  get_opt(j, "batch_size", h.batch_size);
  if (j.contains("optimizer")) h.optimizer = optimizer_kind_from(j.at("optimizer").get<std::string>());
  get_opt(j, "eval_every", h.eval_every);
  get_opt(j, "seed", h.seed);
  get_opt(j, "reset_optimizer", h.reset_optimizer);
  h.validate();
  return h;
}

Json to_json(const PartialSpec& s) {
  Json enc = Json::array();
  for (std::size_t i = 0; i < s.enc_layers.size(); ++i) {
    enc.push_back(Json{{"layer", s.enc_layers[i]}, {"mask", mask_json(s.enc_masks[i])}});
  }
  Json dec = Json::array();
  for (std::size_t i = 0; i < s.dec_layers.size(); ++i) {
    dec.push_back(Json{{"layer", s.dec_layers[i]}, {"mask", mask_json(s.dec_masks[i])}});
  }
  return Json{{"decoder_policy", std::string(to_string(s.decoder_policy))},
              {"encoder", enc},
              {"decoder", dec}};
}

PartialSpec partial_spec_from_json(const Json& j) {
  PartialSpec s;
  if (j.contains("decoder_policy")) {
    s.decoder_policy = decoder_policy_from(j.at("decoder_policy").get<std::string>());
  }
  for (const Json& e : j.at("encoder")) {
    s.enc_layers.push_back(e.at("layer").get<int>());
    s.enc_masks.push_back(mask_from(e.at("mask")));
  }
  for (const Json& e : j.at("decoder")) {
    s.dec_layers.push_back(e.at("layer").get<int>());
    s.dec_masks.push_back(mask_from(e.at("mask")));
  }
  return s;
}

Json to_json(const Schedule& s) {
  Json stages = Json::array();
  for (const Stage& st : s.stages) {
    stages.push_back(Json{{"label", st.label}, {"steps", st.steps}, {"spec", to_json(st.spec)}});
  }
  return Json{{"total_steps", s.total_steps()}, {"stages", stages}};
}

Schedule schedule_from_json(const Json& j) {
  Schedule s;
  for (const Json& e : j.at("stages")) {
    Stage st;
    get_opt(e, "label", st.label);
    st.steps = e.at("steps").get<int>();
    st.spec = partial_spec_from_json(e.at("spec"));
    s.stages.push_back(std::move(st));
  }
  return s;
}

Json to_json(const ActivationProfile& p) {
  Json enc = Json::object();
  for (std::size_t i = 0; i < p.encoder.size(); ++i) enc[std::to_string(i + 1)] = p.encoder[i];
  Json dec = Json::object();
  for (std::size_t i = 0; i < p.decoder.size(); ++i) dec[std::to_string(i + 1)] = p.decoder[i];
  return Json{{"sample_count", p.sample_count},
              {"prompt_seed", p.prompt_seed},
              {"encoder", enc},
              {"decoder", dec}};
}

ActivationProfile activation_profile_from_json(const Json& j) {
  ActivationProfile p;
  get_opt(j, "sample_count", p.sample_count);
  get_opt(j, "prompt_seed", p.prompt_seed);
  auto side = [](const Json& obj, std::vector<std::vector<double>>& out) {
    out.resize(obj.size());
    for (const auto& [key, scores] : obj.items()) {
      const int idx = std::stoi(key);
      if (idx < 1 || static_cast<std::size_t>(idx) > out.size()) {
        throw std::invalid_argument("activation profile: layer key '" + key + "' out of range");
      }
      out[static_cast<std::size_t>(idx - 1)] = scores.get<std::vector<double>>();
    }
  };
  side(j.at("encoder"), p.encoder);
  side(j.at("decoder"), p.decoder);
  return p;
}

Json to_json(const SeqProfile& s) {
  return Json{{"n_in", s.n_in}, {"n_out", s.n_out}, {"prompt_len", s.prompt_len}};
}

Json to_json(const CostReport& r) {
  Json stages = Json::array();
  for (std::size_t i = 0; i < r.stage_relative.size(); ++i) {
    stages.push_back(Json{{"steps", r.stage_steps[i]},
                          {"step_fraction", r.step_fractions[i]},
                          {"step_flops", r.stage_step_flops[i]},
                          {"relative", r.stage_relative[i]}});
  }
  return Json{{"full_step_flops", r.full_step_flops},
              {"stages", stages},
              {"weighted_relative", r.weighted_relative}};
}

}  // namespace fastpt
