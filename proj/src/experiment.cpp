#include "fastpt/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fastpt/io.hpp"

namespace fastpt {
namespace {

template <class T>
void get_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string fmt(const char* f, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

Json to_json(const LabConfig& c) {
  const auto& g = c.pretrain.grammar;
  return Json{
      {"model", to_json(c.model)},
      {"task", to_json(c.task)},
      {"hyper", to_json(c.hyper)},
      {"steps", c.steps},
      {"profile_samples", c.profile_samples},
      {"strategies",
       Json{{"layer", std::string(to_string(c.preset_options.layer_strategy))},
            {"neuron", std::string(to_string(c.preset_options.neuron_strategy))},
            {"decoder_policy", std::string(to_string(c.preset_options.decoder_policy))}}},
      {"pretrain",
       Json{{"steps", c.pretrain.steps},
            {"corpus_size", c.pretrain.corpus_size},
            {"batch_size", c.pretrain.batch_size},
            {"learning_rate", c.pretrain.learning_rate},
            {"optimizer", std::string(to_string(c.pretrain.optimizer))},
            {"shift_prob", c.pretrain.shift_prob},
            {"seed", c.pretrain.seed},
            {"grammar", Json{{"min_len", g.min_len},
                             {"max_len", g.max_len},
                             {"successors", g.successors},
                             {"zipf_power", g.zipf_power}}}}}};
}

LabConfig lab_config_from_json(const Json& j) {
  LabConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  Json task = j.value("task", Json::object());
  if (!task.contains("vocab_size")) task["vocab_size"] = c.model.vocab_size;
  c.task = task_spec_from_json(task);
  if (j.contains("hyper")) c.hyper = hyper_from_json(j.at("hyper"));
  get_opt(j, "steps", c.steps);
  get_opt(j, "profile_samples", c.profile_samples);
  if (j.contains("strategies")) {
    const Json& s = j.at("strategies");
    if (s.contains("layer")) c.preset_options.layer_strategy = layer_strategy_from(s.at("layer").get<std::string>());
    if (s.contains("neuron")) c.preset_options.neuron_strategy = neuron_strategy_from(s.at("neuron").get<std::string>());
    if (s.contains("decoder_policy")) {
      c.preset_options.decoder_policy = decoder_policy_from(s.at("decoder_policy").get<std::string>());
    }
  }
  if (j.contains("pretrain")) {
    const Json& p = j.at("pretrain");
    get_opt(p, "steps", c.pretrain.steps);
    get_opt(p, "corpus_size", c.pretrain.corpus_size);
    get_opt(p, "batch_size", c.pretrain.batch_size);
    get_opt(p, "learning_rate", c.pretrain.learning_rate);
    if (p.contains("optimizer")) c.pretrain.optimizer = optimizer_kind_from(p.at("optimizer").get<std::string>());
    get_opt(p, "shift_prob", c.pretrain.shift_prob);
    get_opt(p, "seed", c.pretrain.seed);
    if (p.contains("grammar")) {
      const Json& g = p.at("grammar");
      get_opt(g, "min_len", c.pretrain.grammar.min_len);
      get_opt(g, "max_len", c.pretrain.grammar.max_len);
      get_opt(g, "successors", c.pretrain.grammar.successors);
      get_opt(g, "zipf_power", c.pretrain.grammar.zipf_power);
    }
  }
  c.pretrain.grammar.vocab_size = c.model.vocab_size;
  if (c.task.vocab_size != c.model.vocab_size) {
    throw std::invalid_argument("task.vocab_size differs from model.vocab_size");
  }
  if (c.steps < 0 || c.profile_samples < 1 || c.pretrain.steps < 0 || c.pretrain.corpus_size < 1) {
    throw std::invalid_argument("lab config: steps must be >= 0 and sample sizes >= 1");
  }
  return c;
}

LabConfig load_lab_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return lab_config_from_json(j);
}

PretrainResult build_backbone(const LabConfig& lab) {
  const Corpus corpus = gen_pretrain_corpus(lab.pretrain.grammar,
                                            static_cast<std::size_t>(lab.pretrain.corpus_size),
                                            lab.pretrain.seed);
  Hyper h;
  h.learning_rate = lab.pretrain.learning_rate;
  h.batch_size = lab.pretrain.batch_size;
  h.optimizer = lab.pretrain.optimizer;
  h.seed = lab.pretrain.seed;
  return pretrain(lab.model, corpus, lab.pretrain.steps, h, lab.pretrain.shift_prob);
}

ModelWeights load_backbone(const std::filesystem::path& dir, const ModelConfig& expected) {
  const Json j = Json::parse(read_text(dir / "config.json"));
  const ModelConfig c = model_config_from_json(j.contains("model") ? j.at("model") : j);
  if (!(c == expected)) {
    throw std::invalid_argument("backbone " + dir.string() + " was built for a different model config");
  }
  return load_weights(dir / "weights.bin", c);
}

void save_backbone(const std::filesystem::path& dir, const ModelWeights& weights,
                   const std::vector<float>& losses) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", Json{{"model", to_json(weights.config)}}.dump(2) + "\n");
  save_weights(dir / "weights.bin", weights);
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    csv += std::to_string(i + 1) + "," + fmt("%.9g", losses[i]) + "\n";
  }
  write_text(dir / "pretrain.csv", csv);
}

ActivationProfile lab_profile(const ModelWeights& weights, const LabConfig& lab,
                              const TaskData& data, std::uint64_t seed) {
  const std::size_t n = std::min(data.train.size(), static_cast<std::size_t>(lab.profile_samples));
  const std::vector<Example> sample(data.train.begin(), data.train.begin() + static_cast<std::ptrdiff_t>(n));
  Rng rng(seed, "profile");
  return profile_activations(weights, sample, rng);
}

void save_run(const std::filesystem::path& dir, const Json& config, const Schedule& schedule,
              const ModelWeights& weights, const TrainResult& result) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", config.dump(2) + "\n");
  write_text(dir / "schedule.json", to_json(schedule).dump(2) + "\n");
  save_weights(dir / "weights.bin", weights);
  save_prompt(dir / "prompt.bin", result.prompt);
  for (std::size_t i = 0; i < result.record.stage_prompts.size(); ++i) {
    save_prompt(dir / ("prompt_stage" + std::to_string(i + 1) + ".bin"), result.record.stage_prompts[i]);
  }
  const RunRecord& r = result.record;
  std::string rec = "step,stage,loss,cum_flops\n";
  for (std::size_t i = 0; i < r.losses.size(); ++i) {
    rec += std::to_string(i + 1) + "," + std::to_string(r.stage_of_step[i]) + "," +
           fmt("%.9g", r.losses[i]) + "," + fmt("%.17g", r.cum_flops[i]) + "\n";
  }
  write_text(dir / "record.csv", rec);
  std::string met = "step,em,loss\n";
  for (const EvalPoint& e : r.evals) {
    met += std::to_string(e.step) + "," + fmt("%.6f", e.em) + "," + fmt("%.9g", e.loss) + "\n";
  }
  write_text(dir / "metrics.csv", met);
}

LoadedRun load_run(const std::filesystem::path& dir, const ModelConfig& config) {
  LoadedRun run;
  run.dir = dir;
  const Json cfg = Json::parse(read_text(dir / "config.json"));
  run.task = cfg.at("task").at("kind").get<std::string>();
  run.seed = cfg.value("seed", std::uint64_t{0});
  run.schedule = schedule_from_json(Json::parse(read_text(dir / "schedule.json")));
  run.schedule.validate(config, false);
  for (std::size_t i = 0; i < run.schedule.stages.size(); ++i) {
    run.stage_prompts.push_back(load_prompt(dir / ("prompt_stage" + std::to_string(i + 1) + ".bin")));
  }
  return run;
}

std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (std::filesystem::exists(root / "schedule.json")) out.push_back(root);
  if (std::filesystem::is_directory(root)) {
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
      if (e.is_directory() && std::filesystem::exists(e.path() / "schedule.json")) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Schedule boundary_schedule(std::string_view preset, const ModelConfig& config, int total_steps,
                           double boundary, const ActivationProfile* profile, const Rng& rng,
                           const PresetOptions& options) {
  if (!(boundary > 0.0) || !(boundary < 1.0)) {
    throw std::invalid_argument("stage boundary must lie strictly between 0 and 1");
  }
  PresetDefinition def = preset_definition(preset, options);
  const std::size_t n = def.plans.size();
  for (std::size_t i = 0; i + 1 < n; ++i) def.step_fractions[i] = boundary / static_cast<double>(n - 1);
  def.step_fractions[n - 1] = 1.0 - boundary;
  Schedule s = make_schedule(config, def.plans, def.step_fractions, total_steps, profile, rng);
  s.validate(config);
  return s;
}

std::vector<AblationArm> default_ablation_arms() {
  ReductionPlan width;
  width.width_fraction = 0.25;
  ReductionPlan depth;
  depth.depth_fraction = 0.5;
  std::vector<AblationArm> arms{{"activation", width}, {"random", width}, {"uniform", depth}, {"last", depth}};
  arms[1].plan.neuron_strategy = NeuronStrategy::random;
  arms[3].plan.layer_strategy = LayerStrategy::last;
  return arms;
}

const std::vector<std::pair<std::string, std::string>>& default_ablation_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs{{"activation", "random"},
                                                                      {"uniform", "last"}};
  return pairs;
}

AblationRun run_ablation_arm(const ModelWeights& weights, const LabConfig& lab,
                             const TaskData& data, const ActivationProfile& profile,
                             const AblationArm& arm, std::uint64_t seed) {
  const PartialSpec spec = make_partial_spec(weights.config, arm.plan, &profile, Rng(seed, "ablation-masks"));
  Hyper h = lab.hyper;
  h.seed = seed;
  h.eval_every = 0;
  const TrainResult r = pt_train(weights, spec, initial_prompt(weights.config, seed), data, lab.steps, h);
  const Metrics m = evaluate(weights, spec, &r.prompt, data.dev);
  return {std::string(to_string(lab.task.kind)), arm.strategy, seed, m.em};
}

}  // namespace fastpt
