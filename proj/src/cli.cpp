#include "fastpt/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "fastpt/experiment.hpp"
#include "fastpt/io.hpp"

namespace fastpt {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::string backbone;
  std::string preset;
  std::string schedule;
  std::string runs;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> tasks;
  std::vector<double> boundaries{0.1, 0.3, 0.5, 0.8};
  std::optional<int> steps;
  bool dry_run = false;
  bool json = false;
};

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("FASTPT_SEED"); env != nullptr && *env != '\0') {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("FASTPT_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

std::vector<std::uint64_t> resolve_seeds(const Options& o) {
  if (!o.seeds.empty()) return o.seeds;
  return {resolve_seed(o)};
}

LabConfig lab_from(const Options& o) {
  LabConfig lab = load_lab_config(o.config);
  if (o.steps) lab.steps = *o.steps;
  return lab;
}

ModelWeights backbone_for(const Options& o, const LabConfig& lab, std::ostream& out) {
  if (!o.backbone.empty()) return load_backbone(o.backbone, lab.model);
  out << "pretraining backbone: " << lab.pretrain.steps << " steps, seed " << lab.pretrain.seed << "\n";
  return build_backbone(lab).weights;
}

Json run_config(const char* command, const LabConfig& lab, std::uint64_t seed,
                const std::string& backbone_digest, const std::string& schedule_source) {
  Json j = to_json(lab);
  j["hyper"]["seed"] = seed;
  return Json{{"command", command},
              {"seed", seed},
              {"schedule_source", schedule_source},
              {"backbone_sha256", backbone_digest},
              {"model", j["model"]},
              {"task", j["task"]},
              {"hyper", j["hyper"]},
              {"steps", lab.steps},
              {"profile_samples", lab.profile_samples},
              {"strategies", j["strategies"]},
              {"pretrain", j["pretrain"]}};
}

std::string weights_digest(const ModelWeights& w, const fs::path& scratch) {
  save_weights(scratch, w);
  const std::string d = sha256_file(scratch);
  fs::remove(scratch);
  return d;
}

void print_metrics(std::ostream& out, std::uint64_t seed, const TrainResult& r) {
  if (r.record.evals.empty()) return;
  const EvalPoint& e = r.record.evals.back();
  char buf[120];
  std::snprintf(buf, sizeof buf, "seed %llu: final em %.4f, dev loss %.4f, train steps %zu\n",
                static_cast<unsigned long long>(seed), e.em, e.loss, r.record.losses.size());
  out << buf;
}

Schedule cost_schedule(const Options& o, const LabConfig& lab) {
  // neuron identities do not change FLOPs, so random masks with the same
  // counts stand in when no profile exists
  if (!o.schedule.empty()) return schedule_from_json(Json::parse(read_text(o.schedule)));
  if (!o.preset.empty()) {
    PresetOptions po = lab.preset_options;
    po.neuron_strategy = NeuronStrategy::random;
    return preset_schedule(o.preset, lab.model, std::max(lab.steps, 10), nullptr, Rng(0, "cost"), po);
  }
  return identity_schedule(lab.model, std::max(lab.steps, 1));
}

void print_cost(std::ostream& out, const LabConfig& lab, const Schedule& s, bool json) {
  const TaskData data = gen_task(lab.task);
  const SeqProfile seq = seq_profile(data.train, lab.model.prompt_len);
  const CostReport rep = schedule_cost_from_specs(lab.model, s, seq);
  if (json) {
    out << Json{{"seq_profile", to_json(seq)}, {"report", to_json(rep)}}.dump(2) << "\n";
  } else {
    out << cost_report_csv(rep);
  }
}

int cmd_pretrain(const Options& o, std::ostream& out) {
  LabConfig lab = lab_from(o);
  if (o.seed || std::getenv("FASTPT_SEED") != nullptr) lab.pretrain.seed = resolve_seed(o);
  if (o.steps) lab.pretrain.steps = *o.steps;
  const PretrainResult r = build_backbone(lab);
  save_backbone(o.out, r.weights, r.losses);
  const Corpus held = gen_pretrain_corpus(lab.pretrain.grammar, 500, lab.pretrain.seed + 1);
  char buf[160];
  std::snprintf(buf, sizeof buf, "pretrained %d steps; held-out corpus loss %.4f (ln V = %.4f)\n",
                lab.pretrain.steps, corpus_loss(r.weights, held, lab.pretrain.seed),
                std::log(static_cast<double>(lab.model.vocab_size)));
  out << buf;
  return 0;
}

int cmd_train(const Options& o, bool progressive, std::ostream& out) {
  const LabConfig lab = lab_from(o);
  if (progressive && o.preset.empty() == o.schedule.empty()) {
    throw CLI::ValidationError("fpt", "give exactly one of --preset or --schedule");
  }
  if (o.dry_run) {
    print_cost(out, lab, progressive ? cost_schedule(o, lab) : identity_schedule(lab.model, std::max(lab.steps, 1)), o.json);
    return 0;
  }
  const ModelWeights weights = backbone_for(o, lab, out);
  const TaskData data = gen_task(lab.task);
  fs::create_directories(o.out);
  const std::string digest = weights_digest(weights, fs::path(o.out) / ".digest.tmp");
  for (std::uint64_t seed : resolve_seeds(o)) {
    Hyper h = lab.hyper;
    h.seed = seed;
    Schedule s;
    std::string source = "identity";
    if (!progressive) {
      s = identity_schedule(lab.model, lab.steps);
    } else if (!o.schedule.empty()) {
      s = schedule_from_json(Json::parse(read_text(o.schedule)));
      source = o.schedule;
    } else {
      source = o.preset;
      std::optional<ActivationProfile> prof;
      if (preset_needs_profile(o.preset)) prof = lab_profile(weights, lab, data, seed);
      s = preset_schedule(o.preset, lab.model, lab.steps, prof ? &*prof : nullptr, Rng(seed, "schedule"),
                          lab.preset_options);
    }
    const TrainResult r = progressive ? fpt_train(weights, s, data, h)
                                      : run_schedule(weights, s, initial_prompt(lab.model, seed), data, h);
    const fs::path dir = fs::path(o.out) / ("seed" + std::to_string(seed));
    save_run(dir, run_config(progressive ? "fpt" : "tune", lab, seed, digest, source), s, weights, r);
    print_metrics(out, seed, r);
  }
  return 0;
}

int cmd_profile(const Options& o, std::ostream& out) {
  const LabConfig lab = lab_from(o);
  const ModelWeights weights = backbone_for(o, lab, out);
  const TaskData data = gen_task(lab.task);
  const ActivationProfile p = lab_profile(weights, lab, data, resolve_seed(o));
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "profile.json", to_json(p).dump(1) + "\n");
  out << "profiled " << p.sample_count << " examples\n";
  return 0;
}

int cmd_flops(const Options& o, std::ostream& out) {
  if (!o.preset.empty() && !o.schedule.empty()) {
    throw CLI::ValidationError("flops", "give at most one of --preset or --schedule");
  }
  const LabConfig lab = lab_from(o);
  print_cost(out, lab, cost_schedule(o, lab), o.json);
  return 0;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const auto dirs = find_runs(o.runs);
  if (dirs.empty()) throw std::runtime_error("no run directories under " + o.runs);
  std::vector<LoadedRun> runs;
  std::vector<EmbeddingRow> rows;
  for (const auto& d : dirs) {
    const Json cfg = Json::parse(read_text(d / "config.json"));
    const ModelConfig mc = model_config_from_json(cfg.at("model"));
    LoadedRun r = load_run(d, mc);
    for (std::size_t i = 0; i < r.stage_prompts.size(); ++i) {
      const bool full = r.schedule.stages[i].spec.is_identity(mc);
      rows.push_back({r.task, full ? "full" : r.schedule.stages[i].label, r.seed,
                      mean_pool_prompt(r.stage_prompts[i])});
    }
    runs.push_back(std::move(r));
  }
  fs::create_directories(o.out);
  export_embeddings(fs::path(o.out) / "embeddings.csv", rows);

  std::uint64_t seed = runs.front().seed;
  if (o.seed) seed = *o.seed;
  std::map<std::string, PromptSet> partial;
  std::map<std::string, SoftPrompt> full;
  for (const LoadedRun& r : runs) {
    if (r.seed != seed) continue;
    const Json cfg = Json::parse(read_text(r.dir / "config.json"));
    const ModelConfig mc = model_config_from_json(cfg.at("model"));
    PromptSet& set = partial[r.task];
    set.task = r.task;
    for (std::size_t i = 0; i < r.stage_prompts.size(); ++i) {
      const bool is_full = r.schedule.stages[i].spec.is_identity(mc);
      set.entries.push_back({r.schedule.stages[i].label, r.stage_prompts[i], is_full});
      if (is_full) full[r.task] = r.stage_prompts[i];
    }
  }
  const SimilarityMatrix m = prompt_similarity(partial, full);
  write_similarity_csv(fs::path(o.out) / "similarity.csv", m);
  out << "runs: " << runs.size() << ", embedding rows: " << rows.size() << ", seed " << seed
      << ", diagonal wins " << m.diagonal_wins() << "/" << m.rows.size() << "\n";
  return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const LabConfig base = lab_from(o);
  const ModelWeights weights = backbone_for(o, base, out);
  std::vector<std::string> tasks = o.tasks;
  if (tasks.empty()) tasks.emplace_back(to_string(base.task.kind));
  std::vector<AblationRun> runs;
  for (const std::string& t : tasks) {
    LabConfig lab = base;
    lab.task.kind = task_kind_from(t);
    const TaskData data = gen_task(lab.task);
    for (std::uint64_t seed : resolve_seeds(o)) {
      const ActivationProfile prof = lab_profile(weights, lab, data, seed);
      for (const AblationArm& arm : default_ablation_arms()) {
        runs.push_back(run_ablation_arm(weights, lab, data, prof, arm, seed));
        out << t << " " << arm.strategy << " seed " << seed << ": em " << runs.back().em << "\n";
      }
    }
  }
  const AblationReport rep = ablation_report(runs, default_ablation_pairs());
  fs::create_directories(o.out);
  write_ablation_csv(fs::path(o.out) / "ablation.csv", rep);
  for (const auto& c : rep.comparisons) {
    out << c.task << ": " << c.first << " - " << c.second << " = " << c.mean_difference
        << (c.direction_holds ? " (expected direction)" : " (direction reversed)") << "\n";
  }
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const LabConfig lab = lab_from(o);
  const std::string preset = o.preset.empty() ? "cr-4stage" : o.preset;
  const ModelWeights weights = backbone_for(o, lab, out);
  const TaskData data = gen_task(lab.task);
  std::string csv = "boundary,seed,em\n";
  std::map<double, std::vector<double>> by_boundary;
  char buf[96];
  for (std::uint64_t seed : resolve_seeds(o)) {
    std::optional<ActivationProfile> prof;
    if (preset_needs_profile(preset)) prof = lab_profile(weights, lab, data, seed);
    for (double b : o.boundaries) {
      const Schedule s = boundary_schedule(preset, lab.model, lab.steps, b, prof ? &*prof : nullptr,
                                           Rng(seed, "schedule"), lab.preset_options);
      Hyper h = lab.hyper;
      h.seed = seed;
      h.eval_every = 0;
      const TrainResult r = fpt_train(weights, s, data, h);
      const double em = r.record.evals.back().em;
      by_boundary[b].push_back(em);
      std::snprintf(buf, sizeof buf, "%.4f,%llu,%.6f\n", b, static_cast<unsigned long long>(seed), em);
      csv += buf;
    }
  }
  for (const auto& [b, ems] : by_boundary) {
    double mean = 0.0;
    for (double e : ems) mean += e;
    mean /= static_cast<double>(ems.size());
    std::snprintf(buf, sizeof buf, "%.4f,mean,%.6f\n", b, mean);
    csv += buf;
    out << buf;
  }
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "sweep.csv", csv);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fastpt: prompt tuning and progressive prompt tuning on a tiny frozen transformer", "fastpt"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "lab config (JSON)")->required()->check(CLI::ExistingFile); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory")->required(); };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "random seed (default: FASTPT_SEED or 0)"); };
  auto add_seeds = [&](CLI::App* c) { c->add_option("--seeds", o.seeds, "comma-separated seed list")->delimiter(','); };
  auto add_backbone = [&](CLI::App* c) { c->add_option("--backbone", o.backbone, "directory written by `fastpt pretrain`")->check(CLI::ExistingDirectory); };
  auto add_steps = [&](CLI::App* c) { c->add_option("--steps", o.steps, "override the configured step count")->check(CLI::NonNegativeNumber); };

  CLI::App* pre = app.add_subcommand("pretrain", "train a backbone on the synthetic corpus");
  add_config(pre); add_out(pre); add_seed(pre); add_steps(pre);

  CLI::App* tune = app.add_subcommand("tune", "vanilla prompt tuning on the full model");
  add_config(tune); add_out(tune); add_seed(tune); add_seeds(tune); add_backbone(tune); add_steps(tune);
  tune->add_flag("--dry-run", o.dry_run, "validate and print the cost report only");
  tune->add_flag("--json", o.json, "cost report as JSON");

  CLI::App* fpt = app.add_subcommand("fpt", "progressive prompt tuning over a schedule");
  add_config(fpt); add_out(fpt); add_seed(fpt); add_seeds(fpt); add_backbone(fpt); add_steps(fpt);
  fpt->add_option("--preset", o.preset, "ld-4stage, fr-4stage, cr-4stage or ld-2stage")->check(CLI::IsMember(preset_names()));
  fpt->add_option("--schedule", o.schedule, "schedule JSON")->check(CLI::ExistingFile);
  fpt->add_flag("--dry-run", o.dry_run, "validate and print the cost report only");
  fpt->add_flag("--json", o.json, "cost report as JSON");

  CLI::App* prof = app.add_subcommand("profile", "activation scores of every FFN neuron");
  add_config(prof); add_out(prof); add_seed(prof); add_backbone(prof);

  CLI::App* flops = app.add_subcommand("flops", "modeled FLOPs of a schedule");
  add_config(flops); add_steps(flops);
  flops->add_option("--preset", o.preset, "schedule preset")->check(CLI::IsMember(preset_names()));
  flops->add_option("--schedule", o.schedule, "schedule JSON")->check(CLI::ExistingFile);
  flops->add_flag("--json", o.json, "JSON instead of CSV");

  CLI::App* an = app.add_subcommand("analyze", "prompt similarity and embedding export");
  an->add_option("--runs", o.runs, "directory containing run directories")->required()->check(CLI::ExistingDirectory);
  add_out(an);
  an->add_option("--seed", o.seed, "seed whose runs form the similarity matrix (default: first found)");

  CLI::App* ab = app.add_subcommand("ablate", "layer and neuron selection strategy comparison");
  add_config(ab); add_out(ab); add_seed(ab); add_seeds(ab); add_backbone(ab); add_steps(ab);
  ab->add_option("--tasks", o.tasks, "comma-separated task kinds")->delimiter(',');

  CLI::App* sw = app.add_subcommand("sweep-stages", "move the final expansion boundary");
  add_config(sw); add_out(sw); add_seed(sw); add_seeds(sw); add_backbone(sw); add_steps(sw);
  sw->add_option("--preset", o.preset, "schedule preset (default cr-4stage)")->check(CLI::IsMember(preset_names()));
  sw->add_option("--boundaries", o.boundaries, "comma-separated boundary fractions")->delimiter(',');

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const CLI::App* sub : app.get_subcommands({})) known = known || sub->check_name(argv[1]);
    if (!known) {
      err << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
      return 1;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(o, out);
    if (tune->parsed()) return cmd_train(o, false, out);
    if (fpt->parsed()) return cmd_train(o, true, out);
    if (prof->parsed()) return cmd_profile(o, out);
    if (flops->parsed()) return cmd_flops(o, out);
    if (an->parsed()) return cmd_analyze(o, out);
    if (ab->parsed()) return cmd_ablate(o, out);
    if (sw->parsed()) return cmd_sweep(o, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace fastpt
