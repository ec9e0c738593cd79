// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails. Reports land in FASTPT_ACCEPTANCE_OUT.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fastpt/analysis.hpp"
#include "fastpt/cost.hpp"
#include "fastpt/experiment.hpp"
#include "fastpt/io.hpp"
#include "fastpt/partial.hpp"
#include "fastpt/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/lab.hpp"

using namespace fastpt;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 5;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

class Suite {
 public:
  void run(const std::string& id, const std::string& title, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << id << " " << title << ": " << v.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
    failures_ += v.pass ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::vector<std::pair<std::string, std::string>> tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), sha256_file(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string weights_digest(const ModelWeights& w, const fs::path& scratch) {
  save_weights(scratch, w);
  std::string d = sha256_file(scratch);
  fs::remove(scratch);
  return d;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v, const char* f = "%.3f") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s;
}

}  // namespace

int main() {
  const fs::path out_dir = FASTPT_ACCEPTANCE_OUT;
  fs::create_directories(out_dir);
  Suite suite;

  suite.run("C1", "schedule-cost arithmetic", [] {
    const std::vector<double> fr{0.2, 0.2, 0.2, 0.4};
    const double ld = schedule_relative_cost(std::vector<double>{0.30, 0.54, 0.77, 1.00}, fr);
    const double fw = schedule_relative_cost(std::vector<double>{0.58, 0.72, 0.86, 1.00}, fr);
    const double cr = schedule_relative_cost(std::vector<double>{0.20, 0.40, 0.66, 1.00}, fr);
    const bool ok = std::fabs(ld - 0.722) <= 0.005 && std::fabs(fw - 0.832) <= 0.005 && std::fabs(cr - 0.652) <= 0.005 &&
                    std::fabs(ld - 0.72) <= 0.005 + 1e-12 && std::fabs(fw - 0.83) <= 0.005 + 1e-12 &&
                    std::fabs(cr - 0.65) <= 0.005 + 1e-12;
    return Verdict{ok, "LD " + fmt("%.4f", ld) + ", FR " + fmt("%.4f", fw) + ", CR " + fmt("%.4f", cr) +
                           " (want 0.722/0.832/0.652 +-0.005)"};
  });

  suite.run("C2", "layer-selection oracle", [] {
    bool ok = select_layers_uniform(24, 3) == std::vector<int>{1, 12, 24};
    int checked = 0;
    for (int L = 1; L <= 32; ++L) {
      for (int k = 1; k <= L; ++k) {
        const auto s = select_layers_uniform(L, k);
        ok = ok && static_cast<int>(s.size()) == k && std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end();
        ok = ok && s.front() >= 1 && s.back() <= L;
        if (k >= 2) ok = ok && s.front() == 1 && s.back() == L;
        ++checked;
      }
    }
    return Verdict{ok, "select_layers_uniform(24,3) = {1,12,24}; " + std::to_string(checked) +
                           " (L,k) pairs distinct, monotone, endpoints kept"};
  });

  suite.run("C3", "gradient correctness", [] {
    Rng rng(3, "acceptance-gradients");
    double worst_prim = 0.0;
    std::string worst_name;
    double worst_prompt = 0.0;
    for (int t = 0; t < 20; ++t) {
      for (const auto& r : gradcheck::primitive_trial(rng)) {
        if (r.error > worst_prim) {
          worst_prim = r.error;
          worst_name = r.name;
        }
      }
      worst_prompt = std::max(worst_prompt, gradcheck::prompt_gradient_error(rng));
    }
    return Verdict{worst_prim < gradcheck::kTol && worst_prompt < gradcheck::kTol,
                   "20 trials; worst primitive rel err " + fmt("%.2e", worst_prim) + " (" + worst_name +
                       "), prompt path " + fmt("%.2e", worst_prompt) + " (tol 1e-4, floor 1e-2)"};
  });

  suite.run("C4", "masking equivalence", [] {
    Rng rng(4, "acceptance-mask");
    int same = 0;
    for (int t = 0; t < 50; ++t) same += gradcheck::mask_matches_shrink(rng) ? 1 : 0;
    return Verdict{same == 50, std::to_string(same) + "/50 instances bit-identical"};
  });

  const LabConfig lab = lab::desk_config();
  const ModelWeights weights = lab::cached_backbone(lab, std::cout);
  const TaskData copy = gen_task(lab.task);
  const std::string digest0 = weights_digest(weights, out_dir / "digest.tmp");

  // shared by C6 and C7
  std::vector<TrainResult> pt_runs, fpt_runs;
  std::vector<Schedule> fpt_schedules;
  std::vector<double> fpt_costs;
  bool c6_ran = false;

  suite.run("C5", "frozen backbone and determinism", [&] {
    Hyper h = lab.hyper;
    h.seed = 11;
    const ActivationProfile prof = lab_profile(weights, lab, copy, 11);
    const Schedule s = preset_schedule("cr-4stage", lab.model, 200, &prof, Rng(11, "schedule"), lab.preset_options);
    const Json cfg{{"seed", 11}, {"preset", "cr-4stage"}, {"steps", 200}};
    for (const char* name : {"run_a", "run_b"}) {
      fs::remove_all(out_dir / name);
      save_run(out_dir / name, cfg, s, weights, fpt_train(weights, s, copy, h));
    }
    (void)pt_train(weights, PartialSpec::identity(lab.model), initial_prompt(lab.model, 11), copy, 200, h);
    const auto a = tree(out_dir / "run_a"), b = tree(out_dir / "run_b");
    const bool same = a == b && !a.empty();
    const bool frozen = weights_digest(weights, out_dir / "digest.tmp") == digest0;
    return Verdict{frozen && same, "backbone sha256 " + digest0.substr(0, 12) + " unchanged after pt_train and fpt_train: " +
                                       (frozen ? "yes" : "no") + "; repeated seed gives " + std::to_string(a.size()) +
                                       " byte-identical files: " + (same ? "yes" : "no")};
  });

  suite.run("C6", "FPT end-to-end on copy", [&] {
    std::vector<double> pt_em, fpt_em;
    for (int s = 0; s < kSeeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(s);
      Hyper h = lab.hyper;
      h.seed = seed;
      h.eval_every = 0;
      pt_runs.push_back(pt_train(weights, PartialSpec::identity(lab.model), initial_prompt(lab.model, seed), copy,
                                 lab.steps, h));
      const ActivationProfile prof = lab_profile(weights, lab, copy, seed);
      fpt_schedules.push_back(
          preset_schedule("cr-4stage", lab.model, lab.steps, &prof, Rng(seed, "schedule"), lab.preset_options));
      fpt_runs.push_back(fpt_train(weights, fpt_schedules.back(), copy, h));
      pt_em.push_back(pt_runs.back().record.evals.back().em);
      fpt_em.push_back(fpt_runs.back().record.evals.back().em);
      fpt_costs.push_back(
          schedule_cost_from_specs(lab.model, fpt_schedules.back(), seq_profile(copy.train, lab.model.prompt_len))
              .weighted_relative);
    }
    c6_ran = true;
    const double gap = std::fabs(mean(fpt_em) - mean(pt_em));
    const double cost = *std::max_element(fpt_costs.begin(), fpt_costs.end());
    return Verdict{gap <= 0.05 && cost <= 0.70,
                   "PT em [" + list(pt_em) + "] mean " + fmt("%.3f", mean(pt_em)) + "; FPT em [" + list(fpt_em) +
                       "] mean " + fmt("%.3f", mean(fpt_em)) + "; |gap| " + fmt("%.3f", gap) +
                       " (<= 0.05); weighted relative cost " + fmt("%.3f", cost) + " (<= 0.70)"};
  });

  suite.run("C7", "recycled prompt beats fresh init at expansion", [&] {
    if (!c6_ran) return Verdict{false, "needs the C6 runs"};
    int wins = 0;
    std::string detail;
    for (int s = 0; s < kSeeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(s);
      const PartialSpec& next = fpt_schedules[static_cast<std::size_t>(s)].stages[1].spec;
      const SoftPrompt recycled = recycle_prompt(fpt_runs[static_cast<std::size_t>(s)].record.stage_prompts[0], lab.model);
      const SoftPrompt fresh = initial_prompt(lab.model, seed);
      const double lr = evaluate(weights, next, &recycled, copy.dev).loss;
      const double lf = evaluate(weights, next, &fresh, copy.dev).loss;
      wins += lr < lf ? 1 : 0;
      detail += (s ? ", " : "") + fmt("%.3f", lr) + "<" + fmt("%.3f", lf);
    }
    // later expansions are reported, not judged
    std::string later;
    const std::size_t stages = fpt_schedules[0].stages.size();
    for (std::size_t i = 2; i < stages; ++i) {
      int w = 0;
      for (int s = 0; s < kSeeds; ++s) {
        const auto& run = fpt_runs[static_cast<std::size_t>(s)];
        const PartialSpec& next = fpt_schedules[static_cast<std::size_t>(s)].stages[i].spec;
        const SoftPrompt recycled = recycle_prompt(run.record.stage_prompts[i - 1], lab.model);
        const SoftPrompt fresh = initial_prompt(lab.model, static_cast<std::uint64_t>(s));
        w += evaluate(weights, next, &recycled, copy.dev).loss < evaluate(weights, next, &fresh, copy.dev).loss;
      }
      later += "; stage " + std::to_string(i) + "->" + std::to_string(i + 1) + ": " + std::to_string(w) + "/5";
    }
    return Verdict{wins >= 4, std::to_string(wins) + "/5 seeds lower at stage 1->2 (recycled<fresh: " + detail + ")" +
                                  later};
  });

  suite.run("C8", "ablation directionality", [&] {
    LabConfig ab = lab;
    ab.steps = 1000;
    std::vector<AblationRun> runs;
    for (TaskKind kind : {TaskKind::copy, TaskKind::reverse}) {
      ab.task.kind = kind;
      const TaskData data = gen_task(ab.task);
      for (int s = 0; s < kSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        const ActivationProfile prof = lab_profile(weights, ab, data, seed);
        for (const AblationArm& arm : default_ablation_arms()) runs.push_back(run_ablation_arm(weights, ab, data, prof, arm, seed));
      }
    }
    const AblationReport rep = ablation_report(runs, default_ablation_pairs());
    write_ablation_csv(out_dir / "ablation.csv", rep);
    bool ok = true;
    std::string detail;
    for (const auto& c : rep.comparisons) {
      ok = ok && c.direction_holds;
      detail += (detail.empty() ? "" : "; ") + c.task + " " + c.first + "-" + c.second + " " +
                fmt("%+.3f", c.mean_difference) + (c.direction_holds ? "" : " REVERSED");
    }
    return Verdict{ok, detail + "; report " + (out_dir / "ablation.csv").string()};
  });

  suite.run("C9", "similarity-matrix structure", [&] {
    std::map<std::string, PromptSet> partial;
    std::map<std::string, SoftPrompt> full;
    LabConfig sim = lab;
    for (TaskKind kind : {TaskKind::copy, TaskKind::reverse, TaskKind::span_fill}) {
      sim.task.kind = kind;
      const TaskData data = gen_task(sim.task);
      const ActivationProfile prof = lab_profile(weights, sim, data, 0);
      std::vector<ReductionPlan> plans(3);
      plans[0].depth_fraction = plans[0].width_fraction = 0.5;
      plans[1].depth_fraction = plans[1].width_fraction = 0.75;
      const Schedule s = make_schedule(sim.model, plans, {0.3, 0.3, 0.4}, 1000, &prof, Rng(0, "schedule"));
      Hyper h = sim.hyper;
      h.seed = 0;
      const TrainResult r = fpt_train(weights, s, data, h);
      const std::string task(to_string(kind));
      partial[task] = {task, {{"stage1", r.record.stage_prompts[0]}, {"stage2", r.record.stage_prompts[1]},
                              {"full", r.record.stage_prompts[2], true}}};
      full[task] = r.record.stage_prompts[2];
    }
    const SimilarityMatrix m = prompt_similarity(partial, full);
    write_similarity_csv(out_dir / "similarity.csv", m);
    double worst = 0.0;
    bool bounded = true;
    for (std::size_t j = 0; j < m.rows.size(); ++j) {
      for (std::size_t k = 0; k < m.cols.size(); ++k) {
        // brute force: pool in long double, cosine by definition, average
        long double want = 0;
        int n = 0;
        for (const PromptEntry& e : partial.at(m.rows[j]).entries) {
          if (e.full_model) continue;
          const SoftPrompt& ref = full.at(m.cols[k]);
          long double dot = 0, na = 0, nb = 0;
          for (std::size_t c = 0; c < ref.width(); ++c) {
            long double a = 0, b = 0;
            for (std::size_t r = 0; r < e.prompt.length(); ++r) a += e.prompt.values.at(r, c);
            for (std::size_t r = 0; r < ref.length(); ++r) b += ref.values.at(r, c);
            dot += a * b;
            na += a * a;
            nb += b * b;
          }
          want += dot / std::sqrt(na * nb);
          ++n;
        }
        want /= n;
        worst = std::max(worst, std::fabs(m.values[j][k] - static_cast<double>(want)));
        bounded = bounded && m.values[j][k] >= -1.0 && m.values[j][k] <= 1.0;
      }
    }
    return Verdict{bounded && worst <= 1e-6 && m.rows.size() == 3 && m.cols.size() == 3,
                   "3x3 entries in [-1,1]: " + std::string(bounded ? "yes" : "no") + "; max |matrix - oracle| " +
                       fmt("%.1e", worst) + " (<= 1e-6); diagonal wins " + std::to_string(m.diagonal_wins()) +
                       "/3; matrix " + (out_dir / "similarity.csv").string()};
  });

  suite.run("C10", "fine-tuning converges no slower than PT", [&] {
    // fine-tuning uses its best setting from a small learning-rate and optimizer sweep
    constexpr int kCap = 400;
    int ok_seeds = 0;
    std::string detail;
    auto shown = [](std::optional<int> s) { return s ? std::to_string(*s) : std::string(">400"); };
    for (int s = 0; s < kSeeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(s);
      Hyper pt = lab.hyper;
      pt.seed = seed;
      const auto pt_steps = steps_to_loss(
          pt_train(weights, PartialSpec::identity(lab.model), initial_prompt(lab.model, seed), copy, kCap, pt).record.losses,
          0.5);
      Hyper ft = lab.hyper;
      ft.seed = seed;
      ft.learning_rate = 3e-3F;
      ft.optimizer = OptimizerKind::adafactor;
      ft.eval_every = 0;
      const auto ft_steps = steps_to_loss(finetune_baseline(weights, copy, kCap, ft).losses, 0.5);
      const int inf = std::numeric_limits<int>::max();
      ok_seeds += ft_steps.value_or(inf) <= pt_steps.value_or(inf) && ft_steps ? 1 : 0;
      detail += (s ? ", " : "") + shown(ft_steps) + " vs " + shown(pt_steps);
    }
    return Verdict{ok_seeds >= 4, std::to_string(ok_seeds) + "/5 seeds with FT <= PT (FT vs PT steps to loss 0.5: " + detail + ")"};
  });

  if (weights_digest(weights, out_dir / "digest.tmp") != digest0) {
    std::cout << "[FAIL] C5 backbone digest changed during the suite" << std::endl;
    return 1;
  }
  std::cout << (suite.failures() == 0 ? "all criteria passed" : std::to_string(suite.failures()) + " criteria failed")
            << std::endl;
  return suite.failures() == 0 ? 0 : 1;
}
