// Task calibration: full fine-tuning of the shared backbone on every task
// kind must reach dev exact match >= 0.95, otherwise the task is not
// learnable at this scale and prompt-tuning numbers on it mean little.

#include <cstdio>
#include <iostream>

#include "fastpt/experiment.hpp"
#include "support/lab.hpp"

using namespace fastpt;

int main() {
  constexpr double kBar = 0.95;
  constexpr int kSteps = 2000;
  const LabConfig lab = lab::desk_config();
  const ModelWeights weights = lab::cached_backbone(lab, std::cout);
  int failed = 0;
  for (TaskKind kind : all_task_kinds()) {
    TaskSpec spec = lab.task;
    spec.kind = kind;
    const TaskData data = gen_task(spec);
    Hyper h = lab.hyper;
    h.optimizer = OptimizerKind::adafactor;
    h.learning_rate = 3e-3F;
    h.eval_every = 0;
    const RunRecord r = finetune_baseline(weights, data, kSteps, h);
    const double em = r.evals.back().em;
    const bool ok = em >= kBar;
    failed += ok ? 0 : 1;
    std::printf("[%s] %-16s fine-tuned dev em %.3f after %d steps (bar %.2f)\n", ok ? "PASS" : "FAIL",
                std::string(to_string(kind)).c_str(), em, kSteps, kBar);
  }
  return failed == 0 ? 0 : 1;
}
