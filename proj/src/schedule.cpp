#include "fastpt/schedule.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fastpt {

int Schedule::total_steps() const {
  int total = 0;
  for (const Stage& s : stages) total += s.steps;
  return total;
}

std::vector<double> Schedule::fractions() const {
  const double total = total_steps();
  std::vector<double> out;
  for (const Stage& s : stages) out.push_back(total > 0 ? s.steps / total : 0.0);
  return out;
}

std::vector<int> Schedule::boundaries() const {
  std::vector<int> out;
  int at = 0;
  for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
    at += stages[i].steps;
    out.push_back(at);
  }
  return out;
}

void Schedule::validate(const ModelConfig& config, bool require_full_final) const {
  if (stages.empty()) throw std::invalid_argument("schedule has no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].steps < 1) {
      throw std::invalid_argument("schedule stage " + std::to_string(i + 1) + " has " +
                                  std::to_string(stages[i].steps) + " steps");
    }
    stages[i].spec.validate(config);
  }
  if (require_full_final && !stages.back().spec.is_identity(config)) {
    throw std::invalid_argument("schedule: the final stage must be the full model");
  }
}

std::vector<int> split_steps(int total, const std::vector<double>& fractions) {
  if (fractions.empty()) throw std::invalid_argument("split_steps: no fractions");
  const double sum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("step fractions sum to " + std::to_string(sum) + ", not 1");
  }
  std::vector<int> steps;
  int used = 0;
  for (std::size_t i = 0; i + 1 < fractions.size(); ++i) {
    // the 1e-9 keeps 0.2 * 1000 from flooring to 199
    const int n = static_cast<int>(std::floor(fractions[i] * total + 1e-9));
    steps.push_back(n);
    used += n;
  }
  steps.push_back(total - used);
  for (int n : steps) {
    if (n < 1) {
      throw std::invalid_argument("split_steps: " + std::to_string(total) +
                                  " steps leave an empty stage");
    }
  }
  return steps;
}

Schedule make_schedule(const ModelConfig& config, const std::vector<ReductionPlan>& plans,
                       const std::vector<double>& step_fractions, int total_steps,
                       const ActivationProfile* profile, const Rng& rng) {
  if (plans.size() != step_fractions.size()) {
    throw std::invalid_argument("make_schedule: plans and step fractions differ in length");
  }
  const std::vector<int> steps = split_steps(total_steps, step_fractions);
  Schedule s;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    Stage st;
    st.spec = make_partial_spec(config, plans[i], profile, rng.child("stage" + std::to_string(i + 1)));
    st.steps = steps[i];
    st.label = "stage" + std::to_string(i + 1);
    s.stages.push_back(std::move(st));
  }
  return s;
}

Schedule identity_schedule(const ModelConfig& config, int steps) {
  Schedule s;
  s.stages.push_back({PartialSpec::identity(config), steps, "full"});
  return s;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"ld-4stage", "fr-4stage", "cr-4stage", "ld-2stage"};
  return names;
}

bool preset_needs_profile(std::string_view name) { return name == "fr-4stage" || name == "cr-4stage"; }

PresetDefinition preset_definition(std::string_view name, const PresetOptions& options) {
  const std::vector<double> ladder{0.25, 0.5, 0.75, 1.0};
  PresetDefinition def;
  def.step_fractions = {0.2, 0.2, 0.2, 0.4};
  auto plan = [&](double depth, double width) {
    ReductionPlan p;
    p.depth_fraction = depth;
    p.width_fraction = width;
    p.layer_strategy = options.layer_strategy;
    p.neuron_strategy = options.neuron_strategy;
    p.decoder_policy = options.decoder_policy;
    return p;
  };
  if (name == "ld-4stage") {
    for (double f : ladder) def.plans.push_back(plan(f, 1.0));
  } else if (name == "fr-4stage") {
    for (double f : ladder) def.plans.push_back(plan(1.0, f));
  } else if (name == "cr-4stage") {
    for (double f : ladder) def.plans.push_back(plan(f, f));
  } else if (name == "ld-2stage") {
    def.plans = {plan(0.75, 1.0), plan(1.0, 1.0)};
    def.step_fractions = {0.6, 0.4};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown schedule preset '" + std::string(name) + "' (known: " +
                                known + ")");
  }
  return def;
}

Schedule preset_schedule(std::string_view name, const ModelConfig& config, int total_steps,
                         const ActivationProfile* profile, const Rng& rng,
                         const PresetOptions& options) {
  const PresetDefinition def = preset_definition(name, options);
  Schedule s = make_schedule(config, def.plans, def.step_fractions, total_steps, profile, rng);
  s.validate(config);
  return s;
}

}  // namespace fastpt
