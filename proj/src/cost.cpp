#include "fastpt/cost.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace fastpt {

void SeqProfile::validate() const {
  if (!(n_in >= 1.0) || !(n_out >= 1.0) || !(prompt_len >= 1.0)) {
    throw std::invalid_argument("sequence profile lengths must be >= 1");
  }
}

SeqProfile seq_profile(const std::vector<Example>& data, int prompt_len) {
  if (data.empty()) throw std::invalid_argument("seq_profile: empty dataset");
  double in = 0.0;
  double out = 0.0;
  for (const Example& e : data) {
    in += static_cast<double>(e.input.size());
    out += static_cast<double>(e.target.size() + 1);
  }
  const auto n = static_cast<double>(data.size());
  return {std::max(1.0, in / n), out / n, static_cast<double>(prompt_len)};
}

double FlopsBreakdown::total() const {
  return std::accumulate(encoder.begin(), encoder.end(), 0.0) +
         std::accumulate(decoder.begin(), decoder.end(), 0.0) + embedding;
}

FlopsBreakdown forward_flops(const ModelConfig& config, const PartialSpec& spec,
                             const SeqProfile& seq) {
  spec.validate(config);
  seq.validate();
  const double d = config.d_model;
  const double s = seq.prompt_len + seq.n_in;
  const double t = seq.n_out;
  FlopsBreakdown out;
  for (const NeuronMask& m : spec.enc_masks) {
    const auto ff = static_cast<double>(active_count(m));
    out.encoder.push_back(8 * s * d * d + 4 * s * s * d + 4 * s * d * ff);
  }
  for (const NeuronMask& m : spec.dec_masks) {
    const auto ff = static_cast<double>(active_count(m));
    const double self = 8 * t * d * d + 4 * t * t * d;
    const double cross = 4 * t * d * d + 4 * t * s * d + 4 * t * d * d;
    out.decoder.push_back(self + cross + 4 * t * d * ff);
  }
  out.embedding = 2 * (s + t) * d * config.vocab_size;
  return out;
}

double step_flops(const ModelConfig& config, const PartialSpec& spec, const SeqProfile& seq) {
  return 3.0 * forward_flops(config, spec, seq).total();
}

double schedule_relative_cost(std::span<const double> per_stage_relative,
                              std::span<const double> step_fractions) {
  if (per_stage_relative.size() != step_fractions.size() || per_stage_relative.empty()) {
    throw std::invalid_argument("schedule_relative_cost: need equally many relatives and fractions");
  }
  double sum = 0.0;
  double cost = 0.0;
  for (std::size_t i = 0; i < step_fractions.size(); ++i) {
    if (!(per_stage_relative[i] > 0.0) || !std::isfinite(per_stage_relative[i])) {
      throw std::invalid_argument("schedule_relative_cost: relative costs must be positive");
    }
    if (step_fractions[i] < 0.0) {
      throw std::invalid_argument("schedule_relative_cost: negative step fraction");
    }
    sum += step_fractions[i];
    cost += step_fractions[i] * per_stage_relative[i];
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("schedule_relative_cost: step fractions sum to " +
                                std::to_string(sum));
  }
  return cost;
}

CostReport schedule_cost_from_specs(const ModelConfig& config, const Schedule& schedule,
                                    const SeqProfile& seq) {
  schedule.validate(config, false);
  CostReport r;
  r.full_step_flops = step_flops(config, PartialSpec::identity(config), seq);
  for (const Stage& st : schedule.stages) {
    const double f = step_flops(config, st.spec, seq);
    r.stage_step_flops.push_back(f);
    r.stage_relative.push_back(f / r.full_step_flops);
    r.stage_steps.push_back(st.steps);
  }
  r.step_fractions = schedule.fractions();
  r.weighted_relative = schedule_relative_cost(r.stage_relative, r.step_fractions);
  return r;
}

std::string cost_report_csv(const CostReport& report) {
  std::string out = "stage,steps,step_fraction,step_flops,relative\n";
  char buf[160];
  for (std::size_t i = 0; i < report.stage_relative.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.6f,%.6e,%.6f\n", i + 1, report.stage_steps[i],
                  report.step_fractions[i], report.stage_step_flops[i], report.stage_relative[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "weighted,%d,1.000000,%.6e,%.6f\n",
                std::accumulate(report.stage_steps.begin(), report.stage_steps.end(), 0),
                report.weighted_relative * report.full_step_flops, report.weighted_relative);
  out += buf;
  return out;
}

}  // namespace fastpt
