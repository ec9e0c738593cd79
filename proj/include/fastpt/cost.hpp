#pragma once

// Analytic training FLOPs. A multiply-accumulate counts as 2 FLOPs and a
// training step costs 3x the forward pass.

#include <span>
#include <string>
#include <vector>

#include "fastpt/model.hpp"
#include "fastpt/schedule.hpp"

namespace fastpt {

struct SeqProfile {
  double n_in = 1.0;   // mean encoder input tokens, prompt excluded
  double n_out = 1.0;  // mean decoder positions
  double prompt_len = 1.0;

  void validate() const;
};

/// Mean lengths of a dataset; decoder positions count the appended EOS.
SeqProfile seq_profile(const std::vector<Example>& data, int prompt_len);

struct FlopsBreakdown {
  std::vector<double> encoder;  // per retained encoder layer
  std::vector<double> decoder;  // per retained decoder layer
  double embedding = 0.0;
  double total() const;
};

FlopsBreakdown forward_flops(const ModelConfig& config, const PartialSpec& spec,
                             const SeqProfile& seq);
double step_flops(const ModelConfig& config, const PartialSpec& spec, const SeqProfile& seq);

/// sum_i fraction_i * relative_i; fractions must sum to 1 within 1e-9.
double schedule_relative_cost(std::span<const double> per_stage_relative,
                              std::span<const double> step_fractions);

struct CostReport {
  double full_step_flops = 0.0;
  std::vector<double> stage_step_flops;
  std::vector<double> stage_relative;
  std::vector<double> step_fractions;
  std::vector<int> stage_steps;
  double weighted_relative = 0.0;
};

CostReport schedule_cost_from_specs(const ModelConfig& config, const Schedule& schedule,
                                    const SeqProfile& seq);

std::string cost_report_csv(const CostReport& report);

}  // namespace fastpt
