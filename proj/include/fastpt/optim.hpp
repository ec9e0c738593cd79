#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "fastpt/tensor.hpp"

namespace fastpt {

enum class OptimizerKind { adafactor, adam, sgd_momentum };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from(std::string_view name);

/// Updates a fixed list of parameters in place. State is keyed by position
/// in the list, so callers must pass the same tensors in the same order.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, float learning_rate);

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);
  void reset();

  OptimizerKind kind() const { return kind_; }
  float learning_rate() const { return lr_; }
  long steps_taken() const { return t_; }

 private:
  struct Slot {
    std::vector<float> m;      // adam first moment / sgd velocity
    std::vector<float> v;      // full second moment
    std::vector<float> row_v;  // adafactor factored second moment
    std::vector<float> col_v;
  };

  void adafactor(Tensor& p, const Tensor& g, Slot& s);
  void adam(Tensor& p, const Tensor& g, Slot& s);
  void sgd(Tensor& p, const Tensor& g, Slot& s);

  OptimizerKind kind_;
  float lr_;
  long t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace fastpt
