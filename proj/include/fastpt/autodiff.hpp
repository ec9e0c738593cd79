#pragma once

// Tape-based reverse-mode differentiation over float32 tensors.
//
// A Tape owns every value produced while it is alive. Var is a cheap handle
// (tape, index). Records are appended in execution order, so the record list
// is already topologically sorted and backward is a single reverse sweep.
// Records whose parents carry no gradient keep no backward closure, which
// makes a tape of constants an inference-only graph.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fastpt/tensor.hpp"

namespace fastpt::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the record's own output and dLoss/dOutput, and accumulates into
/// each parent's gradient. A null slot means that parent needs no gradient.
using BackwardFn = std::function<void(const Tensor& out, const Tensor& grad_out,
                                      std::span<Tensor* const> parent_grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad, std::string name = {});

  /// Leaf that refers to caller-owned storage. The tensor must outlive the tape.
  Var borrow(const Tensor& value, bool requires_grad = false, std::string name = {});

  template <class F>
  Var record(Tensor value, std::span<const Var> parents, F&& backward) {
    if (!any_requires_grad(parents)) return push(std::move(value), {}, nullptr, false);
    return push(std::move(value), parents, BackwardFn(std::forward<F>(backward)), true);
  }

  template <class F>
  Var record(Tensor value, std::initializer_list<Var> parents, F&& backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::forward<F>(backward));
  }

  /// dLoss/dParam for each param. Params unreachable from loss get zeros.
  std::vector<Tensor> grad(Var loss, std::span<const Var> params) const;
  std::vector<Tensor> grad(Var loss, std::initializer_list<Var> params) const {
    return grad(loss, std::span<const Var>(params.begin(), params.size()));
  }

  std::size_t size() const { return records_.size(); }
  const Tensor& value(std::size_t id) const { return *records_.at(id).value; }
  bool requires_grad(std::size_t id) const { return records_.at(id).requires_grad; }
  const std::string& name(std::size_t id) const { return records_.at(id).name; }

 private:
  struct Record {
    std::optional<Tensor> owned;
    const Tensor* value = nullptr;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::string name;
  };

  bool any_requires_grad(std::span<const Var> parents) const;
  Var push(Tensor value, std::span<const Var> parents, BackwardFn backward, bool requires_grad);
  void check_owned(const Var& v, const char* what) const;

  // deque keeps element addresses stable across push_back; closures hold
  // pointers to parent values.
  std::deque<Record> records_;
};

// ---------------------------------------------------------------------------
// Differentiable primitives. All operands must live on the same tape.

Var matmul(Var a, Var b);                       // [m,k] x [k,n]
Var matmul_nt(Var a, Var b, float alpha = 1.0F);  // alpha * [m,k] x [n,k]^T
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // a[m,n] + row[n] broadcast over rows
Var mul(Var a, Var b);
Var mul_row(Var a, Var row);  // a[m,n] * row[n] broadcast over rows
Var scale(Var a, float s);
Var relu(Var a);
Var sum(Var a);

/// Row-wise softmax. With causal_offset set, entry (i, j) is excluded when
/// j > i + *causal_offset.
Var softmax_rows(Var a, std::optional<std::ptrdiff_t> causal_offset = std::nullopt);

/// Row-wise normalization to zero mean / unit variance, scaled by gain[n].
Var layer_norm(Var a, Var gain, float eps = 1e-6F);

/// Gathers rows of table[V,d] by id.
Var embedding(Var table, std::span<const int> ids);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice(Var a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols);

/// Mean token cross-entropy of logits[T,V] against targets, skipping
/// ignore_index entries.
Var cross_entropy(Var logits, std::span<const int> targets, int ignore_index = -1);

// ---------------------------------------------------------------------------
// Finite differences (test oracle). Parameters and evaluation are in double:
// a float32 forward cannot resolve a central difference to 1e-4.

using DoubleParams = std::vector<std::vector<double>>;
using ScalarFn = std::function<double(const DoubleParams&)>;

DoubleParams finite_diff_grad(const ScalarFn& f, DoubleParams params, double eps);

DoubleParams to_double(std::span<const Tensor> tensors);

}  // namespace fastpt::ad
