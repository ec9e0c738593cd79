#include "fastpt/autodiff.hpp"

#include <stdexcept>

namespace fastpt::ad {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("value() on an empty Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad, std::string name) {
  Record& rec = records_.emplace_back();
  rec.owned = std::move(value);
  rec.value = &*rec.owned;
  rec.requires_grad = requires_grad;
  rec.name = std::move(name);
  return Var(this, records_.size() - 1);
}

Var Tape::borrow(const Tensor& value, bool requires_grad, std::string name) {
  Record& rec = records_.emplace_back();
  rec.value = &value;
  rec.requires_grad = requires_grad;
  rec.name = std::move(name);
  return Var(this, records_.size() - 1);
}

void Tape::check_owned(const Var& v, const char* what) const {
  if (v.tape_ != this) {
    throw std::invalid_argument(std::string(what) + " belongs to a different tape");
  }
}

bool Tape::any_requires_grad(std::span<const Var> parents) const {
  for (const Var& p : parents) {
    check_owned(p, "operand");
    if (records_[p.id_].requires_grad) return true;
  }
  return false;
}

Var Tape::push(Tensor value, std::span<const Var> parents, BackwardFn backward,
               bool requires_grad) {
#ifndef NDEBUG
  if (!value.all_finite()) {
    throw std::runtime_error("non-finite value produced at tape record " +
                             std::to_string(records_.size()));
  }
#endif
  Record& rec = records_.emplace_back();
  rec.owned = std::move(value);
  rec.value = &*rec.owned;
  rec.requires_grad = requires_grad;
  rec.backward = std::move(backward);
  rec.parents.reserve(parents.size());
  for (const Var& p : parents) rec.parents.push_back(p.id_);
  return Var(this, records_.size() - 1);
}

std::vector<Tensor> Tape::grad(Var loss, std::span<const Var> params) const {
  check_owned(loss, "loss");
  const Tensor& loss_value = value(loss.id_);
  if (loss_value.size() != 1) {
    throw std::invalid_argument("grad() needs a scalar loss, got shape " +
                                shape_str(loss_value.shape()));
  }
  std::vector<char> wanted(records_.size(), 0);
  for (const Var& p : params) {
    if (p.tape_ != this) {
      const std::string label = p.tape_ != nullptr && !p.tape_->name(p.id_).empty()
                                    ? p.tape_->name(p.id_)
                                    : "#" + std::to_string(p.id_);
      throw std::invalid_argument("parameter '" + label + "' is not on this tape");
    }
    if (!records_[p.id_].requires_grad) {
      const std::string& nm = records_[p.id_].name;
      throw std::invalid_argument("parameter '" + (nm.empty() ? "#" + std::to_string(p.id_) : nm) +
                                  "' was recorded without requires_grad");
    }
    wanted[p.id_] = 1;
  }

  std::vector<std::optional<Tensor>> grads(loss.id_ + 1);
  if (records_[loss.id_].requires_grad) {
    grads[loss.id_] = Tensor(loss_value.shape(), 1.0F);
  }
  std::vector<Tensor*> slots;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    if (!grads[i]) continue;
    const Record& rec = records_[i];
    if (rec.backward) {
      slots.assign(rec.parents.size(), nullptr);
      for (std::size_t k = 0; k < rec.parents.size(); ++k) {
        const std::size_t pid = rec.parents[k];
        if (!records_[pid].requires_grad) continue;
        if (!grads[pid]) grads[pid] = Tensor(value(pid).shape(), 0.0F);
        slots[k] = &*grads[pid];
      }
      rec.backward(*rec.value, *grads[i], slots);
    }
    if (!wanted[i]) grads[i].reset();
  }

  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Var& p : params) {
    if (p.id_ < grads.size() && grads[p.id_]) {
      out.push_back(*grads[p.id_]);
    } else {
      out.emplace_back(value(p.id_).shape(), 0.0F);
    }
  }
  return out;
}

DoubleParams finite_diff_grad(const ScalarFn& f, DoubleParams params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  DoubleParams out(params.size());
  for (std::size_t t = 0; t < params.size(); ++t) {
    out[t].resize(params[t].size());
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double orig = params[t][i];
      params[t][i] = orig + eps;
      const double up = f(params);
      params[t][i] = orig - eps;
      const double down = f(params);
      params[t][i] = orig;
      out[t][i] = (up - down) / (2.0 * eps);
    }
  }
  return out;
}

DoubleParams to_double(std::span<const Tensor> tensors) {
  DoubleParams out;
  out.reserve(tensors.size());
  for (const Tensor& t : tensors) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

}  // namespace fastpt::ad
