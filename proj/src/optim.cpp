#include "fastpt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fastpt {

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adafactor: return "adafactor";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::sgd_momentum: return "sgd-momentum";
  }
  return "?";
}

OptimizerKind optimizer_kind_from(std::string_view name) {
  if (name == "adafactor") return OptimizerKind::adafactor;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd-momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected adafactor, adam or sgd-momentum)");
}

Optimizer::Optimizer(OptimizerKind kind, float learning_rate) : kind_(kind), lr_(learning_rate) {
  if (!(learning_rate >= 0.0F) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
}

void Optimizer::reset() {
  t_ = 0;
  slots_.clear();
}

void Optimizer::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer: params/grads length mismatch");
  if (slots_.empty()) slots_.resize(params.size());
  if (slots_.size() != params.size()) throw std::invalid_argument("optimizer: parameter list changed");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw std::invalid_argument("optimizer: gradient shape " + shape_str(grads[i].shape()) +
                                  " != parameter shape " + shape_str(params[i]->shape()));
    }
    switch (kind_) {
      case OptimizerKind::adafactor: adafactor(*params[i], grads[i], slots_[i]); break;
      case OptimizerKind::adam: adam(*params[i], grads[i], slots_[i]); break;
      case OptimizerKind::sgd_momentum: sgd(*params[i], grads[i], slots_[i]); break;
    }
  }
}

// Adafactor without momentum or relative step sizes: factored second
// moments for matrices, decay 1 - t^-0.8, update RMS clipped to 1.
void Optimizer::adafactor(Tensor& p, const Tensor& g, Slot& s) {
  constexpr double kEps = 1e-30;
  constexpr double kClip = 1.0;
  const double beta = 1.0 - std::pow(static_cast<double>(t_), -0.8);
  const std::size_t n = g.size();
  std::vector<double> update(n);
  if (g.rank() == 2 && g.rows() > 1 && g.cols() > 1) {
    const std::size_t R = g.rows();
    const std::size_t C = g.cols();
    if (s.row_v.empty()) {
      s.row_v.assign(R, 0.0F);
      s.col_v.assign(C, 0.0F);
    }
    std::vector<double> row_mean(R, 0.0);
    std::vector<double> col_mean(C, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const double sq = static_cast<double>(g.at(r, c)) * g.at(r, c) + kEps;
        row_mean[r] += sq / static_cast<double>(C);
        col_mean[c] += sq / static_cast<double>(R);
      }
    }
    double row_total = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      s.row_v[r] = static_cast<float>(beta * s.row_v[r] + (1 - beta) * row_mean[r]);
      row_total += s.row_v[r];
    }
    const double row_avg = row_total / static_cast<double>(R);
    for (std::size_t c = 0; c < C; ++c) {
      s.col_v[c] = static_cast<float>(beta * s.col_v[c] + (1 - beta) * col_mean[c]);
    }
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const double v = static_cast<double>(s.row_v[r]) * s.col_v[c] / row_avg;
        update[r * C + c] = g.at(r, c) / std::sqrt(v);
      }
    }
  } else {
    if (s.v.empty()) s.v.assign(n, 0.0F);
    for (std::size_t i = 0; i < n; ++i) {
      const double sq = static_cast<double>(g[i]) * g[i] + kEps;
      s.v[i] = static_cast<float>(beta * s.v[i] + (1 - beta) * sq);
      update[i] = g[i] / std::sqrt(static_cast<double>(s.v[i]));
    }
  }
  double ms = 0.0;
  for (double u : update) ms += u * u;
  const double rms = std::sqrt(ms / static_cast<double>(std::max<std::size_t>(n, 1)));
  const double scale = lr_ / std::max(1.0, rms / kClip);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<float>(p[i] - scale * update[i]);
}

void Optimizer::adam(Tensor& p, const Tensor& g, Slot& s) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  const std::size_t n = g.size();
  if (s.m.empty()) {
    s.m.assign(n, 0.0F);
    s.v.assign(n, 0.0F);
  }
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < n; ++i) {
    s.m[i] = static_cast<float>(b1 * s.m[i] + (1 - b1) * g[i]);
    s.v[i] = static_cast<float>(b2 * s.v[i] + (1 - b2) * static_cast<double>(g[i]) * g[i]);
    const double mh = s.m[i] / c1;
    const double vh = s.v[i] / c2;
    p[i] = static_cast<float>(p[i] - lr_ * mh / (std::sqrt(vh) + eps));
  }
}

void Optimizer::sgd(Tensor& p, const Tensor& g, Slot& s) {
  constexpr float kMomentum = 0.9F;
  const std::size_t n = g.size();
  if (s.m.empty()) s.m.assign(n, 0.0F);
  for (std::size_t i = 0; i < n; ++i) {
    s.m[i] = kMomentum * s.m[i] + g[i];
    p[i] -= lr_ * s.m[i];
  }
}

}  // namespace fastpt
