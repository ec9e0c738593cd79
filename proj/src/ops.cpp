// Forward/backward rules for the tape primitives.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fastpt/autodiff.hpp"
#include "fastpt/kernels.hpp"

namespace fastpt::ad {
namespace {

using Grads = std::span<Tensor* const>;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

void require_row(const Tensor& a, const Tensor& row, const char* op) {
  require_matrix(a, op);
  if (row.rank() != 1 || row.dim(0) != a.cols()) {
    throw std::invalid_argument(std::string(op) + ": row vector " + shape_str(row.shape()) +
                                " does not match " + shape_str(a.shape()));
  }
}

Tensor transposed(const Tensor& t) {
  Tensor out(Shape{t.cols(), t.rows()});
  kernels::transpose(t.ptr(), out.ptr(), t.rows(), t.cols());
  return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
  kernels::active().axpy(dst.size(), 1.0F, src.ptr(), dst.ptr());
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ " + shape_str(av.shape()) +
                                " x " + shape_str(bv.shape()));
  }
  const std::size_t m = av.rows();
  const std::size_t k = av.cols();
  const std::size_t n = bv.cols();
  Tensor out(Shape{m, n});
  kernels::active().gemm(av.ptr(), bv.ptr(), out.ptr(), m, k, n, false);
  return a.tape().record(std::move(out), {a, b},
                         [pa = &av, pb = &bv, m, k, n](const Tensor&, const Tensor& g, Grads d) {
                           const auto& kern = kernels::active();
                           if (d[0] != nullptr) {
                             const Tensor bt = transposed(*pb);
                             kern.gemm(g.ptr(), bt.ptr(), d[0]->ptr(), m, n, k, true);
                           }
                           if (d[1] != nullptr) {
                             const Tensor at = transposed(*pa);
                             kern.gemm(at.ptr(), g.ptr(), d[1]->ptr(), k, m, n, true);
                           }
                         });
}

Var matmul_nt(Var a, Var b, float alpha) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_nt");
  require_matrix(bv, "matmul_nt");
  if (av.cols() != bv.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ " + shape_str(av.shape()) +
                                " x " + shape_str(bv.shape()) + "^T");
  }
  const std::size_t m = av.rows();
  const std::size_t k = av.cols();
  const std::size_t n = bv.rows();
  Tensor out(Shape{m, n});
  {
    const Tensor bt = transposed(bv);
    kernels::active().gemm(av.ptr(), bt.ptr(), out.ptr(), m, k, n, false);
  }
  if (alpha != 1.0F) {
    for (float& v : out.data()) v *= alpha;
  }
  return a.tape().record(
      std::move(out), {a, b},
      [pa = &av, pb = &bv, m, k, n, alpha](const Tensor&, const Tensor& g, Grads d) {
        const auto& kern = kernels::active();
        Tensor gs = g;
        if (alpha != 1.0F) {
          for (float& v : gs.data()) v *= alpha;
        }
        if (d[0] != nullptr) kern.gemm(gs.ptr(), pb->ptr(), d[0]->ptr(), m, n, k, true);
        if (d[1] != nullptr) {
          const Tensor gt = transposed(gs);
          kern.gemm(gt.ptr(), pa->ptr(), d[1]->ptr(), n, m, k, true);
        }
      });
}

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  kernels::active().add(av.size(), av.ptr(), bv.ptr(), out.ptr());
  return a.tape().record(std::move(out), {a, b}, [](const Tensor&, const Tensor& g, Grads d) {
    if (d[0] != nullptr) accumulate(*d[0], g);
    if (d[1] != nullptr) accumulate(*d[1], g);
  });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_row(av, rv, "add_row");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  Tensor out(av.shape());
  const auto& kern = kernels::active();
  for (std::size_t i = 0; i < m; ++i) kern.add(n, av.ptr() + i * n, rv.ptr(), out.ptr() + i * n);
  return a.tape().record(std::move(out), {a, row}, [m, n](const Tensor&, const Tensor& g, Grads d) {
    if (d[0] != nullptr) accumulate(*d[0], g);
    if (d[1] != nullptr) {
      for (std::size_t i = 0; i < m; ++i) {
        kernels::active().axpy(n, 1.0F, g.ptr() + i * n, d[1]->ptr());
      }
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  kernels::active().mul(av.size(), av.ptr(), bv.ptr(), out.ptr());
  return a.tape().record(std::move(out), {a, b},
                         [pa = &av, pb = &bv](const Tensor&, const Tensor& g, Grads d) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (d[0] != nullptr) (*d[0])[i] += g[i] * (*pb)[i];
                             if (d[1] != nullptr) (*d[1])[i] += g[i] * (*pa)[i];
                           }
                         });
}

Var mul_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_row(av, rv, "mul_row");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  Tensor out(av.shape());
  const auto& kern = kernels::active();
  for (std::size_t i = 0; i < m; ++i) kern.mul(n, av.ptr() + i * n, rv.ptr(), out.ptr() + i * n);
  return a.tape().record(std::move(out), {a, row},
                         [pa = &av, pr = &rv, m, n](const Tensor&, const Tensor& g, Grads d) {
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) {
                               const float gij = g[i * n + j];
                               if (d[0] != nullptr) (*d[0])[i * n + j] += gij * (*pr)[j];
                               if (d[1] != nullptr) (*d[1])[j] += gij * (*pa)[i * n + j];
                             }
                           }
                         });
}

Var scale(Var a, float s) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  return a.tape().record(std::move(out), {a}, [s](const Tensor&, const Tensor& g, Grads d) {
    kernels::active().axpy(g.size(), s, g.ptr(), d[0]->ptr());
  });
}

Var relu(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0F ? av[i] : 0.0F;
  return a.tape().record(std::move(out), {a}, [pa = &av](const Tensor&, const Tensor& g, Grads d) {
    // subgradient 0 at the kink
    for (std::size_t i = 0; i < g.size(); ++i) {
      if ((*pa)[i] > 0.0F) (*d[0])[i] += g[i];
    }
  });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  float total = 0.0F;
  for (float v : av.data()) total += v;
  return a.tape().record(Tensor::scalar(total), {a}, [](const Tensor&, const Tensor& g, Grads d) {
    const float gv = g[0];
    for (float& v : d[0]->data()) v += gv;
  });
}

Var softmax_rows(Var a, std::optional<std::ptrdiff_t> causal_offset) {
  const Tensor& av = a.value();
  require_matrix(av, "softmax_rows");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t limit = n;
    if (causal_offset) {
      const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(i) + *causal_offset;
      if (last < 0) throw std::invalid_argument("softmax_rows: causal row with no visible entry");
      limit = std::min<std::size_t>(n, static_cast<std::size_t>(last) + 1);
    }
    const float* row = av.ptr() + i * n;
    float* orow = out.ptr() + i * n;
    float mx = -std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, row[j]);
    float denom = 0.0F;
    for (std::size_t j = 0; j < limit; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    const float inv = 1.0F / denom;
    for (std::size_t j = 0; j < limit; ++j) orow[j] *= inv;
  }
  return a.tape().record(std::move(out), {a}, [m, n](const Tensor& y, const Tensor& g, Grads d) {
    for (std::size_t i = 0; i < m; ++i) {
      const float* yr = y.ptr() + i * n;
      const float* gr = g.ptr() + i * n;
      float dot = 0.0F;
      for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
      float* dr = d[0]->ptr() + i * n;
      for (std::size_t j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var layer_norm(Var a, Var gain, float eps) {
  const Tensor& av = a.value();
  const Tensor& gv = gain.value();
  require_row(av, gv, "layer_norm");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  Tensor out(av.shape());
  // normalized rows are kept for the gain gradient
  Tensor xhat(av.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const float* row = av.ptr() + i * n;
    float mean = 0.0F;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<float>(n);
    float var = 0.0F;
    for (std::size_t j = 0; j < n; ++j) {
      const float c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<float>(n);
    const float is = 1.0F / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const float h = (row[j] - mean) * is;
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j];
    }
  }
  return a.tape().record(
      std::move(out), {a, gain},
      [xh = std::move(xhat), pa = &av, pg = &gv, eps, m, n](const Tensor&, const Tensor& g, Grads d) {
        for (std::size_t i = 0; i < m; ++i) {
          const float* gr = g.ptr() + i * n;
          const float* hr = xh.ptr() + i * n;
          if (d[1] != nullptr) {
            for (std::size_t j = 0; j < n; ++j) (*d[1])[j] += gr[j] * hr[j];
          }
          if (d[0] != nullptr) {
            // the three terms nearly cancel for low-variance rows, so the
            // row statistics are recomputed and combined in double
            const float* row = pa->ptr() + i * n;
            double mean = 0.0;
            for (std::size_t j = 0; j < n; ++j) mean += row[j];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
            var /= static_cast<double>(n);
            const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
            double mean_dh = 0.0;
            double mean_dh_h = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dh = static_cast<double>(gr[j]) * (*pg)[j];
              mean_dh += dh;
              mean_dh_h += dh * (row[j] - mean) * is;
            }
            mean_dh /= static_cast<double>(n);
            mean_dh_h /= static_cast<double>(n);
            float* dr = d[0]->ptr() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
              const double dh = static_cast<double>(gr[j]) * (*pg)[j];
              dr[j] += static_cast<float>(is * (dh - mean_dh - (row[j] - mean) * is * mean_dh_h));
            }
          }
        }
      });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  require_matrix(tv, "embedding");
  const std::size_t vocab = tv.rows();
  const std::size_t dim = tv.cols();
  Tensor out(Shape{ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.ptr() + static_cast<std::size_t>(ids[i]) * dim, dim, out.ptr() + i * dim);
  }
  return table.tape().record(
      std::move(out), {table},
      [idx = std::vector<int>(ids.begin(), ids.end()), dim](const Tensor&, const Tensor& g, Grads d) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
          kernels::active().axpy(dim, 1.0F, g.ptr() + i * dim,
                                 d[0]->ptr() + static_cast<std::size_t>(idx[i]) * dim);
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t n = parts[0].value().cols();
  std::size_t m = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_rows");
    if (p.value().cols() != n) throw std::invalid_argument("concat_rows: column count differs");
    m += p.value().rows();
  }
  Tensor out(Shape{m, n});
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    std::copy_n(p.value().ptr(), p.value().size(), out.ptr() + off * n);
    off += p.value().rows();
  }
  return parts[0].tape().record(std::move(out), parts,
                                [offsets, n](const Tensor&, const Tensor& g, Grads d) {
                                  for (std::size_t k = 0; k < d.size(); ++k) {
                                    if (d[k] == nullptr) continue;
                                    kernels::active().axpy(d[k]->size(), 1.0F,
                                                           g.ptr() + offsets[k] * n, d[k]->ptr());
                                  }
                                });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t m = parts[0].value().rows();
  std::size_t n = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != m) throw std::invalid_argument("concat_cols: row count differs");
    n += p.value().cols();
  }
  Tensor out(Shape{m, n});
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const std::size_t w = p.value().cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(p.value().ptr() + i * w, w, out.ptr() + i * n + off);
    }
    off += w;
  }
  return parts[0].tape().record(std::move(out), parts,
                                [offsets, m, n](const Tensor&, const Tensor& g, Grads d) {
                                  for (std::size_t k = 0; k < d.size(); ++k) {
                                    if (d[k] == nullptr) continue;
                                    const std::size_t w = d[k]->cols();
                                    for (std::size_t i = 0; i < m; ++i) {
                                      kernels::active().axpy(w, 1.0F, g.ptr() + i * n + offsets[k],
                                                             d[k]->ptr() + i * w);
                                    }
                                  }
                                });
}

Var slice(Var a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
  const Tensor& av = a.value();
  require_matrix(av, "slice");
  const std::size_t n = av.cols();
  if (row0 + nrows > av.rows() || col0 + ncols > n) {
    throw std::out_of_range("slice: block exceeds " + shape_str(av.shape()));
  }
  Tensor out(Shape{nrows, ncols});
  for (std::size_t i = 0; i < nrows; ++i) {
    std::copy_n(av.ptr() + (row0 + i) * n + col0, ncols, out.ptr() + i * ncols);
  }
  return a.tape().record(std::move(out), {a},
                         [row0, nrows, col0, ncols, n](const Tensor&, const Tensor& g, Grads d) {
                           for (std::size_t i = 0; i < nrows; ++i) {
                             kernels::active().axpy(ncols, 1.0F, g.ptr() + i * ncols,
                                                    d[0]->ptr() + (row0 + i) * n + col0);
                           }
                         });
}

Var cross_entropy(Var logits, std::span<const int> targets, int ignore_index) {
  const Tensor& lv = logits.value();
  require_matrix(lv, "cross_entropy");
  const std::size_t t = lv.rows();
  const std::size_t v = lv.cols();
  if (targets.size() != t) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(t) + " rows");
  }
  Tensor probs(lv.shape());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < t; ++i) {
    const float* row = lv.ptr() + i * v;
    float* prow = probs.ptr() + i * v;
    float mx = -std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < v; ++j) mx = std::max(mx, row[j]);
    float denom = 0.0F;
    for (std::size_t j = 0; j < v; ++j) {
      prow[j] = std::exp(row[j] - mx);
      denom += prow[j];
    }
    for (std::size_t j = 0; j < v; ++j) prow[j] /= denom;
    if (targets[i] == ignore_index) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(targets[i]) +
                              " outside " + std::to_string(v) + " classes");
    }
    total += static_cast<double>(std::log(denom) + mx - row[targets[i]]);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("cross_entropy: every target is ignored");
  const float loss = static_cast<float>(total / static_cast<double>(count));
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [p = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end()), ignore_index,
       count, v](const Tensor&, const Tensor& g, Grads d) {
        const float w = g[0] / static_cast<float>(count);
        for (std::size_t i = 0; i < tg.size(); ++i) {
          if (tg[i] == ignore_index) continue;
          float* dr = d[0]->ptr() + i * v;
          const float* pr = p.ptr() + i * v;
          for (std::size_t j = 0; j < v; ++j) dr[j] += w * pr[j];
          dr[tg[i]] -= w;
        }
      });
}

}  // namespace fastpt::ad
