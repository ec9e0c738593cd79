#pragma once

// Double-precision reference math for gradient and structure checks. Shares
// no code with the tape: every op is written out with plain loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fastpt/model.hpp"
#include "fastpt/rng.hpp"
#include "fastpt/tensor.hpp"
#include "fastpt/vocab.hpp"

namespace ref {

struct Mat {
  std::size_t r = 0;
  std::size_t c = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0) : r(rows), c(cols), v(rows * cols, fill) {}
  double& at(std::size_t i, std::size_t j) { return v[i * c + j]; }
  double at(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

inline Mat from(const fastpt::Tensor& t) {
  Mat m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.size(); ++i) m.v[i] = t[i];
  return m;
}

inline Mat from(std::span<const double> values, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  std::copy(values.begin(), values.end(), m.v.begin());
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out(a.r, b.c);
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < b.c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.c; ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

inline Mat matmul_nt(const Mat& a, const Mat& b, double alpha = 1.0) {
  Mat out(a.r, b.r);
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < b.r; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.c; ++k) s += a.at(i, k) * b.at(j, k);
      out.at(i, j) = alpha * s;
    }
  return out;
}

inline Mat add(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

inline Mat add_row(const Mat& a, const Mat& row) {
  Mat out = a;
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < a.c; ++j) out.at(i, j) += row.v[j];
  return out;
}

inline Mat mul(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
  return out;
}

inline Mat mul_row(const Mat& a, const Mat& row) {
  Mat out = a;
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < a.c; ++j) out.at(i, j) *= row.v[j];
  return out;
}

inline Mat relu(const Mat& a) {
  Mat out = a;
  for (double& x : out.v) x = std::max(x, 0.0);
  return out;
}

inline Mat softmax_rows(const Mat& a, std::optional<long> causal = std::nullopt) {
  Mat out(a.r, a.c);
  for (std::size_t i = 0; i < a.r; ++i) {
    const std::size_t last =
        causal ? std::min<std::size_t>(a.c, static_cast<std::size_t>(static_cast<long>(i) + *causal + 1))
               : a.c;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < last; ++j) mx = std::max(mx, a.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < last; ++j) z += std::exp(a.at(i, j) - mx);
    for (std::size_t j = 0; j < last; ++j) out.at(i, j) = std::exp(a.at(i, j) - mx) / z;
  }
  return out;
}

inline Mat layer_norm(const Mat& a, const Mat& gain, double eps = 1e-6) {
  Mat out(a.r, a.c);
  for (std::size_t i = 0; i < a.r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < a.c; ++j) mean += a.at(i, j);
    mean /= static_cast<double>(a.c);
    double var = 0.0;
    for (std::size_t j = 0; j < a.c; ++j) var += (a.at(i, j) - mean) * (a.at(i, j) - mean);
    var /= static_cast<double>(a.c);
    const double is = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < a.c; ++j) out.at(i, j) = (a.at(i, j) - mean) * is * gain.v[j];
  }
  return out;
}

inline Mat gather(const Mat& table, std::span<const int> ids) {
  Mat out(ids.size(), table.c);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < table.c; ++j) out.at(i, j) = table.at(static_cast<std::size_t>(ids[i]), j);
  return out;
}

inline Mat block(const Mat& a, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
  Mat out(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) out.at(i, j) = a.at(r0 + i, c0 + j);
  return out;
}

inline Mat stack_rows(const std::vector<Mat>& parts) {
  Mat out(0, parts.front().c);
  for (const Mat& p : parts) {
    out.v.insert(out.v.end(), p.v.begin(), p.v.end());
    out.r += p.r;
  }
  return out;
}

inline Mat stack_cols(const std::vector<Mat>& parts) {
  std::size_t c = 0;
  for (const Mat& p : parts) c += p.c;
  Mat out(parts.front().r, c);
  std::size_t off = 0;
  for (const Mat& p : parts) {
    for (std::size_t i = 0; i < p.r; ++i)
      for (std::size_t j = 0; j < p.c; ++j) out.at(i, off + j) = p.at(i, j);
    off += p.c;
  }
  return out;
}

/// Sum (not mean) of token cross-entropies and the number of counted tokens.
inline std::pair<double, std::size_t> cross_entropy_sum(const Mat& logits, std::span<const int> targets,
                                                        int ignore = -1) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < logits.r; ++i) {
    if (targets[i] == ignore) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.c; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < logits.c; ++j) z += std::exp(logits.at(i, j) - mx);
    total += std::log(z) + mx - logits.at(i, static_cast<std::size_t>(targets[i]));
    ++n;
  }
  return {total, n};
}

inline double cross_entropy(const Mat& logits, std::span<const int> targets, int ignore = -1) {
  auto [s, n] = cross_entropy_sum(logits, targets, ignore);
  return s / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Whole model, one example at a time.

struct Attn {
  Mat wq, wk, wv, wo;
};

inline Attn attn_of(const fastpt::AttentionWeights& a) {
  return {from(a.wq), from(a.wk), from(a.wv), from(a.wo)};
}

inline Mat attention(const Mat& q_in, const Mat& kv_in, const Attn& w, std::size_t heads, bool causal) {
  const Mat q = matmul(q_in, w.wq);
  const Mat k = matmul(kv_in, w.wk);
  const Mat v = matmul(kv_in, w.wv);
  const std::size_t dh = q.c / heads;
  std::vector<Mat> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const Mat s = matmul_nt(block(q, 0, q.r, h * dh, dh), block(k, 0, k.r, h * dh, dh),
                            1.0 / std::sqrt(static_cast<double>(dh)));
    const Mat p = causal ? softmax_rows(s, 0L) : softmax_rows(s);
    outs.push_back(matmul(p, block(v, 0, v.r, h * dh, dh)));
  }
  return matmul(stack_cols(outs), w.wo);
}

inline Mat ffn(const Mat& x, const fastpt::FfnWeights& w, const fastpt::NeuronMask* mask) {
  Mat h = relu(add_row(matmul(x, from(w.w1)), from(w.b1)));
  if (mask != nullptr) {
    for (std::size_t i = 0; i < h.r; ++i)
      for (std::size_t j = 0; j < h.c; ++j)
        if ((*mask)[j] == 0) h.at(i, j) = 0.0;
  }
  return add_row(matmul(h, from(w.w2)), from(w.b2));
}

/// Mean teacher-forced token loss of a batch; prompt is l x d row-major or
/// empty for no prompt. Only the spec's layers and neurons run.
inline double model_loss(const fastpt::ModelWeights& w, const fastpt::PartialSpec& spec,
                         std::span<const double> prompt, std::size_t l, const fastpt::TokenBatch& batch) {
  const auto& cfg = w.config;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.n_heads);
  const Mat embed = from(w.embed);
  const Mat enc_pos = from(w.enc_pos);
  const Mat dec_pos = from(w.dec_pos);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch.examples[b];
    const int offset = batch.enc_offsets.empty() ? 0 : batch.enc_offsets[b];
    std::vector<Mat> parts;
    if (l > 0) parts.push_back(from(prompt, l, d));
    if (!ex.input.empty()) parts.push_back(gather(embed, ex.input));
    Mat x = stack_rows(parts);
    std::vector<int> pos(x.r);
    for (std::size_t p = 0; p < x.r; ++p) pos[p] = offset + static_cast<int>(p);
    x = add(x, gather(enc_pos, pos));
    for (std::size_t i = 0; i < spec.enc_layers.size(); ++i) {
      const auto& L = w.encoder[static_cast<std::size_t>(spec.enc_layers[i] - 1)];
      Mat hn = layer_norm(x, from(L.attn_norm));
      x = add(x, attention(hn, hn, attn_of(L.self_attn), heads, false));
      hn = layer_norm(x, from(L.ffn_norm));
      x = add(x, ffn(hn, L.ffn, &spec.enc_masks[i]));
    }
    const Mat enc = layer_norm(x, from(w.enc_final_norm));

    std::vector<int> dec_in{fastpt::vocab::kBos};
    dec_in.insert(dec_in.end(), ex.target.begin(), ex.target.end());
    std::vector<int> tgt = ex.target;
    tgt.push_back(fastpt::vocab::kEos);
    std::vector<int> dpos(dec_in.size());
    for (std::size_t p = 0; p < dpos.size(); ++p) dpos[p] = static_cast<int>(p);
    Mat y = add(gather(embed, dec_in), gather(dec_pos, dpos));
    for (std::size_t i = 0; i < spec.dec_layers.size(); ++i) {
      const auto& L = w.decoder[static_cast<std::size_t>(spec.dec_layers[i] - 1)];
      Mat hn = layer_norm(y, from(L.self_norm));
      y = add(y, attention(hn, hn, attn_of(L.self_attn), heads, true));
      hn = layer_norm(y, from(L.cross_norm));
      y = add(y, attention(hn, enc, attn_of(L.cross_attn), heads, false));
      hn = layer_norm(y, from(L.ffn_norm));
      y = add(y, ffn(hn, L.ffn, &spec.dec_masks[i]));
    }
    y = layer_norm(y, from(w.dec_final_norm));
    const Mat logits = matmul_nt(y, embed, 1.0 / std::sqrt(static_cast<double>(d)));
    auto [s, n] = cross_entropy_sum(logits, tgt, fastpt::vocab::kPad);
    total += s;
    count += n;
  }
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------

/// Largest |a - b| / max(|b|, floor) over all entries.
inline double max_rel_error(std::span<const float> analytic, std::span<const double> oracle, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    const double err = std::abs(static_cast<double>(analytic[i]) - oracle[i]) /
                       std::max(std::abs(oracle[i]), floor);
    worst = std::max(worst, err);
  }
  return worst;
}

inline fastpt::Tensor random_tensor(fastpt::Shape shape, fastpt::Rng& rng, float stddev = 1.0F) {
  fastpt::Tensor t(std::move(shape));
  for (float& x : t.data()) x = rng.normal(0.0F, stddev);
  return t;
}

}  // namespace ref
