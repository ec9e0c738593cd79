#include "fastpt/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "fastpt/vocab.hpp"

namespace fastpt {
namespace {

Tensor normal_tensor(Shape shape, float stddev, Rng rng) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = rng.normal(0.0F, stddev);
  return t;
}

AttentionWeights init_attention(const ModelConfig& c, const Rng& rng) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const float s = c.init_scale / std::sqrt(static_cast<float>(c.d_model));
  return {normal_tensor({d, d}, s, rng.child("wq")), normal_tensor({d, d}, s, rng.child("wk")),
          normal_tensor({d, d}, s, rng.child("wv")), normal_tensor({d, d}, s, rng.child("wo"))};
}

FfnWeights init_ffn(const ModelConfig& c, const Rng& rng) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto f = static_cast<std::size_t>(c.d_ff);
  return {normal_tensor({d, f}, c.init_scale / std::sqrt(static_cast<float>(d)), rng.child("w1")),
          Tensor(Shape{f}, 0.0F),
          normal_tensor({f, d}, c.init_scale / std::sqrt(static_cast<float>(f)), rng.child("w2")),
          Tensor(Shape{d}, 0.0F)};
}

Tensor ones(std::size_t n) { return Tensor(Shape{n}, 1.0F); }

void add_attention(std::vector<std::pair<std::string, Tensor*>>& out, const std::string& prefix,
                   AttentionWeights& a) {
  out.emplace_back(prefix + ".wq", &a.wq);
  out.emplace_back(prefix + ".wk", &a.wk);
  out.emplace_back(prefix + ".wv", &a.wv);
  out.emplace_back(prefix + ".wo", &a.wo);
}

void add_ffn(std::vector<std::pair<std::string, Tensor*>>& out, const std::string& prefix,
             FfnWeights& f) {
  out.emplace_back(prefix + ".w1", &f.w1);
  out.emplace_back(prefix + ".b1", &f.b1);
  out.emplace_back(prefix + ".w2", &f.w2);
  out.emplace_back(prefix + ".b2", &f.b2);
}

ad::Var concat_rows_or_single(const std::vector<ad::Var>& parts) {
  return parts.size() == 1 ? parts.front() : ad::concat_rows(parts);
}

ad::Var concat_cols_or_single(const std::vector<ad::Var>& parts) {
  return parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("ModelConfig: " + msg); };
  if (enc_layers < 1 || dec_layers < 1) fail("layer counts must be >= 1");
  if (d_model < 1 || d_ff < 1 || n_heads < 1) fail("dimensions must be >= 1");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (prompt_len < 1) fail("prompt_len must be >= 1");
  if (vocab_size <= vocab::kFirstContent) {
    fail("vocab_size must exceed the " + std::to_string(vocab::kFirstContent) + " reserved ids");
  }
  if (max_len < 2) fail("max_len must be >= 2");
  if (!(init_scale > 0.0F) || !(embed_std > 0.0F)) fail("init scales must be positive");
}

std::vector<std::pair<std::string, Tensor*>> ModelWeights::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embed", &embed);
  out.emplace_back("enc_pos", &enc_pos);
  out.emplace_back("dec_pos", &dec_pos);
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string p = "enc." + std::to_string(i + 1);
    EncoderLayer& L = encoder[i];
    out.emplace_back(p + ".attn_norm", &L.attn_norm);
    add_attention(out, p + ".self_attn", L.self_attn);
    out.emplace_back(p + ".ffn_norm", &L.ffn_norm);
    add_ffn(out, p + ".ffn", L.ffn);
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const std::string p = "dec." + std::to_string(i + 1);
    DecoderLayer& L = decoder[i];
    out.emplace_back(p + ".self_norm", &L.self_norm);
    add_attention(out, p + ".self_attn", L.self_attn);
    out.emplace_back(p + ".cross_norm", &L.cross_norm);
    add_attention(out, p + ".cross_attn", L.cross_attn);
    out.emplace_back(p + ".ffn_norm", &L.ffn_norm);
    add_ffn(out, p + ".ffn", L.ffn);
  }
  out.emplace_back("enc_final_norm", &enc_final_norm);
  out.emplace_back("dec_final_norm", &dec_final_norm);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelWeights::named() const {
  auto mutable_named = const_cast<ModelWeights*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_named.size());
  for (auto& [name, t] : mutable_named) out.emplace_back(std::move(name), t);
  return out;
}

bool operator==(const ModelWeights& a, const ModelWeights& b) {
  if (!(a.config == b.config)) return false;
  const auto na = a.named();
  const auto nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first || !(*na[i].second == *nb[i].second)) return false;
  }
  return true;
}

void SoftPrompt::validate(const ModelConfig& config) const {
  if (values.rank() != 2 || values.cols() != static_cast<std::size_t>(config.d_model) ||
      values.rows() < 1) {
    throw std::invalid_argument("soft prompt shape " + shape_str(values.shape()) +
                                " does not match d_model " + std::to_string(config.d_model));
  }
  if (!values.all_finite()) throw std::invalid_argument("soft prompt has non-finite entries");
}

std::vector<std::vector<std::uint8_t>> TokenBatch::padding_mask() const {
  std::size_t longest = 0;
  for (const Example& e : examples) longest = std::max(longest, e.input.size());
  std::vector<std::vector<std::uint8_t>> mask(examples.size(),
                                              std::vector<std::uint8_t>(longest, 0));
  for (std::size_t b = 0; b < examples.size(); ++b) {
    std::fill_n(mask[b].begin(), examples[b].input.size(), std::uint8_t{1});
  }
  return mask;
}

ModelWeights init_weights(const ModelConfig& config, Rng& rng) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto v = static_cast<std::size_t>(config.vocab_size);
  const auto ml = static_cast<std::size_t>(config.max_len);
  const Rng base = rng.child("weights");
  ModelWeights w;
  w.config = config;
  w.embed = normal_tensor({v, d}, config.embed_std, base.child("embed"));
  w.enc_pos = normal_tensor({ml, d}, config.embed_std, base.child("enc_pos"));
  w.dec_pos = normal_tensor({ml, d}, config.embed_std, base.child("dec_pos"));
  for (int i = 0; i < config.enc_layers; ++i) {
    const Rng r = base.child("enc." + std::to_string(i + 1));
    w.encoder.push_back({ones(d), init_attention(config, r.child("self_attn")), ones(d),
                         init_ffn(config, r.child("ffn"))});
  }
  for (int i = 0; i < config.dec_layers; ++i) {
    const Rng r = base.child("dec." + std::to_string(i + 1));
    w.decoder.push_back({ones(d), init_attention(config, r.child("self_attn")), ones(d),
                         init_attention(config, r.child("cross_attn")), ones(d),
                         init_ffn(config, r.child("ffn"))});
  }
  w.enc_final_norm = ones(d);
  w.dec_final_norm = ones(d);
  return w;
}

SoftPrompt init_prompt(const ModelConfig& config, Rng& rng, float stddev) {
  config.validate();
  return SoftPrompt{normal_tensor(
      {static_cast<std::size_t>(config.prompt_len), static_cast<std::size_t>(config.d_model)},
      stddev, rng.child("prompt"))};
}

FfnWeights shrink_ffn(const FfnWeights& w, std::span<const std::uint8_t> mask) {
  const std::size_t d = w.w1.rows();
  const std::size_t f = w.w1.cols();
  if (mask.size() != f) {
    throw std::invalid_argument("FFN mask has " + std::to_string(mask.size()) + " entries, d_ff is " +
                                std::to_string(f));
  }
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < f; ++j) {
    if (mask[j] != 0) keep.push_back(j);
  }
  const std::size_t k = keep.size();
  FfnWeights out{Tensor(Shape{d, k}), Tensor(Shape{k}), Tensor(Shape{k, d}), w.b2};
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t j = 0; j < k; ++j) out.w1.at(r, j) = w.w1.at(r, keep[j]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    out.b1[j] = w.b1[keep[j]];
    std::copy_n(w.w2.ptr() + keep[j] * d, d, out.w2.ptr() + j * d);
  }
  return out;
}

ModelView::ModelView(const ModelWeights& weights, const PartialSpec& spec)
    : weights_(&weights), spec_(spec) {
  spec_.validate(weights.config);
  auto make_ref = [](const FfnWeights& full, const NeuronMask& mask) {
    FfnRef ref;
    if (active_count(mask) == mask.size()) {
      ref.weights = &full;
    } else {
      ref.shrunk = std::make_shared<const FfnWeights>(shrink_ffn(full, mask));
      ref.weights = ref.shrunk.get();
    }
    return ref;
  };
  for (std::size_t i = 0; i < spec_.enc_layers.size(); ++i) {
    const int idx = spec_.enc_layers[i];
    const EncoderLayer& L = weights.encoder[static_cast<std::size_t>(idx - 1)];
    encoder_.push_back({idx, &L, make_ref(L.ffn, spec_.enc_masks[i])});
  }
  for (std::size_t i = 0; i < spec_.dec_layers.size(); ++i) {
    const int idx = spec_.dec_layers[i];
    const DecoderLayer& L = weights.decoder[static_cast<std::size_t>(idx - 1)];
    decoder_.push_back({idx, &L, make_ref(L.ffn, spec_.dec_masks[i])});
  }
}

ModelGraph::ModelGraph(ad::Tape& tape, const ModelView& view, bool train_weights)
    : tape_(&tape), view_(&view), train_weights_(train_weights) {}

ad::Var ModelGraph::param(const Tensor& t) {
  for (const auto& [ptr, var] : bound_) {
    if (ptr == &t) return var;
  }
  ad::Var v = tape_->borrow(t, train_weights_);
  bound_.emplace_back(&t, v);
  return v;
}

ad::Var ModelGraph::ffn(ad::Var x, const FfnWeights& w) {
  ad::Var h = ad::relu(ad::add_row(ad::matmul(x, param(w.w1)), param(w.b1)));
  return ad::add_row(ad::matmul(h, param(w.w2)), param(w.b2));
}

ad::Var ModelGraph::attention(ad::Var q_in, ad::Var kv_in, const AttentionWeights& w,
                              const std::vector<std::size_t>& q_off,
                              const std::vector<std::size_t>& q_len,
                              const std::vector<std::size_t>& k_off,
                              const std::vector<std::size_t>& k_len, bool causal,
                              bool probe_encoder) {
  const ModelConfig& c = view_->config();
  const auto dh = static_cast<std::size_t>(c.head_dim());
  const float scale = 1.0F / std::sqrt(static_cast<float>(dh));
  ad::Var q = ad::matmul(q_in, param(w.wq));
  ad::Var k = ad::matmul(kv_in, param(w.wk));
  ad::Var v = ad::matmul(kv_in, param(w.wv));
  std::vector<ad::Var> rows;
  rows.reserve(q_off.size());
  std::vector<ad::Var> heads(static_cast<std::size_t>(c.n_heads));
  for (std::size_t b = 0; b < q_off.size(); ++b) {
    for (std::size_t h = 0; h < heads.size(); ++h) {
      ad::Var qb = ad::slice(q, q_off[b], q_len[b], h * dh, dh);
      ad::Var kb = ad::slice(k, k_off[b], k_len[b], h * dh, dh);
      ad::Var vb = ad::slice(v, k_off[b], k_len[b], h * dh, dh);
      ad::Var scores = ad::matmul_nt(qb, kb, scale);
      if (probe_encoder && probe_ != nullptr) probe_->enc_attention.push_back(scores.shape());
      ad::Var attn = causal ? ad::softmax_rows(scores, 0) : ad::softmax_rows(scores);
      heads[h] = ad::matmul(attn, vb);
    }
    rows.push_back(concat_cols_or_single(heads));
  }
  return ad::matmul(concat_rows_or_single(rows), param(w.wo));
}

ModelGraph::Encoded ModelGraph::encode(std::optional<ad::Var> prompt, const TokenBatch& batch) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  const ModelConfig& c = view_->config();
  const ModelWeights& W = view_->weights();
  const auto d = static_cast<std::size_t>(c.d_model);
  const std::size_t l = prompt ? prompt->value().rows() : 0;
  if (prompt && prompt->value().cols() != d) {
    throw std::invalid_argument("forward: prompt width does not match d_model");
  }
  if (!batch.enc_offsets.empty() && batch.enc_offsets.size() != batch.size()) {
    throw std::invalid_argument("forward: enc_offsets size differs from batch size");
  }

  std::vector<int> ids;
  std::vector<int> pos;
  Encoded enc;
  std::size_t row = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& input = batch.examples[b].input;
    const std::size_t s = l + input.size();
    const int offset = batch.enc_offsets.empty() ? 0 : batch.enc_offsets[b];
    if (s == 0) throw std::invalid_argument("forward: empty encoder sequence");
    if (offset < 0 || static_cast<std::size_t>(offset) + s > static_cast<std::size_t>(c.max_len)) {
      throw std::invalid_argument("forward: encoder sequence of " + std::to_string(s) +
                                  " positions exceeds max_len " + std::to_string(c.max_len));
    }
    for (int id : input) {
      if (id < 0 || id >= c.vocab_size) {
        throw std::invalid_argument("forward: token id " + std::to_string(id) + " out of range");
      }
    }
    ids.insert(ids.end(), input.begin(), input.end());
    for (std::size_t p = 0; p < s; ++p) pos.push_back(offset + static_cast<int>(p));
    enc.offsets.push_back(row);
    enc.lengths.push_back(s);
    row += s;
  }

  ad::Var hidden;
  const bool any_tokens = !ids.empty();
  ad::Var tokens = any_tokens ? ad::embedding(param(W.embed), ids) : ad::Var{};
  if (l == 0) {
    hidden = tokens;
  } else {
    std::vector<ad::Var> parts;
    std::size_t tok_row = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      parts.push_back(*prompt);
      const std::size_t n = batch.examples[b].input.size();
      if (n > 0) parts.push_back(ad::slice(tokens, tok_row, n, 0, d));
      tok_row += n;
    }
    hidden = concat_rows_or_single(parts);
  }
  hidden = ad::add(hidden, ad::embedding(param(W.enc_pos), pos));

  for (const auto& ref : view_->encoder()) {
    if (probe_ != nullptr) probe_->enc_layers_run.push_back(ref.index);
    const EncoderLayer& L = *ref.layer;
    ad::Var hn = ad::layer_norm(hidden, param(L.attn_norm));
    hidden = ad::add(hidden, attention(hn, hn, L.self_attn, enc.offsets, enc.lengths, enc.offsets,
                                       enc.lengths, false, true));
    hn = ad::layer_norm(hidden, param(L.ffn_norm));
    if (capture_ffn_inputs) ffn_inputs.emplace_back("enc." + std::to_string(ref.index), hn);
    hidden = ad::add(hidden, ffn(hn, *ref.ffn.weights));
  }
  enc.hidden = ad::layer_norm(hidden, param(W.enc_final_norm));
  return enc;
}

ad::Var ModelGraph::decode_logits(const Encoded& enc,
                                  const std::vector<std::vector<int>>& dec_inputs) {
  const ModelConfig& c = view_->config();
  const ModelWeights& W = view_->weights();
  std::vector<int> ids;
  std::vector<int> pos;
  std::vector<std::size_t> off;
  std::vector<std::size_t> len;
  std::size_t row = 0;
  for (const auto& seq : dec_inputs) {
    if (seq.empty() || seq.size() > static_cast<std::size_t>(c.max_len)) {
      throw std::invalid_argument("forward: decoder length " + std::to_string(seq.size()) +
                                  " outside [1, max_len]");
    }
    for (int id : seq) {
      if (id < 0 || id >= c.vocab_size) {
        throw std::invalid_argument("forward: token id " + std::to_string(id) + " out of range");
      }
    }
    ids.insert(ids.end(), seq.begin(), seq.end());
    for (std::size_t p = 0; p < seq.size(); ++p) pos.push_back(static_cast<int>(p));
    off.push_back(row);
    len.push_back(seq.size());
    row += seq.size();
  }
  ad::Var hidden =
      ad::add(ad::embedding(param(W.embed), ids), ad::embedding(param(W.dec_pos), pos));
  for (const auto& ref : view_->decoder()) {
    if (probe_ != nullptr) probe_->dec_layers_run.push_back(ref.index);
    const DecoderLayer& L = *ref.layer;
    ad::Var hn = ad::layer_norm(hidden, param(L.self_norm));
    hidden = ad::add(hidden, attention(hn, hn, L.self_attn, off, len, off, len, true, false));
    hn = ad::layer_norm(hidden, param(L.cross_norm));
    hidden = ad::add(hidden, attention(hn, enc.hidden, L.cross_attn, off, len, enc.offsets,
                                       enc.lengths, false, false));
    hn = ad::layer_norm(hidden, param(L.ffn_norm));
    if (capture_ffn_inputs) ffn_inputs.emplace_back("dec." + std::to_string(ref.index), hn);
    hidden = ad::add(hidden, ffn(hn, *ref.ffn.weights));
  }
  hidden = ad::layer_norm(hidden, param(W.dec_final_norm));
  return ad::matmul_nt(hidden, param(W.embed), 1.0F / std::sqrt(static_cast<float>(c.d_model)));
}

ad::Var ModelGraph::loss(std::optional<ad::Var> prompt, const TokenBatch& batch, ad::Var* logits) {
  Encoded enc = encode(prompt, batch);
  std::vector<std::vector<int>> dec_inputs;
  std::vector<int> targets;
  dec_inputs.reserve(batch.size());
  for (const Example& e : batch.examples) {
    std::vector<int> in{vocab::kBos};
    in.insert(in.end(), e.target.begin(), e.target.end());
    dec_inputs.push_back(std::move(in));
    targets.insert(targets.end(), e.target.begin(), e.target.end());
    targets.push_back(vocab::kEos);
  }
  ad::Var out = decode_logits(enc, dec_inputs);
  if (logits != nullptr) *logits = out;
  return ad::cross_entropy(out, targets, vocab::kPad);
}

ForwardResult forward(const ModelWeights& weights, const PartialSpec& spec, const SoftPrompt* prompt,
                      const TokenBatch& batch, ForwardProbe* probe) {
  if (prompt != nullptr) prompt->validate(weights.config);
  const ModelView view(weights, spec);
  ad::Tape tape;
  ModelGraph graph(tape, view);
  graph.set_probe(probe);
  std::optional<ad::Var> p;
  if (prompt != nullptr) p = tape.borrow(prompt->values);
  ad::Var logits;
  ad::Var loss = graph.loss(p, batch, &logits);
  return {loss.value().item(), logits.value()};
}

PromptGrad prompt_loss_and_grad(const ModelView& view, const SoftPrompt& prompt,
                                const TokenBatch& batch) {
  ad::Tape tape;
  ModelGraph graph(tape, view);
  ad::Var p = tape.borrow(prompt.values, true, "prompt");
  ad::Var loss = graph.loss(p, batch);
  auto grads = tape.grad(loss, {p});
  return {loss.value().item(), std::move(grads.front())};
}

WeightsGrad weights_loss_and_grad(const ModelWeights& weights, const TokenBatch& batch) {
  const ModelView view(weights, PartialSpec::identity(weights.config));
  ad::Tape tape;
  ModelGraph graph(tape, view, true);
  ad::Var loss = graph.loss(std::nullopt, batch);
  const auto named = weights.named();
  std::vector<ad::Var> params;
  std::vector<std::size_t> where(named.size(), SIZE_MAX);
  for (std::size_t i = 0; i < named.size(); ++i) {
    for (const auto& [ptr, var] : graph.bound()) {
      if (ptr == named[i].second) {
        where[i] = params.size();
        params.push_back(var);
        break;
      }
    }
  }
  auto grads = tape.grad(loss, params);
  WeightsGrad out{loss.value().item(), {}};
  out.grads.reserve(named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (where[i] == SIZE_MAX) {
      out.grads.emplace_back(named[i].second->shape(), 0.0F);
    } else {
      out.grads.push_back(std::move(grads[where[i]]));
    }
  }
  return out;
}

Tensor ffn_apply(const FfnWeights& w, std::span<const std::uint8_t> mask, const Tensor& x) {
  const std::size_t f = w.w1.cols();
  if (mask.size() != f) {
    throw std::invalid_argument("ffn_apply: mask has " + std::to_string(mask.size()) +
                                " entries, d_ff is " + std::to_string(f));
  }
  if (x.rank() != 2 || x.cols() != w.w1.rows()) {
    throw std::invalid_argument("ffn_apply: input " + shape_str(x.shape()) + " does not match W1 " +
                                shape_str(w.w1.shape()));
  }
  Tensor mask_row(Shape{f});
  for (std::size_t j = 0; j < f; ++j) {
    if (mask[j] > 1) throw std::invalid_argument("ffn_apply: mask entries must be 0 or 1");
    mask_row[j] = static_cast<float>(mask[j]);
  }
  ad::Tape tape;
  ad::Var h = ad::relu(ad::add_row(ad::matmul(tape.borrow(x), tape.borrow(w.w1)), tape.borrow(w.b1)));
  h = ad::mul_row(h, tape.borrow(mask_row));
  return ad::add_row(ad::matmul(h, tape.borrow(w.w2)), tape.borrow(w.b2)).value();
}

std::vector<std::vector<int>> greedy_decode_batch(const ModelView& view, const SoftPrompt* prompt,
                                                  const std::vector<std::vector<int>>& inputs,
                                                  int max_out) {
  if (max_out < 1) throw std::invalid_argument("greedy_decode: max_out must be >= 1");
  const ModelConfig& c = view.config();
  if (prompt != nullptr) prompt->validate(c);
  std::vector<std::vector<int>> outputs(inputs.size());
  if (inputs.empty()) return outputs;

  ad::Tape tape;
  ModelGraph graph(tape, view);
  TokenBatch batch;
  for (const auto& in : inputs) batch.examples.push_back({in, {}});
  std::optional<ad::Var> p;
  if (prompt != nullptr) p = tape.borrow(prompt->values);
  const ModelGraph::Encoded enc = graph.encode(p, batch);

  const auto v = static_cast<std::size_t>(c.vocab_size);
  const int steps = std::min(max_out, c.max_len - 1);
  std::vector<std::vector<int>> prefixes(inputs.size(), std::vector<int>{vocab::kBos});
  std::vector<char> done(inputs.size(), 0);
  for (int step = 0; step < steps; ++step) {
    ad::Var logits = graph.decode_logits(enc, prefixes);
    const Tensor& lv = logits.value();
    std::size_t row = 0;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      row += prefixes[b].size();
      if (done[b]) continue;
      const float* r = lv.ptr() + (row - 1) * v;
      std::size_t best = 0;
      for (std::size_t j = 1; j < v; ++j) {
        if (r[j] > r[best]) best = j;
      }
      const int tok = static_cast<int>(best);
      if (tok == vocab::kEos) {
        done[b] = 1;
        continue;
      }
      outputs[b].push_back(tok);
      prefixes[b].push_back(tok);
      if (static_cast<int>(outputs[b].size()) >= max_out) done[b] = 1;
    }
    if (std::all_of(done.begin(), done.end(), [](char x) { return x != 0; })) break;
  }
  return outputs;
}

std::vector<int> greedy_decode(const ModelView& view, const SoftPrompt* prompt,
                               const std::vector<int>& input, int max_out) {
  return greedy_decode_batch(view, prompt, {input}, max_out).front();
}

}  // namespace fastpt
