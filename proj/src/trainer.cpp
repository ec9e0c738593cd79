#include "fastpt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fastpt/vocab.hpp"

namespace fastpt {
namespace {

class BatchSampler {
 public:
  BatchSampler(std::uint64_t seed, const std::vector<Example>& pool, int batch_size)
      : rng_(seed, "batches"), pool_(&pool), batch_size_(static_cast<std::size_t>(batch_size)) {
    if (pool.empty()) throw std::invalid_argument("training set is empty");
  }

  TokenBatch next() {
    TokenBatch b;
    b.examples.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i) b.examples.push_back((*pool_)[rng_.index(pool_->size())]);
    return b;
  }

 private:
  Rng rng_;
  const std::vector<Example>* pool_;
  std::size_t batch_size_;
};

std::size_t longest_target(const std::vector<Example>& data) {
  std::size_t n = 0;
  for (const Example& e : data) n = std::max(n, e.target.size());
  return n;
}

}  // namespace

void Hyper::validate() const {
  if (!(learning_rate >= 0.0F) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (eval_every < 0) throw std::invalid_argument("eval_every must be >= 0");
}

Metrics evaluate(const ModelView& view, const SoftPrompt* prompt, const std::vector<Example>& data,
                 std::size_t batch_size) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  // one extra decode step so an over-long output cannot pass as a match
  const int max_out = static_cast<int>(longest_target(data)) + 1;
  Metrics m;
  double loss_sum = 0.0;
  double token_count = 0.0;
  std::size_t hits = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t stop = std::min(data.size(), start + batch_size);
    TokenBatch batch;
    std::vector<std::vector<int>> inputs;
    double tokens = 0.0;
    for (std::size_t i = start; i < stop; ++i) {
      batch.examples.push_back(data[i]);
      inputs.push_back(data[i].input);
      tokens += static_cast<double>(data[i].target.size() + 1);
    }
    ad::Tape tape;
    ModelGraph graph(tape, view);
    std::optional<ad::Var> p;
    if (prompt != nullptr) p = tape.borrow(prompt->values);
    loss_sum += graph.loss(p, batch).value().item() * tokens;
    token_count += tokens;
    const auto decoded = greedy_decode_batch(view, prompt, inputs, max_out);
    for (std::size_t i = 0; i < decoded.size(); ++i) {
      if (decoded[i] == data[start + i].target) ++hits;
    }
  }
  m.count = data.size();
  m.em = static_cast<double>(hits) / static_cast<double>(data.size());
  m.loss = loss_sum / token_count;
  return m;
}

Metrics evaluate(const ModelWeights& weights, const PartialSpec& spec, const SoftPrompt* prompt,
                 const std::vector<Example>& data) {
  const ModelView view(weights, spec);
  return evaluate(view, prompt, data);
}

SoftPrompt initial_prompt(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed, "run");
  return init_prompt(config, rng);
}

SoftPrompt recycle_prompt(const SoftPrompt& p, const ModelConfig& to) {
  if (p.width() != static_cast<std::size_t>(to.d_model)) {
    throw std::invalid_argument("recycle_prompt: prompt width " + std::to_string(p.width()) +
                                " != target d_model " + std::to_string(to.d_model));
  }
  return p;
}

TrainResult run_schedule(const ModelWeights& weights, const Schedule& schedule,
                         const SoftPrompt& prompt_init, const TaskData& data, const Hyper& hyper,
                         const StepHook& hook) {
  hyper.validate();
  const ModelConfig& config = weights.config;
  schedule.validate(config, false);
  prompt_init.validate(config);

  TrainResult out;
  out.prompt = prompt_init;
  RunRecord& rec = out.record;
  const int total = schedule.total_steps();
  rec.losses.reserve(static_cast<std::size_t>(total));
  rec.stage_boundaries = schedule.boundaries();
  const SeqProfile seq = seq_profile(data.train, static_cast<int>(prompt_init.length()));

  BatchSampler sampler(hyper.seed, data.train, hyper.batch_size);
  Optimizer opt(hyper.optimizer, hyper.learning_rate);
  double flops = 0.0;
  int step = 0;
  for (std::size_t si = 0; si < schedule.stages.size(); ++si) {
    const Stage& stage = schedule.stages[si];
    const ModelView view(weights, stage.spec);
    const double per_step = step_flops(config, stage.spec, seq);
    if (si > 0) {
      out.prompt = recycle_prompt(out.prompt, config);
      if (hyper.reset_optimizer) opt.reset();
    }
    Tensor* params[] = {&out.prompt.values};
    for (int k = 0; k < stage.steps; ++k) {
      if (hook) hook(step, static_cast<int>(si) + 1, out.prompt);
      const TokenBatch batch = sampler.next();
      PromptGrad pg = prompt_loss_and_grad(view, out.prompt, batch);
      opt.step(params, std::span<const Tensor>(&pg.grad, 1));
      ++step;
      flops += per_step;
      rec.losses.push_back(pg.loss);
      rec.stage_of_step.push_back(static_cast<int>(si) + 1);
      rec.cum_flops.push_back(flops);
      const bool last = step == total;
      if (!data.dev.empty() && ((hyper.eval_every > 0 && step % hyper.eval_every == 0) || last)) {
        const Metrics m = evaluate(view, &out.prompt, data.dev);
        rec.evals.push_back({step, m.em, m.loss});
      }
    }
    rec.stage_prompts.push_back(out.prompt);
  }
  return out;
}

TrainResult pt_train(const ModelWeights& weights, const PartialSpec& spec,
                     const SoftPrompt& prompt_init, const TaskData& data, int steps,
                     const Hyper& hyper) {
  if (steps < 0) throw std::invalid_argument("pt_train: steps must be >= 0");
  spec.validate(weights.config);
  if (steps == 0) {
    prompt_init.validate(weights.config);
    return {prompt_init, RunRecord{}};
  }
  Schedule s;
  s.stages.push_back({spec, steps, "pt"});
  return run_schedule(weights, s, prompt_init, data, hyper);
}

TrainResult fpt_train(const ModelWeights& weights, const Schedule& schedule, const TaskData& data,
                      const Hyper& hyper, const StepHook& hook) {
  if (schedule.stages.empty()) throw std::invalid_argument("fpt_train: empty schedule");
  return run_schedule(weights, schedule, initial_prompt(weights.config, hyper.seed), data, hyper,
                      hook);
}

namespace {

TokenBatch pretrain_batch(const Corpus& corpus, int size, const ModelConfig& config,
                          double shift_prob, Rng& rng) {
  const int max_len = config.max_len;
  TokenBatch b;
  for (int i = 0; i < size; ++i) {
    Example ex = pretrain_example(corpus[rng.index(corpus.size())], rng);
    const int room = max_len - static_cast<int>(ex.input.size());
    if (room < 0 || static_cast<int>(ex.target.size()) + 1 > max_len) {
      throw std::invalid_argument("pretrain: corpus sequence longer than max_len allows");
    }
    // the marker sits where the last prompt row will be, so the body lines
    // up with the positions it has during prompt tuning
    int offset = std::min(room, config.prompt_len - 1);
    if (rng.uniform() < shift_prob) offset = static_cast<int>(rng.index(static_cast<std::size_t>(room) + 1));
    b.enc_offsets.push_back(offset);
    b.examples.push_back(std::move(ex));
  }
  return b;
}

void train_all_weights(ModelWeights& w, Optimizer& opt, const TokenBatch& batch,
                       std::vector<float>& losses) {
  WeightsGrad g = weights_loss_and_grad(w, batch);
  auto named = w.named();
  std::vector<Tensor*> params;
  params.reserve(named.size());
  for (auto& [name, t] : named) params.push_back(t);
  opt.step(params, g.grads);
  losses.push_back(g.loss);
}

}  // namespace

PretrainResult pretrain(const ModelConfig& config, const Corpus& corpus, int steps,
                        const Hyper& hyper, double shift_prob) {
  hyper.validate();
  if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
  if (steps < 0) throw std::invalid_argument("pretrain: steps must be >= 0");
  Rng init(hyper.seed, "backbone");
  PretrainResult out{init_weights(config, init), {}};
  Rng rng(hyper.seed, "pretrain-batches");
  Optimizer opt(hyper.optimizer, hyper.learning_rate);
  for (int s = 0; s < steps; ++s) {
    const TokenBatch batch = pretrain_batch(corpus, hyper.batch_size, config, shift_prob, rng);
    train_all_weights(out.weights, opt, batch, out.losses);
  }
  return out;
}

double corpus_loss(const ModelWeights& weights, const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("corpus_loss: empty corpus");
  Rng rng(seed, "heldout");
  const ModelView view(weights, PartialSpec::identity(weights.config));
  double sum = 0.0;
  double tokens = 0.0;
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < corpus.size(); start += kBatch) {
    TokenBatch b;
    double t = 0.0;
    for (std::size_t i = start; i < std::min(corpus.size(), start + kBatch); ++i) {
      b.examples.push_back(pretrain_example(corpus[i], rng));
      const int room = weights.config.max_len - static_cast<int>(b.examples.back().input.size());
      b.enc_offsets.push_back(std::max(0, std::min(room, weights.config.prompt_len - 1)));
      t += static_cast<double>(b.examples.back().target.size() + 1);
    }
    ad::Tape tape;
    ModelGraph graph(tape, view);
    sum += graph.loss(std::nullopt, b).value().item() * t;
    tokens += t;
  }
  return sum / tokens;
}

RunRecord finetune_baseline(const ModelWeights& weights, const TaskData& data, int steps,
                            const Hyper& hyper, ModelWeights* tuned) {
  hyper.validate();
  if (steps < 0) throw std::invalid_argument("finetune_baseline: steps must be >= 0");
  ModelWeights w = weights;
  RunRecord rec;
  const PartialSpec full = PartialSpec::identity(w.config);
  // no prompt rows here; one input token stands in for the required prompt slot
  SeqProfile seq = seq_profile(data.train, 1);
  seq.n_in = std::max(1.0, seq.n_in - 1.0);
  const double per_step = step_flops(w.config, full, seq);
  if (steps > 0) {
    BatchSampler sampler(hyper.seed, data.train, hyper.batch_size);
    Optimizer opt(hyper.optimizer, hyper.learning_rate);
    double flops = 0.0;
    for (int s = 1; s <= steps; ++s) {
      train_all_weights(w, opt, sampler.next(), rec.losses);
      flops += per_step;
      rec.stage_of_step.push_back(1);
      rec.cum_flops.push_back(flops);
      if (!data.dev.empty() && ((hyper.eval_every > 0 && s % hyper.eval_every == 0) || s == steps)) {
        const Metrics m = evaluate(w, full, nullptr, data.dev);
        rec.evals.push_back({s, m.em, m.loss});
      }
    }
  }
  if (tuned != nullptr) *tuned = std::move(w);
  return rec;
}

std::optional<int> steps_to_loss(const std::vector<float>& losses, double tau, int window) {
  if (window < 1) throw std::invalid_argument("steps_to_loss: window must be >= 1");
  double sum = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    sum += losses[i];
    if (i >= static_cast<std::size_t>(window)) sum -= losses[i - static_cast<std::size_t>(window)];
    const auto n = static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
    if (sum / n <= tau) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

}  // namespace fastpt
