#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fastpt/model.hpp"
#include "fastpt/partial.hpp"
#include "fastpt/schedule.hpp"
#include "support/reference.hpp"

using namespace fastpt;

namespace {

// Integer evaluation of round(1 + (i-1)(L-1)/(k-1)) with halves going down.
std::vector<int> uniform_oracle(int L, int k) {
  if (k == 1) return {1};
  std::vector<int> out;
  for (int i = 1; i <= k; ++i) {
    const int num = (i - 1) * (L - 1);
    const int den = k - 1;
    int q = num / den;
    if (2 * (num % den) > den) ++q;
    out.push_back(1 + q);
  }
  return out;
}

ModelConfig large_like() {
  ModelConfig c;
  c.enc_layers = c.dec_layers = 24;
  c.d_model = 64;
  c.d_ff = 2816;
  c.n_heads = 4;
  return c;
}

ActivationProfile random_profile(const ModelConfig& c, Rng& rng) {
  ActivationProfile p;
  auto layer = [&] {
    std::vector<double> s(static_cast<std::size_t>(c.d_ff));
    for (double& x : s) x = std::floor(rng.uniform() * 50.0);  // integer scores force ties
    return s;
  };
  for (int i = 0; i < c.enc_layers; ++i) p.encoder.push_back(layer());
  for (int i = 0; i < c.dec_layers; ++i) p.decoder.push_back(layer());
  p.sample_count = 1;
  return p;
}

std::vector<int> ones_at(const NeuronMask& m) {
  std::vector<int> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] != 0) out.push_back(static_cast<int>(i) + 1);
  return out;
}

ModelConfig tiny() {
  ModelConfig c;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.n_heads = 2;
  c.vocab_size = 16;
  c.prompt_len = 2;
  c.max_len = 16;
  return c;
}

}  // namespace

TEST_SUITE("partial") {

TEST_CASE("uniform layer selection examples") {
  CHECK(select_layers_uniform(24, 3) == std::vector<int>{1, 12, 24});
  CHECK(select_layers_uniform(24, 6) == std::vector<int>{1, 6, 10, 15, 19, 24});
  CHECK(select_layers_uniform(24, 6) == uniform_oracle(24, 6));
  CHECK(select_layers_uniform(7, 1) == std::vector<int>{1});
  std::vector<int> all(9);
  std::iota(all.begin(), all.end(), 1);
  CHECK(select_layers_uniform(9, 9) == all);
}

TEST_CASE("uniform layer selection sweep") {
  for (int L = 1; L <= 32; ++L)
    for (int k = 1; k <= L; ++k) {
      CAPTURE(L);
      CAPTURE(k);
      const auto s = select_layers_uniform(L, k);
      REQUIRE(s.size() == static_cast<std::size_t>(k));
      CHECK(std::set<int>(s.begin(), s.end()).size() == s.size());
      CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(s.front() >= 1);
      CHECK(s.back() <= L);
      if (k >= 2) {
        CHECK(s.front() == 1);
        CHECK(s.back() == L);
      }
      CHECK(s == uniform_oracle(L, k));
    }
}

TEST_CASE("layer selection errors") {
  CHECK_THROWS_AS(select_layers_uniform(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(select_layers_uniform(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(select_layers_last(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(layer_strategy_from("middle"), std::invalid_argument);
}

TEST_CASE("last-k selection") {
  CHECK(select_layers_last(24, 3) == std::vector<int>{1, 2, 3});
  CHECK(select_layers_last(5, 1) == std::vector<int>{1});
  CHECK(select_layers_last(4, 4) == std::vector<int>{1, 2, 3, 4});
  CHECK(select_layers(LayerStrategy::last, 6, 2) == std::vector<int>{1, 2});
}

TEST_CASE("kept counts") {
  CHECK(kept_neurons(0.25, 2816) == 704);
  CHECK(kept_neurons(0.5, 2816) == 1408);
  CHECK(kept_neurons(0.75, 2816) == 2112);
  CHECK(kept_neurons(1.0 / 3.0, 10) == 4);
  CHECK(kept_neurons(1.0, 128) == 128);
  CHECK_THROWS_AS(kept_neurons(0.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(kept_neurons(1.5, 10), std::invalid_argument);
  CHECK(kept_layers(0.25, 24) == 6);
  CHECK(kept_layers(0.25, 4) == 1);
  CHECK(kept_layers(0.1, 4) == 1);
  CHECK(kept_layers(0.75, 4) == 3);
  CHECK_THROWS_AS(kept_layers(-0.5, 4), std::invalid_argument);
}

TEST_CASE("top neurons with ties") {
  const std::vector<double> s{5, 1, 9, 9};
  CHECK(ones_at(top_neurons(s, 2)) == std::vector<int>{3, 4});
  CHECK(ones_at(top_neurons(s, 3)) == std::vector<int>{1, 3, 4});
  CHECK(ones_at(top_neurons({2, 2, 2, 2}, 2)) == std::vector<int>{1, 2});
  CHECK(ones_at(top_neurons(s, 4)) == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("kept scores dominate dropped scores") {
  Rng rng(1, "dominance");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + rng.index(40));
    for (double& x : s) x = std::floor(rng.uniform() * 6.0);
    const std::size_t keep = 1 + rng.index(s.size());
    const NeuronMask m = top_neurons(s, keep);
    CHECK(active_count(m) == keep);
    double lo = 1e300, hi = -1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (m[i] != 0) {
        lo = std::min(lo, s[i]);
      } else {
        hi = std::max(hi, s[i]);
      }
    }
    CHECK(lo >= hi);
    // a dropped neuron tying a kept one must sit at a higher index
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (m[i] && !m[j] && s[i] == s[j]) CHECK(i < j);
  }
}

TEST_CASE("random neurons") {
  Rng rng(2, "rand");
  const NeuronMask a = random_neurons(100, 30, rng.child("x"));
  CHECK(active_count(a) == 30);
  CHECK(a == random_neurons(100, 30, rng.child("x")));
  CHECK_FALSE(a == random_neurons(100, 30, rng.child("y")));
  CHECK(active_count(random_neurons(5, 5, rng)) == 5);
  CHECK_THROWS_AS(random_neurons(5, 6, rng), std::invalid_argument);
  // every neuron is reachable
  std::vector<int> hits(20);
  for (int t = 0; t < 400; ++t) {
    const NeuronMask m = random_neurons(20, 5, Rng(static_cast<std::uint64_t>(t), "cover"));
    for (std::size_t i = 0; i < 20; ++i) hits[i] += m[i];
  }
  for (int h : hits) CHECK(std::abs(h - 100) < 40);
}

TEST_CASE("select_neurons") {
  const ModelConfig c = tiny();
  Rng rng(3, "select");
  const ActivationProfile p = random_profile(c, rng);
  const LayerMasks full = select_neurons(&p, c, 1.0, NeuronStrategy::activation, rng);
  for (const auto& m : full.encoder) CHECK(active_count(m) == 12);
  const LayerMasks half = select_neurons(&p, c, 0.5, NeuronStrategy::activation, rng);
  REQUIRE(half.encoder.size() == 2);
  CHECK(half.encoder[1] == top_neurons(p.encoder[1], 6));
  CHECK(half.decoder[0] == top_neurons(p.decoder[0], 6));
  const LayerMasks r1 = select_neurons(nullptr, c, 0.25, NeuronStrategy::random, rng);
  const LayerMasks r2 = select_neurons(nullptr, c, 0.25, NeuronStrategy::random, rng);
  CHECK(r1.encoder == r2.encoder);
  CHECK(r1.decoder == r2.decoder);
  for (const auto& m : r1.decoder) CHECK(active_count(m) == 3);
  CHECK_THROWS_AS(select_neurons(nullptr, c, 0.5, NeuronStrategy::activation, rng), std::invalid_argument);
  CHECK_THROWS_AS(select_neurons(&p, c, 0.0, NeuronStrategy::activation, rng), std::invalid_argument);
}

TEST_CASE("make_partial_spec at T5-Large shape") {
  const ModelConfig c = large_like();
  Rng rng(4, "large");
  const ActivationProfile p = random_profile(c, rng);
  ReductionPlan fr;
  fr.width_fraction = 0.25;
  const PartialSpec a = make_partial_spec(c, fr, &p, rng);
  CHECK(a.enc_layers.size() == 24);
  CHECK(a.dec_layers.size() == 24);
  for (const auto& m : a.enc_masks) CHECK(active_count(m) == 704);
  for (const auto& m : a.dec_masks) CHECK(active_count(m) == 704);

  ReductionPlan cr = fr;
  cr.depth_fraction = 0.25;
  const PartialSpec b = make_partial_spec(c, cr, &p, rng);
  CHECK(b.enc_layers.size() == 6);
  CHECK(b.dec_layers.size() == 6);
  for (const auto& m : b.enc_masks) CHECK(active_count(m) == 704);

  CHECK(make_partial_spec(c, ReductionPlan{}, nullptr, rng) == PartialSpec::identity(c));
  CHECK_THROWS_AS(make_partial_spec(c, fr, nullptr, rng), std::invalid_argument);
}

TEST_CASE("retain-full decoder policy") {
  const ModelConfig c = tiny();
  Rng rng(5, "retain");
  const ActivationProfile p = random_profile(c, rng);
  for (double depth : {0.5, 1.0})
    for (double width : {0.25, 0.5, 1.0}) {
      ReductionPlan plan;
      plan.depth_fraction = depth;
      plan.width_fraction = width;
      plan.decoder_policy = DecoderPolicy::retain_full;
      const PartialSpec s = make_partial_spec(c, plan, &p, rng);
      CHECK(s.dec_layers == std::vector<int>{1, 2});
      for (const auto& m : s.dec_masks) CHECK(active_count(m) == 12);
    }
}

TEST_CASE("subsumption") {
  const ModelConfig c = large_like();
  Rng rng(6, "subsume");
  ReductionPlan a;
  a.depth_fraction = 3.0 / 24.0;
  ReductionPlan b;
  b.depth_fraction = 6.0 / 24.0;
  const PartialSpec sa = make_partial_spec(c, a, nullptr, rng);
  const PartialSpec sb = make_partial_spec(c, b, nullptr, rng);
  CHECK(sa.enc_layers == std::vector<int>{1, 12, 24});
  CHECK_FALSE(is_subsumed(sa, sb, c));
  CHECK(is_subsumed(sa, sa, c));
  CHECK(is_subsumed(sa, PartialSpec::identity(c), c));

  const ModelConfig t = tiny();
  PartialSpec small = PartialSpec::identity(t);
  small.enc_masks[0][3] = 0;
  CHECK(is_subsumed(small, PartialSpec::identity(t), t));
  CHECK_FALSE(is_subsumed(PartialSpec::identity(t), small, t));
  CHECK_THROWS(is_subsumed(sa, small, t));
}

TEST_CASE("spec validation") {
  const ModelConfig c = tiny();
  PartialSpec s = PartialSpec::identity(c);
  CHECK_NOTHROW(s.validate(c));
  CHECK(s.is_identity(c));
  s.enc_layers = {1, 1};
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  s = PartialSpec::identity(c);
  s.enc_layers = {1, 3};
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  s = PartialSpec::identity(c);
  s.enc_masks[1].assign(12, 0);
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  s = PartialSpec::identity(c);
  s.dec_masks.pop_back();
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  s = PartialSpec::identity(c);
  s.decoder_policy = DecoderPolicy::retain_full;
  s.dec_masks[0][0] = 0;
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  s = PartialSpec::identity(c);
  s.enc_layers.clear();
  s.enc_masks.clear();
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  CHECK(decoder_policy_from("retain-full") == DecoderPolicy::retain_full);
  CHECK(to_string(DecoderPolicy::reduce) == "reduce");
  CHECK_THROWS(decoder_policy_from("keep"));
}

TEST_CASE("activation score formula") {
  // one token, W1 = [I | 0], x = e_j: only neuron j scores
  FfnWeights f{Tensor(Shape{4, 6}, 0.0F), Tensor(Shape{6}, 0.0F), Tensor(Shape{6, 4}, 0.0F),
               Tensor(Shape{4}, 0.0F)};
  for (std::size_t i = 0; i < 4; ++i) f.w1.at(i, i) = 1.0F;
  Tensor x(Shape{1, 4}, 0.0F);
  x.at(0, 2) = 0.75F;
  std::vector<double> s(6, 0.0);
  accumulate_activation(f, x, s);
  CHECK(s == std::vector<double>{0, 0, 0.75, 0, 0, 0});

  Rng rng(7, "formula");
  const FfnWeights g{ref::random_tensor({5, 7}, rng), ref::random_tensor({7}, rng), ref::random_tensor({7, 5}, rng),
                     ref::random_tensor({5}, rng)};
  const Tensor xs = ref::random_tensor({9, 5}, rng);
  std::vector<double> got(7, 0.0);
  accumulate_activation(g, xs, got);
  const ref::Mat h = ref::relu(ref::add_row(ref::matmul(ref::from(xs), ref::from(g.w1)), ref::from(g.b1)));
  for (std::size_t j = 0; j < 7; ++j) {
    double want = 0.0;
    for (std::size_t i = 0; i < 9; ++i) want += std::abs(h.at(i, j));
    CHECK(got[j] == doctest::Approx(want).epsilon(1e-6));
  }
  std::vector<double> wrong(6, 0.0);
  CHECK_THROWS_AS(accumulate_activation(g, xs, wrong), std::invalid_argument);
}

TEST_CASE("profiling a silent model gives zero scores") {
  const ModelConfig c = tiny();
  Rng rng(8, "silent");
  ModelWeights w = init_weights(c, rng);
  w.embed = Tensor(w.embed.shape(), 0.0F);
  w.enc_pos = Tensor(w.enc_pos.shape(), 0.0F);
  w.dec_pos = Tensor(w.dec_pos.shape(), 0.0F);
  auto silence = [](AttentionWeights& a) { a.wo = Tensor(a.wo.shape(), 0.0F); };
  auto quiet_ffn = [](FfnWeights& f) {
    f.b1 = Tensor(f.b1.shape(), 0.0F);
    f.b2 = Tensor(f.b2.shape(), 0.0F);
  };
  for (auto& L : w.encoder) {
    silence(L.self_attn);
    quiet_ffn(L.ffn);
  }
  for (auto& L : w.decoder) {
    silence(L.self_attn);
    silence(L.cross_attn);
    quiet_ffn(L.ffn);
  }
  const std::vector<Example> sample{{{9, 10, 11}, {12}}, {{13, 14}, {15, 9}}};
  Rng prng(1, "profile");
  const ActivationProfile p = profile_activations(w, sample, prng);
  for (const auto& layer : p.encoder)
    for (double s : layer) CHECK(s == 0.0);
  for (const auto& layer : p.decoder)
    for (double s : layer) CHECK(s == 0.0);
}

TEST_CASE("profiling is additive and deterministic") {
  const ModelConfig c = tiny();
  Rng rng(9, "additive");
  const ModelWeights w = init_weights(c, rng);
  std::vector<Example> sample{{{9, 10, 11}, {12}}, {{13, 14}, {15, 9}}, {{8, 8, 9, 10, 11}, {12, 13}}};
  Rng r1(4, "profile"), r2(4, "profile"), r3(4, "profile");
  const ActivationProfile once = profile_activations(w, sample, r1, 2);
  CHECK(once == profile_activations(w, sample, r2, 2));
  CHECK(once.sample_count == 3);
  auto twice_sample = sample;
  twice_sample.insert(twice_sample.end(), sample.begin(), sample.end());
  const ActivationProfile twice = profile_activations(w, twice_sample, r3, 2);
  for (std::size_t l = 0; l < once.encoder.size(); ++l)
    for (std::size_t j = 0; j < once.encoder[l].size(); ++j) {
      CHECK(twice.encoder[l][j] == doctest::Approx(2.0 * once.encoder[l][j]).epsilon(1e-12));
      CHECK(twice.decoder[l][j] == doctest::Approx(2.0 * once.decoder[l][j]).epsilon(1e-12));
    }
  CHECK_NOTHROW(once.validate(c));
  Rng r4(4, "profile");
  CHECK_THROWS_AS(profile_activations(w, {}, r4), std::invalid_argument);
}

TEST_CASE("profile rows do not depend on batching") {
  const ModelConfig c = tiny();
  Rng rng(10, "batching");
  const ModelWeights w = init_weights(c, rng);
  std::vector<Example> sample;
  for (int i = 0; i < 7; ++i) sample.push_back({{9 + i % 5, 10, 11 - i % 3}, {12, 8 + i}});
  Rng a(2, "p"), b(2, "p");
  const ActivationProfile one = profile_activations(w, sample, a, 1);
  const ActivationProfile many = profile_activations(w, sample, b, 64);
  for (std::size_t l = 0; l < one.encoder.size(); ++l)
    for (std::size_t j = 0; j < one.encoder[l].size(); ++j)
      CHECK(one.encoder[l][j] == doctest::Approx(many.encoder[l][j]).epsilon(1e-12));
}

}

TEST_SUITE("schedule") {

TEST_CASE("split_steps") {
  CHECK(split_steps(1000, {0.2, 0.2, 0.2, 0.4}) == std::vector<int>{200, 200, 200, 400});
  CHECK(split_steps(10, {0.6, 0.4}) == std::vector<int>{6, 4});
  CHECK(split_steps(7, {0.2, 0.2, 0.2, 0.4}) == std::vector<int>{1, 1, 1, 4});
  CHECK_THROWS_AS(split_steps(10, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(split_steps(2, {0.2, 0.2, 0.2, 0.4}), std::invalid_argument);
}

TEST_CASE("four-stage boundaries") {
  const ModelConfig c = tiny();
  Rng rng(1, "sched");
  const Schedule s = preset_schedule("ld-4stage", c, 1000, nullptr, rng);
  CHECK(s.boundaries() == std::vector<int>{200, 400, 600});
  CHECK(s.total_steps() == 1000);
  CHECK(s.fractions() == std::vector<double>{0.2, 0.2, 0.2, 0.4});
  CHECK(s.stages.back().spec.is_identity(c));
}

TEST_CASE("preset definitions") {
  for (const auto& name : preset_names()) {
    const PresetDefinition d = preset_definition(name);
    CHECK(std::accumulate(d.step_fractions.begin(), d.step_fractions.end(), 0.0) == doctest::Approx(1.0));
    CHECK(d.plans.size() == d.step_fractions.size());
  }
  CHECK(preset_definition("ld-2stage").step_fractions == std::vector<double>{0.6, 0.4});
  CHECK(preset_definition("ld-2stage").plans[0].depth_fraction == 0.75);
  CHECK_THROWS_AS(preset_definition("xx-9stage"), std::invalid_argument);
  CHECK(preset_needs_profile("cr-4stage"));
  CHECK_FALSE(preset_needs_profile("ld-4stage"));
}

TEST_CASE("fr-4stage widths at T5-Large shape") {
  const ModelConfig c = large_like();
  Rng rng(2, "fr");
  const ActivationProfile p = random_profile(c, rng);
  const Schedule s = preset_schedule("fr-4stage", c, 100, &p, rng);
  std::vector<std::size_t> widths;
  for (const Stage& st : s.stages) widths.push_back(active_count(st.spec.enc_masks[0]));
  CHECK(widths == std::vector<std::size_t>{704, 1408, 2112, 2816});
}

TEST_CASE("schedule validation") {
  const ModelConfig c = tiny();
  Schedule s = identity_schedule(c, 5);
  CHECK_NOTHROW(s.validate(c));
  s.stages[0].steps = 0;
  CHECK_THROWS_AS(s.validate(c), std::invalid_argument);
  CHECK_THROWS_AS(Schedule{}.validate(c), std::invalid_argument);
  Rng rng(3, "v");
  ReductionPlan half;
  half.depth_fraction = 0.5;
  const Schedule partial_last = make_schedule(c, {half}, {1.0}, 10, nullptr, rng);
  CHECK_THROWS_AS(partial_last.validate(c), std::invalid_argument);
  CHECK_NOTHROW(partial_last.validate(c, false));
}

}
