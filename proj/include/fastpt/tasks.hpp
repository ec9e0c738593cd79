#pragma once

// Synthetic seq2seq tasks and the pretraining corpus. Content tokens are
// ids >= vocab::kFirstContent; the reserved ids never appear in a body
// except kMask inside span-fill inputs.
//
// copy: target = input. reverse: target = reversed input. modular-sum:
// inputs use the first `modulus` content tokens, target is their sum mod
// modulus. pattern-classify: label token kFirstContent + 1 when most input
// tokens lie in a hidden half of the content vocabulary (ties: the first
// token decides), else kFirstContent. span-fill: the input is a random
// block written twice with 1-3 consecutive tokens of one copy masked; the
// target is the masked tokens.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fastpt/model.hpp"
#include "fastpt/rng.hpp"

namespace fastpt {

enum class TaskKind { copy, reverse, modular_sum, pattern_classify, span_fill };

std::string_view to_string(TaskKind k);
TaskKind task_kind_from(std::string_view name);
const std::vector<TaskKind>& all_task_kinds();

struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  int vocab_size = 32;
  int min_len = 4;
  int max_len = 8;
  int train_size = 2000;
  int dev_size = 200;
  int modulus = 10;  // modular-sum only
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct TaskData {
  std::vector<Example> train;
  std::vector<Example> dev;
};

/// Train and dev share no input sequence.
TaskData gen_task(const TaskSpec& spec);

/// Label token of a modular-sum input.
int modular_sum_label(const std::vector<int>& input, int modulus);

struct GrammarConfig {
  int vocab_size = 32;
  int min_len = 6;
  int max_len = 14;
  int successors = 3;      // nonzero transitions per token
  double zipf_power = 1.1;  // start-token distribution
};

using Corpus = std::vector<std::vector<int>>;

/// Sequences from a seeded first-order Markov grammar.
Corpus gen_pretrain_corpus(const GrammarConfig& grammar, std::size_t size, std::uint64_t seed);

/// One denoising/reordering example drawn from a corpus sequence; the
/// objective marker is the first input token.
Example pretrain_example(const std::vector<int>& seq, Rng& rng);

/// Validates ids against the reserved range; ids pass through unchanged.
std::vector<int> tokenize(const std::vector<int>& ids, int vocab_size);
std::vector<int> detokenize(const std::vector<int>& ids);
/// Target as fed to the loss: body followed by exactly one EOS.
std::vector<int> with_eos(const std::vector<int>& target);

/// "input_ids,target_ids" with space-separated ids, header line first.
void write_dataset_csv(const std::filesystem::path& path, const std::vector<Example>& data);
std::vector<Example> read_dataset_csv(const std::filesystem::path& path);

}  // namespace fastpt
