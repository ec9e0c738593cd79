#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fastpt/model.hpp"

namespace fastpt {

/// Mean over the l prompt rows.
std::vector<double> mean_pool_prompt(const SoftPrompt& p);

/// Throws when either vector has zero norm.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct PromptEntry {
  std::string label;  // stage or partial-model name
  SoftPrompt prompt;
  bool full_model = false;
};

struct PromptSet {
  std::string task;
  std::vector<PromptEntry> entries;
};

struct SimilarityMatrix {
  std::vector<std::string> rows;  // tasks whose partial-model prompts are compared
  std::vector<std::string> cols;  // tasks whose full-model prompt is the reference
  std::vector<std::vector<double>> values;

  /// Rows whose largest entry sits in the column of the same task.
  int diagonal_wins() const;
};

/// Entry (j, k): mean over the partial entries i of task j of
/// cosine(pool(P_i^j), pool(P_N^k)).
SimilarityMatrix prompt_similarity(const std::map<std::string, PromptSet>& partial,
                                   const std::map<std::string, SoftPrompt>& full);

void write_similarity_csv(const std::filesystem::path& path, const SimilarityMatrix& m);

struct EmbeddingRow {
  std::string task;
  std::string model_label;
  std::uint64_t seed = 0;
  std::vector<double> pooled;
};

/// Header: task,model_label,seed,c0..c{d-1}; components printed with 9
/// significant digits.
void export_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRow>& rows);
std::vector<EmbeddingRow> read_embeddings(const std::filesystem::path& path);

struct AblationRun {
  std::string task;
  std::string strategy;
  std::uint64_t seed = 0;
  double em = 0.0;
};

struct AblationGroup {
  std::string task;
  std::string strategy;
  std::vector<std::uint64_t> seeds;
  std::vector<double> ems;
  double mean_em = 0.0;
};

struct AblationComparison {
  std::string task;
  std::string first;
  std::string second;
  double mean_difference = 0.0;  // first - second
  int first_wins = 0;            // paired seeds with first > second
  int second_wins = 0;
  int ties = 0;
  bool direction_holds = false;  // mean(first) >= mean(second)
};

struct AblationReport {
  std::vector<AblationGroup> groups;
  std::vector<AblationComparison> comparisons;
};

/// Groups runs by (task, strategy) and compares each (first, second) pair
/// of strategies within every task on the seeds both share.
AblationReport ablation_report(const std::vector<AblationRun>& runs,
                               const std::vector<std::pair<std::string, std::string>>& pairs);

void write_ablation_csv(const std::filesystem::path& path, const AblationReport& report);

}  // namespace fastpt
