#include "fastpt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fastpt {

std::vector<double> mean_pool_prompt(const SoftPrompt& p) {
  if (p.values.rank() != 2 || p.length() == 0) throw std::invalid_argument("mean_pool_prompt: empty prompt");
  const std::size_t l = p.length();
  const std::size_t d = p.width();
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < l; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[c] += p.values.at(r, c);
  }
  for (double& v : out) v /= static_cast<double>(l);
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

int SimilarityMatrix::diagonal_wins() const {
  int wins = 0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& row = values[j];
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best < cols.size() && cols[best] == rows[j]) ++wins;
  }
  return wins;
}

SimilarityMatrix prompt_similarity(const std::map<std::string, PromptSet>& partial,
                                   const std::map<std::string, SoftPrompt>& full) {
  if (partial.empty() || full.empty()) throw std::invalid_argument("prompt_similarity: no prompts");
  SimilarityMatrix m;
  std::vector<std::vector<double>> full_pooled;
  for (const auto& [task, p] : full) {
    m.cols.push_back(task);
    try {
      full_pooled.push_back(mean_pool_prompt(p));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("prompt_similarity: full-model prompt of '" + task + "' is empty");
    }
  }
  for (const auto& [task, set] : partial) {
    std::vector<std::pair<std::string, std::vector<double>>> pooled;
    for (const PromptEntry& e : set.entries) {
      if (!e.full_model) pooled.emplace_back(e.label, mean_pool_prompt(e.prompt));
    }
    if (pooled.empty()) {
      throw std::invalid_argument("prompt_similarity: task '" + task + "' has no partial-model prompts");
    }
    std::vector<double> row;
    for (std::size_t k = 0; k < full_pooled.size(); ++k) {
      double sum = 0.0;
      for (const auto& [label, v] : pooled) {
        try {
          sum += cosine(v, full_pooled[k]);
        } catch (const std::invalid_argument&) {
          throw std::invalid_argument("prompt_similarity: zero-norm pooled prompt (" + task + "/" +
                                      label + " vs full " + m.cols[k] + ")");
        }
      }
      row.push_back(sum / static_cast<double>(pooled.size()));
    }
    m.rows.push_back(task);
    m.values.push_back(std::move(row));
  }
  return m;
}

void write_similarity_csv(const std::filesystem::path& path, const SimilarityMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "partial\\full";
  for (const auto& c : m.cols) out << ',' << c;
  out << '\n';
  char buf[32];
  for (std::size_t j = 0; j < m.rows.size(); ++j) {
    out << m.rows[j];
    for (double v : m.values[j]) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void export_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("export_embeddings: no rows");
  const std::size_t d = rows.front().pooled.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "task,model_label,seed";
  for (std::size_t i = 0; i < d; ++i) out << ",c" << i;
  out << '\n';
  char buf[32];
  for (const EmbeddingRow& r : rows) {
    if (r.pooled.size() != d) throw std::invalid_argument("export_embeddings: ragged vectors");
    out << r.task << ',' << r.model_label << ',' << r.seed;
    for (double v : r.pooled) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EmbeddingRow> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("task,model_label,seed", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing embeddings header");
  }
  std::vector<EmbeddingRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    EmbeddingRow r;
    std::getline(ss, r.task, ',');
    std::getline(ss, r.model_label, ',');
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    while (std::getline(ss, field, ',')) r.pooled.push_back(std::stod(field));
    rows.push_back(std::move(r));
  }
  return rows;
}

AblationReport ablation_report(const std::vector<AblationRun>& runs,
                               const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (runs.empty()) throw std::invalid_argument("ablation_report: no runs");
  AblationReport rep;
  auto find = [&](const std::string& task, const std::string& strategy) -> AblationGroup* {
    for (auto& g : rep.groups) {
      if (g.task == task && g.strategy == strategy) return &g;
    }
    return nullptr;
  };
  for (const AblationRun& r : runs) {
    AblationGroup* g = find(r.task, r.strategy);
    if (g == nullptr) {
      rep.groups.push_back({r.task, r.strategy, {}, {}, 0.0});
      g = &rep.groups.back();
    }
    g->seeds.push_back(r.seed);
    g->ems.push_back(r.em);
  }
  for (auto& g : rep.groups) {
    double s = 0.0;
    for (double e : g.ems) s += e;
    g.mean_em = s / static_cast<double>(g.ems.size());
  }
  std::vector<std::string> tasks;
  for (const auto& g : rep.groups) {
    if (std::find(tasks.begin(), tasks.end(), g.task) == tasks.end()) tasks.push_back(g.task);
  }
  for (const auto& [first, second] : pairs) {
    for (const std::string& task : tasks) {
      const AblationGroup* a = find(task, first);
      const AblationGroup* b = find(task, second);
      if (a == nullptr && b == nullptr) continue;
      if (a == nullptr || b == nullptr) {
        throw std::invalid_argument("ablation_report: task '" + task + "' lacks runs for '" +
                                    (a == nullptr ? first : second) + "'");
      }
      AblationComparison c{task, first, second, a->mean_em - b->mean_em, 0, 0, 0,
                           a->mean_em >= b->mean_em};
      for (std::size_t i = 0; i < a->seeds.size(); ++i) {
        const auto it = std::find(b->seeds.begin(), b->seeds.end(), a->seeds[i]);
        if (it == b->seeds.end()) continue;
        const double other = b->ems[static_cast<std::size_t>(it - b->seeds.begin())];
        if (a->ems[i] > other) {
          ++c.first_wins;
        } else if (a->ems[i] < other) {
          ++c.second_wins;
        } else {
          ++c.ties;
        }
      }
      rep.comparisons.push_back(c);
    }
  }
  return rep;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  // one table: per-seed runs, group means, then pairwise comparisons whose
  // em column holds the mean difference (strategy - versus)
  out << "kind,task,strategy,versus,seed,em,strategy_wins,versus_wins,ties,direction_holds\n";
  for (const auto& g : report.groups) {
    for (std::size_t i = 0; i < g.seeds.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", g.ems[i]);
      out << "run," << g.task << ',' << g.strategy << ",," << g.seeds[i] << ',' << buf << ",,,,\n";
    }
    std::snprintf(buf, sizeof buf, "%.6f", g.mean_em);
    out << "mean," << g.task << ',' << g.strategy << ",,," << buf << ",,,,\n";
  }
  for (const auto& c : report.comparisons) {
    std::snprintf(buf, sizeof buf, "%.6f", c.mean_difference);
    out << "compare," << c.task << ',' << c.first << ',' << c.second << ",," << buf << ','
        << c.first_wins << ',' << c.second_wins << ',' << c.ties << ','
        << (c.direction_holds ? "yes" : "no") << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace fastpt
