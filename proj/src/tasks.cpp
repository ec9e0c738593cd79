#include "fastpt/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fastpt/vocab.hpp"

namespace fastpt {
namespace {

struct KindName {
  TaskKind kind;
  std::string_view name;
};

constexpr KindName kKinds[] = {{TaskKind::copy, "copy"},
                               {TaskKind::reverse, "reverse"},
                               {TaskKind::modular_sum, "modular-sum"},
                               {TaskKind::pattern_classify, "pattern-classify"},
                               {TaskKind::span_fill, "span-fill"}};

int content_count(int vocab_size) { return vocab_size - vocab::kFirstContent; }

std::vector<int> random_body(Rng& rng, int n, int choices) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int& t : out) t = vocab::kFirstContent + static_cast<int>(rng.index(static_cast<std::size_t>(choices)));
  return out;
}

std::vector<int> masked_span(const std::vector<int>& body, Rng& rng, std::vector<int>& span) {
  const auto n = body.size();
  const std::size_t max_span = std::min<std::size_t>(3, n - 1);
  const std::size_t len = 1 + rng.index(max_span);
  const std::size_t at = rng.index(n - len + 1);
  span.assign(body.begin() + static_cast<std::ptrdiff_t>(at),
              body.begin() + static_cast<std::ptrdiff_t>(at + len));
  std::vector<int> input(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(at));
  input.push_back(vocab::kMask);
  input.insert(input.end(), body.begin() + static_cast<std::ptrdiff_t>(at + len), body.end());
  return input;
}

}  // namespace

std::string_view to_string(TaskKind k) {
  for (const auto& e : kKinds) {
    if (e.kind == k) return e.name;
  }
  return "?";
}

TaskKind task_kind_from(std::string_view name) {
  for (const auto& e : kKinds) {
    if (e.name == name) return e.kind;
  }
  throw std::invalid_argument("unknown task kind '" + std::string(name) + "'");
}

const std::vector<TaskKind>& all_task_kinds() {
  static const std::vector<TaskKind> kinds{TaskKind::copy, TaskKind::reverse, TaskKind::modular_sum,
                                           TaskKind::pattern_classify, TaskKind::span_fill};
  return kinds;
}

void TaskSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("TaskSpec: " + m); };
  if (content_count(vocab_size) < 2) fail("vocab_size leaves fewer than 2 content tokens");
  if (min_len < 1 || max_len < min_len) fail("need 1 <= min_len <= max_len");
  if (kind == TaskKind::span_fill && min_len < 2) fail("span-fill needs min_len >= 2");
  if (train_size < 1 || dev_size < 1) fail("train and dev sizes must be >= 1");
  if (kind == TaskKind::modular_sum && (modulus < 2 || modulus > content_count(vocab_size))) {
    fail("modulus must lie in [2, number of content tokens]");
  }
}

TaskData gen_task(const TaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, "task");
  rng = rng.child(to_string(spec.kind));
  const int m = content_count(spec.vocab_size);
  const int choices = spec.kind == TaskKind::modular_sum ? spec.modulus : m;

  // hidden rule for pattern-classify: a fixed half of the content tokens
  std::vector<char> in_rule(static_cast<std::size_t>(spec.vocab_size), 0);
  {
    Rng rule = rng.child("rule");
    std::vector<int> ids(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) ids[static_cast<std::size_t>(i)] = vocab::kFirstContent + i;
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rule.index(i)]);
    for (int i = 0; i < m / 2; ++i) in_rule[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])] = 1;
  }

  const auto wanted = static_cast<std::size_t>(spec.train_size) + static_cast<std::size_t>(spec.dev_size);
  std::vector<Example> pool;
  std::set<std::vector<int>> seen;
  Rng draw = rng.child("examples");
  const std::size_t max_attempts = 100 * wanted + 1000;
  for (std::size_t attempt = 0; attempt < max_attempts && pool.size() < wanted; ++attempt) {
    const int n = spec.min_len + static_cast<int>(draw.index(static_cast<std::size_t>(spec.max_len - spec.min_len + 1)));
    std::vector<int> body = random_body(draw, n, choices);
    Example ex;
    switch (spec.kind) {
      case TaskKind::copy:
        ex = {body, body};
        break;
      case TaskKind::reverse:
        ex = {body, {body.rbegin(), body.rend()}};
        break;
      case TaskKind::modular_sum:
        ex = {body, {modular_sum_label(body, spec.modulus)}};
        break;
      case TaskKind::pattern_classify: {
        int hits = 0;
        for (int t : body) hits += in_rule[static_cast<std::size_t>(t)];
        const int misses = n - hits;
        const bool yes = hits != misses ? hits > misses : in_rule[static_cast<std::size_t>(body[0])] != 0;
        ex = {body, {vocab::kFirstContent + (yes ? 1 : 0)}};
        break;
      }
      case TaskKind::span_fill: {
        // the body repeats a random block, so the hidden span can be read
        // off the other copy; one mask token per hidden token
        const std::size_t half = std::max<std::size_t>(1, body.size() / 2);
        std::vector<int> input(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(half));
        input.insert(input.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(half));
        const std::size_t len = 1 + draw.index(std::min<std::size_t>(3, half));
        const std::size_t at = (draw.index(2) == 0 ? 0 : half) + draw.index(half - len + 1);
        std::vector<int> span(input.begin() + static_cast<std::ptrdiff_t>(at),
                              input.begin() + static_cast<std::ptrdiff_t>(at + len));
        std::fill_n(input.begin() + static_cast<std::ptrdiff_t>(at), len, vocab::kMask);
        ex = {std::move(input), std::move(span)};
        break;
      }
    }
    if (seen.insert(ex.input).second) pool.push_back(std::move(ex));
  }
  if (pool.size() < wanted) {
    throw std::invalid_argument("gen_task: only " + std::to_string(pool.size()) +
                                " distinct inputs exist for the requested " + std::to_string(wanted));
  }
  TaskData out;
  out.train.assign(pool.begin(), pool.begin() + spec.train_size);
  out.dev.assign(pool.begin() + spec.train_size, pool.end());
  return out;
}

int modular_sum_label(const std::vector<int>& input, int modulus) {
  if (modulus < 1) throw std::invalid_argument("modular_sum_label: modulus must be >= 1");
  int s = 0;
  for (int t : input) s = (s + (t - vocab::kFirstContent)) % modulus;
  return vocab::kFirstContent + s;
}

Corpus gen_pretrain_corpus(const GrammarConfig& g, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw std::invalid_argument("gen_pretrain_corpus: size must be >= 1");
  const int m = content_count(g.vocab_size);
  if (m < 2 || g.min_len < 2 || g.max_len < g.min_len || g.successors < 1) {
    throw std::invalid_argument("gen_pretrain_corpus: invalid grammar");
  }
  const Rng root(seed, "grammar");
  const auto mz = static_cast<std::size_t>(m);

  // start tokens: Zipf weights over a random ranking of the content tokens
  Rng shape = root.child("shape");
  std::vector<std::size_t> rank(mz);
  for (std::size_t i = 0; i < mz; ++i) rank[i] = i;
  for (std::size_t i = mz; i > 1; --i) std::swap(rank[i - 1], rank[shape.index(i)]);
  std::vector<double> start(mz);
  for (std::size_t i = 0; i < mz; ++i) start[rank[i]] = 1.0 / std::pow(static_cast<double>(i + 1), g.zipf_power);

  // each token has a few weighted successors; with probability kEscape the
  // next token is uniform so every bigram stays possible
  constexpr double kEscape = 0.15;
  std::vector<std::vector<double>> next(mz, std::vector<double>(mz, 0.0));
  for (std::size_t a = 0; a < mz; ++a) {
    for (int s = 0; s < g.successors; ++s) next[a][shape.index(mz)] += 1.0 / (s + 1);
  }

  auto pick = [](const std::vector<double>& w, Rng& r) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = r.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      u -= w[i];
      if (u < 0.0) return i;
    }
    return w.size() - 1;
  };

  Rng draw = root.child("sequences");
  Corpus corpus;
  corpus.reserve(size);
  for (std::size_t n = 0; n < size; ++n) {
    const int len = g.min_len + static_cast<int>(draw.index(static_cast<std::size_t>(g.max_len - g.min_len + 1)));
    std::vector<int> seq;
    std::size_t cur = pick(start, draw);
    seq.push_back(vocab::kFirstContent + static_cast<int>(cur));
    for (int i = 1; i < len; ++i) {
      cur = draw.uniform() < kEscape ? draw.index(mz) : pick(next[cur], draw);
      seq.push_back(vocab::kFirstContent + static_cast<int>(cur));
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

Example pretrain_example(const std::vector<int>& seq, Rng& rng) {
  if (seq.size() < 2) throw std::invalid_argument("pretrain_example: sequence shorter than 2");
  Example ex;
  switch (rng.index(4)) {
    case 0: {
      ex.input.push_back(vocab::kMarkRestore);
      for (int t : seq) ex.input.push_back(rng.uniform() < 0.15 ? vocab::kMask : t);
      ex.target = seq;
      break;
    }
    case 1:
      ex.input.push_back(vocab::kMarkReverse);
      ex.input.insert(ex.input.end(), seq.begin(), seq.end());
      ex.target.assign(seq.rbegin(), seq.rend());
      break;
    case 2: {
      std::vector<int> span;
      std::vector<int> masked = masked_span(seq, rng, span);
      ex.input.push_back(vocab::kMarkSpan);
      ex.input.insert(ex.input.end(), masked.begin(), masked.end());
      ex.target = std::move(span);
      break;
    }
    default: {
      const std::size_t cut = 1 + rng.index(seq.size() - 1);
      ex.input.push_back(vocab::kMarkContinue);
      ex.input.insert(ex.input.end(), seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(cut));
      ex.target.assign(seq.begin() + static_cast<std::ptrdiff_t>(cut), seq.end());
      break;
    }
  }
  return ex;
}

std::vector<int> tokenize(const std::vector<int>& ids, int vocab_size) {
  for (int id : ids) {
    if (id < vocab::kFirstContent || id >= vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(id) +
                                  " collides with the reserved range or exceeds vocab_size");
    }
  }
  return ids;
}

std::vector<int> detokenize(const std::vector<int>& ids) {
  std::vector<int> out;
  for (int id : ids) {
    if (id == vocab::kEos) break;
    if (id == vocab::kBos || id == vocab::kPad) continue;
    out.push_back(id);
  }
  return out;
}

std::vector<int> with_eos(const std::vector<int>& target) {
  std::vector<int> out = target;
  out.push_back(vocab::kEos);
  return out;
}

namespace {

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) s += ' ';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::vector<int> split_ids(const std::string& field) {
  std::istringstream in(field);
  std::vector<int> ids;
  int v = 0;
  while (in >> v) ids.push_back(v);
  if (!in.eof()) throw std::runtime_error("dataset csv: bad id list '" + field + "'");
  return ids;
}

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, const std::vector<Example>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "input_ids,target_ids\n";
  for (const Example& e : data) out << join_ids(e.input) << ',' << join_ids(e.target) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Example> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "input_ids,target_ids") {
    throw std::runtime_error(path.string() + ": missing input_ids,target_ids header");
  }
  std::vector<Example> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path.string() + ": row without comma");
    out.push_back({split_ids(line.substr(0, comma)), split_ids(line.substr(comma + 1))});
  }
  return out;
}

}  // namespace fastpt
