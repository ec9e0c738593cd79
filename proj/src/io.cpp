#include "fastpt/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "fastpt/rng.hpp"

namespace fastpt {
namespace {

constexpr char kMagic[4] = {'F', 'P', 'T', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

class Reader {
 public:
  Reader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  bool done() const { return pos_ == data_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void floats(float* dst, std::size_t n) {
    need(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = u32();
      std::memcpy(dst + i, &bits, 4);
    }
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw std::runtime_error(what_ + ": truncated tensor file");
  }

  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  std::string out(kMagic, 4);
  put_u32(out, kTensorFileVersion);
  for (const auto& [name, t] : entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t->data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  write_text(path, out);
}

NamedTensors read_tensor_file(const std::filesystem::path& path) {
  Reader r(read_text(path), path.string());
  if (r.bytes(4) != std::string(kMagic, 4)) throw std::runtime_error(path.string() + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kTensorFileVersion) {
    throw std::runtime_error(path.string() + ": unsupported version " + std::to_string(version));
  }
  NamedTensors out;
  while (!r.done()) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
    Tensor t(shape);
    r.floats(t.ptr(), t.size());
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_weights(const std::filesystem::path& path, const ModelWeights& weights) {
  write_tensor_file(path, weights.named());
}

ModelWeights load_weights(const std::filesystem::path& path, const ModelConfig& config) {
  // build a correctly shaped skeleton, then fill it entry by entry
  Rng rng(0, "skeleton");
  ModelWeights w = init_weights(config, rng);
  auto named = w.named();
  NamedTensors file = read_tensor_file(path);
  if (file.size() != named.size()) {
    throw std::runtime_error(path.string() + ": " + std::to_string(file.size()) +
                             " tensors, config expects " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (file[i].first != named[i].first) {
      throw std::runtime_error(path.string() + ": expected tensor '" + named[i].first + "', found '" +
                               file[i].first + "'");
    }
    if (file[i].second.shape() != named[i].second->shape()) {
      throw std::runtime_error(path.string() + ": tensor '" + named[i].first + "' has shape " +
                               shape_str(file[i].second.shape()) + ", config expects " +
                               shape_str(named[i].second->shape()));
    }
    *named[i].second = std::move(file[i].second);
  }
  return w;
}

void save_prompt(const std::filesystem::path& path, const SoftPrompt& prompt) {
  write_tensor_file(path, {{"prompt", &prompt.values}});
}

SoftPrompt load_prompt(const std::filesystem::path& path) {
  NamedTensors file = read_tensor_file(path);
  if (file.size() != 1 || file[0].first != "prompt" || file[0].second.rank() != 2) {
    throw std::runtime_error(path.string() + ": expected a single rank-2 'prompt' tensor");
  }
  return SoftPrompt{std::move(file[0].second)};
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

}  // namespace fastpt
