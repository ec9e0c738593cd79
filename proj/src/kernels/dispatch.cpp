#include <atomic>
#include <cstdlib>
#include <string_view>

#include "fastpt/kernels.hpp"

namespace fastpt::kernels {

#if defined(FASTPT_HAVE_AVX2)
const KernelSet& avx2_set();
#endif

namespace {

std::atomic<const KernelSet*> g_forced{nullptr};

bool cpu_has_avx2() {
#if defined(FASTPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelSet& detect() {
  if (const char* env = std::getenv("FASTPT_KERNELS");
      env != nullptr && std::string_view(env) == "scalar") {
    return scalar();
  }
  if (const KernelSet* set = avx2()) return *set;
  return scalar();
}

}  // namespace

const KernelSet* avx2() {
#if defined(FASTPT_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_set() : nullptr;
#else
  return nullptr;
#endif
}

const KernelSet& active() {
  if (const KernelSet* forced = g_forced.load(std::memory_order_acquire)) return *forced;
  static const KernelSet& detected = detect();
  return detected;
}

void force(const KernelSet* set) { g_forced.store(set, std::memory_order_release); }

}  // namespace fastpt::kernels
