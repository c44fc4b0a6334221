#include <atomic>
#include <cstdlib>
#include <string>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/kernels.hpp"

namespace gnninject::simd {

const Kernels* avx2_kernels_impl();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* initial_table() {
  const Kernels* best = avx2_kernels();
  if (const char* env = std::getenv("GNNINJECT_ISA")) {
    const Isa wanted = parse_isa(env);
    if (wanted == Isa::kScalar) return &scalar_kernels();
    if (best == nullptr) throw UsageError("GNNINJECT_ISA=avx2 but AVX2/FMA is unavailable");
    return best;
  }
  return best != nullptr ? best : &scalar_kernels();
}

std::atomic<const Kernels*>& current() {
  static std::atomic<const Kernels*> table{initial_table()};
  return table;
}

}  // namespace

const Kernels* avx2_kernels() {
  static const Kernels* table = cpu_has_avx2() ? avx2_kernels_impl() : nullptr;
  return table;
}

const Kernels& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
  if (isa == Isa::kScalar) {
    current().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  const Kernels* t = avx2_kernels();
  if (t == nullptr) throw UsageError("AVX2/FMA kernels are unavailable on this machine");
  current().store(t, std::memory_order_release);
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  throw UsageError("unknown ISA '" + std::string(name) + "' (expected scalar or avx2)");
}

}  // namespace gnninject::simd
