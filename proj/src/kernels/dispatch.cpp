#include "crelab/common/error.hpp"
#include "crelab/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace crelab::kernels {

namespace {

using DotFn = float (*)(const float*, const float*, std::size_t);
using AxpyFn = void (*)(float, const float*, float*, std::size_t);

struct Table {
  Isa isa;
  DotFn dot;
  AxpyFn axpy;
};

constexpr Table kScalar{Isa::scalar, &scalar::dot, &scalar::axpy};
#if defined(CRELAB_HAVE_AVX2)
constexpr Table kAvx2{Isa::avx2, &avx2::dot, &avx2::axpy};
#endif
#if defined(CRELAB_HAVE_NEON)
constexpr Table kNeon{Isa::neon, &neon::dot, &neon::axpy};
#endif

const Table* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return &kScalar;
    case Isa::avx2:
#if defined(CRELAB_HAVE_AVX2)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2;
#endif
      return nullptr;
    case Isa::neon:
#if defined(CRELAB_HAVE_NEON)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const Table* initial_table() noexcept {
  if (const char* env = std::getenv("CRELAB_ISA")) {
    const std::string_view want(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (want == to_string(isa)) {
        if (const Table* t = table_for(isa)) return t;
      }
    }
  }
  return table_for(best_isa());
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{initial_table()};
  return table;
}

inline const Table& active() { return *current().load(std::memory_order_relaxed); }

}  // namespace

const char* to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept { return table_for(isa) != nullptr; }

Isa best_isa() noexcept {
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() noexcept { return active().isa; }

void set_isa(Isa isa) {
  const Table* t = table_for(isa);
  if (!t) throw ConfigError(std::string("kernel ISA not available: ") + to_string(isa));
  current().store(t, std::memory_order_relaxed);
}

float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InputError("dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  if (x.size() != y.size()) throw InputError("axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void matvec(std::span<const float> w, std::size_t rows, std::size_t cols,
            std::span<const float> x, std::span<float> y) {
  if (w.size() != rows * cols || x.size() != cols || y.size() != rows) {
    throw InputError("matvec: shape mismatch");
  }
  const Table& t = active();
  for (std::size_t r = 0; r < rows; ++r) y[r] = t.dot(w.data() + r * cols, x.data(), cols);
}

void matvec_t_acc(std::span<const float> w, std::size_t rows, std::size_t cols,
                  std::span<const float> x, std::span<float> y) {
  if (w.size() != rows * cols || x.size() != rows || y.size() != cols) {
    throw InputError("matvec_t_acc: shape mismatch");
  }
  const Table& t = active();
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0f) t.axpy(x[r], w.data() + r * cols, y.data(), cols);
  }
}

}  // namespace crelab::kernels
