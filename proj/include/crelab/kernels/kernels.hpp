#pragma once

// Dense float32 inner loops used by the transformer and the probe trainer.
//
// Every kernel has a scalar reference implementation plus optional SIMD
// variants. The variant is picked once at startup from the CPU feature set
// (override with CRELAB_ISA=scalar|avx2|neon) and can be switched at runtime
// with set_isa(). SIMD variants reassociate sums, so they agree with the
// scalar path to rounding, not bitwise; within one ISA results are
// deterministic.

#include <cstddef>
#include <span>

namespace crelab::kernels {

enum class Isa { scalar, avx2, neon };

const char* to_string(Isa isa) noexcept;

bool isa_available(Isa isa) noexcept;
Isa best_isa() noexcept;
Isa active_isa() noexcept;

/// Throws ConfigError if the ISA is not available on this machine/build.
void set_isa(Isa isa);

/// RAII switch used by tests and benchmarks.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_isa(isa); }
  ~ScopedIsa() { set_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

float dot(std::span<const float> a, std::span<const float> b);

/// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);

/// y = W x for row-major W (rows x cols).
void matvec(std::span<const float> w, std::size_t rows, std::size_t cols,
            std::span<const float> x, std::span<float> y);

/// y += W^T x for row-major W (rows x cols); x has `rows` entries.
void matvec_t_acc(std::span<const float> w, std::size_t rows, std::size_t cols,
                  std::span<const float> x, std::span<float> y);

namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
}  // namespace neon
#endif

}  // namespace crelab::kernels
