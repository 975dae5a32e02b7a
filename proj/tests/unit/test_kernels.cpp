#include "crelab/common/error.hpp"
#include "crelab/common/rng.hpp"
#include "crelab/kernels/kernels.hpp"
#include "crelab/tinylm/model.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace crelab;
using kernels::Isa;

namespace {

std::vector<float> randvec(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(standard_normal(rng));
  return v;
}

std::vector<Isa> simd_isas() {
  std::vector<Isa> out;
  for (Isa i : {Isa::avx2, Isa::neon})
    if (kernels::isa_available(i)) out.push_back(i);
  return out;
}

double tol(std::size_t n) { return 1e-5 * std::sqrt(static_cast<double>(n)) + 1e-6; }

}  // namespace

TEST_CASE("scalar is always available and selectable") {
  CHECK(kernels::isa_available(Isa::scalar));
  kernels::ScopedIsa s(Isa::scalar);
  CHECK(kernels::active_isa() == Isa::scalar);
}

TEST_CASE("unavailable isa is rejected") {
  for (Isa i : {Isa::avx2, Isa::neon}) {
    if (!kernels::isa_available(i)) CHECK_THROWS_AS(kernels::set_isa(i), ConfigError);
  }
}

TEST_CASE("dot and axpy: simd matches scalar over odd sizes") {
  Rng rng(42);
  for (Isa isa : simd_isas()) {
    CAPTURE(kernels::to_string(isa));
    for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u, 257u, 1024u}) {
      const auto a = randvec(rng, n);
      const auto b = randvec(rng, n);
      float ref, got;
      {
        kernels::ScopedIsa s(Isa::scalar);
        ref = kernels::dot(a, b);
      }
      {
        kernels::ScopedIsa s(isa);
        got = kernels::dot(a, b);
      }
      CHECK(std::abs(ref - got) <= tol(n));

      auto y1 = randvec(rng, n);
      auto y2 = y1;
      {
        kernels::ScopedIsa s(Isa::scalar);
        kernels::axpy(0.37f, a, y1);
      }
      {
        kernels::ScopedIsa s(isa);
        kernels::axpy(0.37f, a, y2);
      }
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-6);
    }
  }
}

TEST_CASE("matvec variants match the scalar path and a naive loop") {
  Rng rng(5);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 5}, {16, 64}, {33, 17}, {258, 64}}) {
    const auto w = randvec(rng, rows * cols);
    const auto x = randvec(rng, cols);
    const auto xt = randvec(rng, rows);
    std::vector<double> naive(rows, 0.0), naive_t(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        naive[r] += static_cast<double>(w[r * cols + c]) * x[c];
        naive_t[c] += static_cast<double>(w[r * cols + c]) * xt[r];
      }
    std::vector<Isa> isas{Isa::scalar};
    for (Isa i : simd_isas()) isas.push_back(i);
    for (Isa isa : isas) {
      kernels::ScopedIsa s(isa);
      std::vector<float> y(rows), yt(cols, 0.0f);
      kernels::matvec(w, rows, cols, x, y);
      kernels::matvec_t_acc(w, rows, cols, xt, yt);
      for (std::size_t r = 0; r < rows; ++r) CHECK(std::abs(y[r] - naive[r]) <= tol(cols));
      for (std::size_t c = 0; c < cols; ++c) CHECK(std::abs(yt[c] - naive_t[c]) <= tol(rows));
    }
  }
}

TEST_CASE("model forward agrees across kernels") {
  const auto model = tinylm::Model::init({});
  const std::vector<tinylm::Token> toks{256, 104, 105, 32, 116, 104, 101, 114, 101};
  tinylm::LayerTrace ref;
  {
    kernels::ScopedIsa s(Isa::scalar);
    ref = model.forward(toks);
  }
  for (Isa isa : simd_isas()) {
    kernels::ScopedIsa s(isa);
    const auto got = model.forward(toks);
    for (int l = 1; l <= ref.n_layers(); ++l) {
      const auto a = ref.q(l);
      const auto b = got.q(l);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-5);
    }
  }
}

TEST_CASE("each isa is deterministic") {
  Rng rng(8);
  const auto a = randvec(rng, 333);
  const auto b = randvec(rng, 333);
  std::vector<Isa> isas{Isa::scalar};
  for (Isa i : simd_isas()) isas.push_back(i);
  for (Isa isa : isas) {
    kernels::ScopedIsa s(isa);
    const float first = kernels::dot(a, b);
    for (int i = 0; i < 10; ++i) CHECK(kernels::dot(a, b) == first);
  }
}
