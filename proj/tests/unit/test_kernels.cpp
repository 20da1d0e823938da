#include <cstring>
#include <random>

#include "arcweaver/kernels/dot.hpp"
#include "doctest.h"

using namespace arcweaver::kernels;

namespace {
std::vector<float> random_vector(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<float> dist(-4.0f, 4.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }
}  // namespace

TEST_CASE("every supported ISA path is bit-identical to the scalar reference") {
  std::mt19937 rng(11);
  for (std::size_t n = 0; n <= 300; ++n) {
    auto a = random_vector(rng, n);
    auto b = random_vector(rng, n);
    const double ref = scalar::dot(a.data(), b.data(), n);
#if defined(__x86_64__) || defined(_M_X64)
    if (isa_supported(Isa::Avx2)) CHECK(same_bits(avx2::dot(a.data(), b.data(), n), ref));
#endif
#if defined(__aarch64__)
    CHECK(same_bits(neon::dot(a.data(), b.data(), n), ref));
#endif
    CHECK(same_bits(dot(a, b), ref));
  }
}

TEST_CASE("dot_rows matches per-row dot under each ISA") {
  std::mt19937 rng(5);
  const std::size_t dim = 37, rows = 9;
  auto q = random_vector(rng, dim);
  auto m = random_vector(rng, dim * rows);
  std::vector<double> expected(rows);
  for (std::size_t r = 0; r < rows; ++r) expected[r] = scalar::dot(q.data(), m.data() + r * dim, dim);
  for (auto isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (!isa_supported(isa)) continue;
    force_isa(isa);
    CHECK(active_isa() == isa);
    std::vector<double> out(rows);
    dot_rows(q, m, dim, out);
    for (std::size_t r = 0; r < rows; ++r) CHECK(same_bits(out[r], expected[r]));
    CHECK(same_bits(squared_norm(q), scalar::dot(q.data(), q.data(), dim)));
  }
  CHECK(isa_supported(Isa::Scalar));
}

TEST_CASE("lane order is fixed") {
  // 1e8 + 1 - 1e8 differs from 1 when accumulated naively in float.
  std::vector<float> a = {1e8f, 1.0f, -1e8f, 0.0f, 1.0f};
  std::vector<float> b = {1.0f, 1.0f, 1.0f, 1.0f, 1.0f};
  CHECK(scalar::dot(a.data(), b.data(), a.size()) == doctest::Approx(2.0));
}
