#pragma once
// Dot-product kernels for embedding similarity.
//
// Every variant accumulates in double across four interleaved lanes
// (element i goes to lane i % 4) and combines them as (l0 + l1) + (l2 + l3)
// before adding the scalar tail. With FP contraction disabled this makes the
// scalar reference and the vector paths bit-identical, so similarity scores
// and anything derived from them do not depend on the host CPU.

#include <cstddef>
#include <span>
#include <string_view>

namespace arcweaver::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

// ISA picked at first use: the best the CPU supports, unless the
// ARCWEAVER_ISA environment variable names a supported one ("scalar").
Isa active_isa();
bool isa_supported(Isa isa);
// Test hook; throws std::invalid_argument when the ISA is unsupported.
void force_isa(Isa isa);

double dot(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);

// out[r] = dot(query, rows[r * dim .. (r + 1) * dim)).
void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim,
              std::span<double> out);

namespace scalar {
double dot(const float* a, const float* b, std::size_t n);
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const float* a, const float* b, std::size_t n);
}
#endif
#if defined(__aarch64__)
namespace neon {
double dot(const float* a, const float* b, std::size_t n);
}
#endif

}  // namespace arcweaver::kernels
