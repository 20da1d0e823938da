// Built with -mavx2 only; never called unless the CPU reports AVX2.
#include "arcweaver/kernels/dot.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace arcweaver::kernels::avx2 {

double dot(const float* a, const float* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
    // mul then add, no FMA: must round like the scalar reference.
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return sum;
}

}  // namespace arcweaver::kernels::avx2
#endif
