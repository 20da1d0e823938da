#include "arcweaver/kernels/dot.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace arcweaver::kernels::neon {

double dot(const float* a, const float* b, std::size_t n) {
  // lanes {0,1} and {2,3} of each 4-float block
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t va = vld1q_f32(a + i);
    float32x4_t vb = vld1q_f32(b + i);
    acc01 = vaddq_f64(acc01, vmulq_f64(vcvt_f64_f32(vget_low_f32(va)),
                                       vcvt_f64_f32(vget_low_f32(vb))));
    acc23 = vaddq_f64(acc23, vmulq_f64(vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb)));
  }
  double sum = (vgetq_lane_f64(acc01, 0) + vgetq_lane_f64(acc01, 1)) +
               (vgetq_lane_f64(acc23, 0) + vgetq_lane_f64(acc23, 1));
  for (; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return sum;
}

}  // namespace arcweaver::kernels::neon
#endif
