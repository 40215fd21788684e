// NEON kernels (aarch64). Two float64x2 registers per iteration so the
// 4-accumulator reduction order matches the scalar reference exactly.
#if defined(__aarch64__)

#include <arm_neon.h>

#include "v2g/kernels.hpp"

namespace v2g::kern {
namespace {

void add_neon(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(out + i + 2, vaddq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(out + i + 2, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_neon(const double* a, double alpha, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), va));
    vst1q_f64(out + i + 2, vmulq_f64(vld1q_f64(a + i + 2), va));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] * alpha;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(vld1q_f64(x + i), va)));
    vst1q_f64(y + i + 2, vaddq_f64(vld1q_f64(y + i + 2), vmulq_f64(vld1q_f64(x + i + 2), va)));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += alpha * x[i];
}

void mul_acc_neon(const double* a, const double* b, double* acc, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i))));
    vst1q_f64(acc + i + 2,
              vaddq_f64(vld1q_f64(acc + i + 2), vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2))));
  }
  for (std::size_t i = n4; i < n; ++i) acc[i] += a[i] * b[i];
}

void relu_neon(const double* a, double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vst1q_f64(out + i, vmaxq_f64(vld1q_f64(a + i), zero));
    vst1q_f64(out + i + 2, vmaxq_f64(vld1q_f64(a + i + 2), zero));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_bwd_acc_neon(const double* x, const double* g, double* acc, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    for (std::size_t o = 0; o < 4; o += 2) {
      const uint64x2_t m = vcgtq_f64(vld1q_f64(x + i + o), zero);
      const float64x2_t gated =
          vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i + o)), m));
      vst1q_f64(acc + i + o, vaddq_f64(vld1q_f64(acc + i + o), gated));
    }
  }
  for (std::size_t i = n4; i < n; ++i) {
    if (x[i] > 0.0) acc[i] += g[i];
  }
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t v01 = vdupq_n_f64(0.0);
  float64x2_t v23 = vdupq_n_f64(0.0);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    v01 = vaddq_f64(v01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    v23 = vaddq_f64(v23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double acc[4] = {vgetq_lane_f64(v01, 0), vgetq_lane_f64(v01, 1), vgetq_lane_f64(v23, 0),
                   vgetq_lane_f64(v23, 1)};
  for (std::size_t i = n4; i < n; ++i) acc[i - n4] += a[i] * b[i];
  return acc[0] + acc[1] + acc[2] + acc[3];
}

double sum_neon(const double* a, std::size_t n) {
  float64x2_t v01 = vdupq_n_f64(0.0);
  float64x2_t v23 = vdupq_n_f64(0.0);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    v01 = vaddq_f64(v01, vld1q_f64(a + i));
    v23 = vaddq_f64(v23, vld1q_f64(a + i + 2));
  }
  double acc[4] = {vgetq_lane_f64(v01, 0), vgetq_lane_f64(v01, 1), vgetq_lane_f64(v23, 0),
                   vgetq_lane_f64(v23, 1)};
  for (std::size_t i = n4; i < n; ++i) acc[i - n4] += a[i];
  return acc[0] + acc[1] + acc[2] + acc[3];
}

double vmax_neon(const double* a, std::size_t n) {
  double m = a[0];
  std::size_t i = 1;
  if (n >= 3) {
    float64x2_t vm = vld1q_f64(a);
    for (i = 2; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(a + i));
    m = vgetq_lane_f64(vm, 0);
    const double m1 = vgetq_lane_f64(vm, 1);
    if (m1 > m) m = m1;
  }
  for (; i < n; ++i) {
    if (a[i] > m) m = a[i];
  }
  return m;
}

}  // namespace

const Kernels kNeon = {
    add_neon,  mul_neon,          scale_neon, axpy_neon, mul_acc_neon,
    relu_neon, relu_bwd_acc_neon, dot_neon,   sum_neon,  vmax_neon,
};

}  // namespace v2g::kern

#endif  // __aarch64__
