// AVX2 kernels. Mul/add only (no FMA) so results match the scalar reference
// bit for bit; this file and the scalar reference are both built with
// -ffp-contract=off. Reduction lanes map to the scalar 4-accumulator scheme.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "v2g/kernels.hpp"

namespace v2g::kern {
namespace {

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(const double* a, double alpha, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), va));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] * alpha;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(x + i), va);
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += alpha * x[i];
}

void mul_acc_avx2(const double* a, const double* b, double* acc, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
  }
  for (std::size_t i = n4; i < n; ++i) acc[i] += a[i] * b[i];
}

void relu_avx2(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  }
  for (std::size_t i = n4; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_bwd_acc_avx2(const double* x, const double* g, double* acc, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gated = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), gated));
  }
  for (std::size_t i = n4; i < n; ++i) {
    if (x[i] > 0.0) acc[i] += g[i];
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    vacc = _mm256_add_pd(vacc, prod);
  }
  alignas(32) double acc[4];
  _mm256_store_pd(acc, vacc);
  for (std::size_t i = n4; i < n; ++i) acc[i - n4] += a[i] * b[i];
  return acc[0] + acc[1] + acc[2] + acc[3];
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(a + i));
  }
  alignas(32) double acc[4];
  _mm256_store_pd(acc, vacc);
  for (std::size_t i = n4; i < n; ++i) acc[i - n4] += a[i];
  return acc[0] + acc[1] + acc[2] + acc[3];
}

double vmax_avx2(const double* a, std::size_t n) {
  if (n < 4) {
    double m = a[0];
    for (std::size_t i = 1; i < n; ++i) {
      if (a[i] > m) m = a[i];
    }
    return m;
  }
  __m256d vm = _mm256_loadu_pd(a);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 4; i < n4; i += 4) {
    vm = _mm256_max_pd(vm, _mm256_loadu_pd(a + i));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, vm);
  double m = lanes[0];
  for (int j = 1; j < 4; ++j) {
    if (lanes[j] > m) m = lanes[j];
  }
  for (std::size_t i = n4; i < n; ++i) {
    if (a[i] > m) m = a[i];
  }
  return m;
}

}  // namespace

const Kernels kAvx2 = {
    add_avx2,  mul_avx2,          scale_avx2, axpy_avx2, mul_acc_avx2,
    relu_avx2, relu_bwd_acc_avx2, dot_avx2,   sum_avx2,  vmax_avx2,
};

}  // namespace v2g::kern

#endif  // x86_64
