// Runtime-dispatched float64 kernels for the hot inner loops (tensor ops,
// simplex pivots). Scalar reference plus AVX2/NEON variants; all variants
// produce bit-identical results: elementwise kernels share the per-element
// operation order, and reductions use a fixed 4-accumulator scheme so lane
// assignment matches across backends.
#pragma once

#include <cstddef>
#include <string>

namespace v2g::kern {

enum class Backend { scalar, avx2, neon };

struct Kernels {
  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * alpha
  void (*scale)(const double* a, double alpha, double* out, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // acc[i] += a[i] * b[i]
  void (*mul_acc)(const double* a, const double* b, double* acc, std::size_t n);
  // out[i] = max(a[i], 0)
  void (*relu)(const double* a, double* out, std::size_t n);
  // acc[i] += x[i] > 0 ? g[i] : 0
  void (*relu_bwd_acc)(const double* x, const double* g, double* acc, std::size_t n);
  // sum_i a[i] * b[i], 4-accumulator order
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i], 4-accumulator order
  double (*sum)(const double* a, std::size_t n);
  // max_i a[i]; n must be >= 1
  double (*vmax)(const double* a, std::size_t n);
};

// Active kernel table. Selected once: V2G_KERNELS={scalar|avx2|neon|auto}
// overrides CPU detection; unknown or unsupported values throw.
const Kernels& active();

Backend backend();
const char* backend_name();
bool supported(Backend b);

// Test hook: swap the active table. Throws std::runtime_error if the
// requested backend is not available on this CPU.
void set_backend(Backend b);

extern const Kernels kScalar;
#if defined(__x86_64__) || defined(_M_X64)
extern const Kernels kAvx2;
#endif
#if defined(__aarch64__)
extern const Kernels kNeon;
#endif

}  // namespace v2g::kern
