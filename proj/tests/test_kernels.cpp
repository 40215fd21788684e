// Equivalence of the scalar reference kernels and the SIMD variants. The
// backends are required to agree bit for bit: elementwise kernels share the
// per-element order, reductions share the 4-accumulator scheme.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "v2g/kernels.hpp"
#include "v2g/rng.hpp"

using v2g::Rng;
namespace kern = v2g::kern;

namespace {

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 5, 7, 8, 13, 16, 31, 64, 257, 1000, 1023};

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

struct BackendPair {
  const kern::Kernels* ref;
  const kern::Kernels* simd;
};

// Returns the SIMD table for this machine, or null if only scalar exists.
const kern::Kernels* simd_table() {
#if defined(__x86_64__) || defined(_M_X64)
  if (kern::supported(kern::Backend::avx2)) return &kern::kAvx2;
#endif
#if defined(__aarch64__)
  return &kern::kNeon;
#endif
  return nullptr;
}

}  // namespace

TEST_CASE("backend dispatch reports a valid backend") {
  CHECK(kern::supported(kern::Backend::scalar));
  CHECK(kern::backend_name() != nullptr);
  // active() must be callable and consistent with backend().
  const kern::Kernels& k = kern::active();
  double one = 1.0, two = 2.0, out = 0.0;
  k.add(&one, &two, &out, 1);
  CHECK(out == 3.0);
}

TEST_CASE("simd kernels match scalar reference bit for bit") {
  const kern::Kernels* simd = simd_table();
  if (!simd) {
    MESSAGE("no SIMD backend on this CPU; scalar-only build");
    return;
  }
  const kern::Kernels& ref = kern::kScalar;
  Rng rng(42);
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    std::vector<double> r1(n), r2(n);

    ref.add(a.data(), b.data(), r1.data(), n);
    simd->add(a.data(), b.data(), r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    ref.mul(a.data(), b.data(), r1.data(), n);
    simd->mul(a.data(), b.data(), r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    ref.scale(a.data(), 1.7, r1.data(), n);
    simd->scale(a.data(), 1.7, r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    ref.relu(a.data(), r1.data(), n);
    simd->relu(a.data(), r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    r1 = b;
    r2 = b;
    ref.axpy(-0.37, a.data(), r1.data(), n);
    simd->axpy(-0.37, a.data(), r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    r1 = b;
    r2 = b;
    ref.mul_acc(a.data(), b.data(), r1.data(), n);
    simd->mul_acc(a.data(), b.data(), r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    r1 = b;
    r2 = b;
    ref.relu_bwd_acc(a.data(), b.data(), r1.data(), n);
    simd->relu_bwd_acc(a.data(), b.data(), r2.data(), n);
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    CHECK(ref.dot(a.data(), b.data(), n) == simd->dot(a.data(), b.data(), n));
    CHECK(ref.sum(a.data(), n) == simd->sum(a.data(), n));
    if (n > 0) CHECK(ref.vmax(a.data(), n) == simd->vmax(a.data(), n));
  }
}

TEST_CASE("reduction kernels agree with plain accumulation to tolerance") {
  Rng rng(7);
  for (std::size_t n : kSizes) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    double dot = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += a[i] * b[i];
      sum += a[i];
    }
    const auto& k = kern::active();
    CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(1e-12));
    CHECK(k.sum(a.data(), n) == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("set_backend rejects unsupported backends") {
#if !defined(__aarch64__)
  CHECK_THROWS(kern::set_backend(kern::Backend::neon));
#endif
  kern::set_backend(kern::Backend::scalar);
  CHECK(kern::backend() == kern::Backend::scalar);
  const kern::Kernels* simd = simd_table();
  if (simd) {
#if defined(__x86_64__) || defined(_M_X64)
    kern::set_backend(kern::Backend::avx2);
    CHECK(kern::backend() == kern::Backend::avx2);
#endif
  }
}
