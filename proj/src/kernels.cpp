// Backend selection. Decided once at first use; V2G_KERNELS overrides CPU
// detection for debugging and equivalence tests.
#include "v2g/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace v2g::kern {
namespace {

const Kernels* g_active = nullptr;
Backend g_backend = Backend::scalar;

Backend detect() {
#if defined(__aarch64__)
  return Backend::neon;
#elif defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return Backend::avx2;
  return Backend::scalar;
#else
  return Backend::scalar;
#endif
}

const Kernels* table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &kScalar;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return &kAvx2;
#else
      return nullptr;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

void init_once() {
  if (g_active) return;
  Backend b = detect();
  if (const char* env = std::getenv("V2G_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") {
      b = Backend::scalar;
    } else if (v == "avx2") {
      b = Backend::avx2;
    } else if (v == "neon") {
      b = Backend::neon;
    } else if (v != "auto" && !v.empty()) {
      throw std::runtime_error("V2G_KERNELS: unknown backend '" + v + "' (scalar|avx2|neon|auto)");
    }
  }
  const Kernels* t = table_for(b);
  if (!t) throw std::runtime_error("requested kernel backend not available on this CPU");
  g_active = t;
  g_backend = b;
}

}  // namespace

const Kernels& active() {
  init_once();
  return *g_active;
}

Backend backend() {
  init_once();
  return g_backend;
}

const char* backend_name() {
  switch (backend()) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "?";
}

bool supported(Backend b) {
  if (b == Backend::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::avx2) return __builtin_cpu_supports("avx2") != 0;
#endif
#if defined(__aarch64__)
  if (b == Backend::neon) return true;
#endif
  return false;
}

void set_backend(Backend b) {
  if (!supported(b)) throw std::runtime_error("kernel backend not available on this CPU");
  g_active = table_for(b);
  g_backend = b;
}

}  // namespace v2g::kern
