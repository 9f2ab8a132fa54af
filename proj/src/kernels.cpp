#include "oedmt/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace oedmt::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void ou_precision_apply(const double* x, double* y, std::size_t n, double rho, double inv_scale) {
  const double c = inv_scale / (1.0 - rho * rho);
  const double d = (1.0 + rho * rho) * c;
  const double e = -rho * c;
  y[0] = c * x[0] + e * x[1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    y[i] = e * x[i - 1] + d * x[i] + e * x[i + 1];
  }
  y[n - 1] = e * x[n - 2] + c * x[n - 1];
}

void gram6(const double* a, std::size_t lda, const double* b, std::size_t ldb, std::size_t n,
           double* c) {
  for (int q = 0; q < 6; ++q) {
    const double* bq = b + static_cast<std::size_t>(q) * ldb;
    for (int p = 0; p < 6; ++p) {
      const double* ap = a + static_cast<std::size_t>(p) * lda;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += ap[i] * bq[i];
      c[q * 6 + p] += s;
    }
  }
}

}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void ou_precision_apply(const double* x, double* y, std::size_t n, double rho, double inv_scale);
void gram6(const double* a, std::size_t lda, const double* b, std::size_t ldb, std::size_t n,
           double* c);
}  // namespace avx2
#endif

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*ou_precision_apply)(const double*, double*, std::size_t, double, double);
  void (*gram6)(const double*, std::size_t, const double*, std::size_t, std::size_t, double*);
};

constexpr Vtable kScalar = {scalar::dot, scalar::axpy, scalar::ou_precision_apply, scalar::gram6};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Vtable kAvx2 = {avx2::dot, avx2::axpy, avx2::ou_precision_apply, avx2::gram6};
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

// OEDMT_SIMD=scalar|avx2 overrides the startup pick (unknown values and
// unsupported requests fall back to the probe).
Backend pick_default() {
  if (const char* env = std::getenv("OEDMT_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::Avx2;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

Backend g_backend = pick_default();

const Vtable& table() {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_backend == Backend::Avx2) return kAvx2;
#endif
  return kScalar;
}

}  // namespace

Backend active_backend() { return g_backend; }

bool backend_supported(Backend b) {
  return b == Backend::Scalar || (b == Backend::Avx2 && cpu_has_avx2());
}

void set_backend(Backend b) {
  if (!backend_supported(b)) throw std::runtime_error("requested kernel backend not supported on this CPU");
  g_backend = b;
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) { table().axpy(alpha, x, y, n); }

void ou_precision_apply(const double* x, double* y, std::size_t n, double rho, double inv_scale) {
  table().ou_precision_apply(x, y, n, rho, inv_scale);
}

void gram6(const double* a, std::size_t lda, const double* b, std::size_t ldb, std::size_t n,
           double* c) {
  table().gram6(a, lda, b, ldb, n, c);
}

}  // namespace oedmt::kernels
