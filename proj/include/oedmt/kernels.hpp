#pragma once

#include <cstddef>

namespace oedmt::kernels {

// Sample-domain inner loops. Every kernel has a scalar reference
// implementation and, on x86-64 with AVX2+FMA, a vectorized variant selected
// once at startup. The two are equivalence-tested against each other; results
// may differ by FMA rounding only.

enum class Backend { Scalar, Avx2 };

Backend active_backend();
bool backend_supported(Backend b);
// Overrides dispatch (tests, benchmarking). Throws if unsupported on this CPU.
void set_backend(Backend b);
const char* backend_name(Backend b);

double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = inv_scale * P x where P is the tridiagonal precision of the
// unit-variance exponential kernel K_ij = rho^|i-j| on a uniform grid:
// P = 1/(1-rho^2) * tridiag(-rho; [1, 1+rho^2, ..., 1+rho^2, 1]; -rho).
// inv_scale carries the 1/sigma^2 noise scaling. Requires n >= 2, |rho| < 1.
void ou_precision_apply(const double* x, double* y, std::size_t n, double rho, double inv_scale);

// c += a^T b over the leading n rows of column-major a, b with 6 columns and
// leading dimensions lda, ldb; c is 6x6 column-major.
void gram6(const double* a, std::size_t lda, const double* b, std::size_t ldb, std::size_t n,
           double* c);

}  // namespace oedmt::kernels
