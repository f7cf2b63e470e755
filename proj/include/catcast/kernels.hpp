#pragma once

#include <cstddef>

// Double-precision inner-loop kernels for the forecaster's forward/backward
// passes and optimizer updates. Every kernel has a scalar reference
// implementation (kernels::scalar) and, on x86-64, an AVX2+FMA variant.
// The active variant is picked once at startup from cpuid and can be
// overridden with set_backend() or the CATCAST_KERNELS env var
// (scalar|avx2|auto). SIMD and scalar results agree to rounding; the
// equivalence tests pin the tolerance.

namespace catcast::kernels {

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
Backend active_backend();
bool backend_supported(Backend b);
void set_backend(Backend b); // throws if unsupported on this CPU/build
void reset_backend();        // re-run auto-detection (honors CATCAST_KERNELS)

// y and outputs never alias inputs unless stated.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);     // y += alpha*x
void scale(double alpha, double* x, std::size_t n);                     // x *= alpha
void hadamard(const double* a, const double* b, double* y, std::size_t n);     // y = a.*b
void hadamard_acc(const double* a, const double* b, double* y, std::size_t n); // y += a.*b

// w is row-major [rows x cols].
void affine(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);                        // y = W x + b
void matvec_acc(const double* w, const double* x, double* y,
                std::size_t rows, std::size_t cols);                    // y += W x
void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols);                  // dx += W^T dy
void outer_acc(double* a, const double* dy, const double* x,
               std::size_t rows, std::size_t cols);                     // A += dy x^T

// One Adam update over n parameters. inv_bias1/2 are the 1/(1-beta^t)
// bias-correction factors for the current step.
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double inv_bias1, double inv_bias2);

// Scalar reference path, always available; the oracle side of the
// scalar-vs-SIMD equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void hadamard(const double* a, const double* b, double* y, std::size_t n);
void hadamard_acc(const double* a, const double* b, double* y, std::size_t n);
void affine(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);
void matvec_acc(const double* w, const double* x, double* y,
                std::size_t rows, std::size_t cols);
void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols);
void outer_acc(double* a, const double* dy, const double* x,
               std::size_t rows, std::size_t cols);
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double inv_bias1, double inv_bias2);
} // namespace scalar

#if defined(CATCAST_HAVE_AVX2_TU)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void hadamard(const double* a, const double* b, double* y, std::size_t n);
void hadamard_acc(const double* a, const double* b, double* y, std::size_t n);
void affine(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);
void matvec_acc(const double* w, const double* x, double* y,
                std::size_t rows, std::size_t cols);
void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols);
void outer_acc(double* a, const double* dy, const double* x,
               std::size_t rows, std::size_t cols);
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double inv_bias1, double inv_bias2);
} // namespace avx2
#endif

} // namespace catcast::kernels
