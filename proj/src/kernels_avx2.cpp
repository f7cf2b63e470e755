// AVX2+FMA kernel variants. This translation unit is the only one built with
// -mavx2 -mfma; callers reach it through the dispatch table after a cpuid
// check. Reductions use split accumulators, so sums can differ from the
// scalar path in the last ulps; elementwise kernels mirror the scalar
// expression trees lane by lane and match it exactly.

#include "catcast/kernels.hpp"

#if defined(CATCAST_HAVE_AVX2_TU)

#include <cmath>
#include <immintrin.h>

namespace catcast::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

} // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i)
        x[i] *= alpha;
}

void hadamard(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i)
        y[i] = a[i] * b[i];
}

void hadamard_acc(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i)
        y[i] += a[i] * b[i];
}

void affine(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = b[r] + dot(w + r * cols, x, cols);
}

void matvec_acc(const double* w, const double* x, double* y,
                std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] += dot(w + r * cols, x, cols);
}

void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        axpy(dy[r], w + r * cols, dx, cols);
}

void outer_acc(double* a, const double* dy, const double* x,
               std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        axpy(dy[r], x, a + r * cols, cols);
}

void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double inv_bias1, double inv_bias2) {
    // Mirrors the scalar expression tree (mul/add, no fma) so parameter
    // updates are bit-identical across backends.
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vom1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vom2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vib1 = _mm256_set1_pd(inv_bias1);
    const __m256d vib2 = _mm256_set1_pd(inv_bias2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vom1, vg));
        vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv), _mm256_mul_pd(vom2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vib1);
        const __m256d vhat = _mm256_mul_pd(vv, vib2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    const double om1 = 1.0 - beta1;
    const double om2 = 1.0 - beta2;
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + om1 * g[i];
        v[i] = beta2 * v[i] + om2 * (g[i] * g[i]);
        const double mhat = m[i] * inv_bias1;
        const double vhat = v[i] * inv_bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace catcast::kernels::avx2

#endif // CATCAST_HAVE_AVX2_TU
