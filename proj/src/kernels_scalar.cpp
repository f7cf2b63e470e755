#include "catcast/kernels.hpp"

#include <cmath>

namespace catcast::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        x[i] *= alpha;
}

void hadamard(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] = a[i] * b[i];
}

void hadamard_acc(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
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
    const double om1 = 1.0 - beta1;
    const double om2 = 1.0 - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + om1 * g[i];
        v[i] = beta2 * v[i] + om2 * (g[i] * g[i]);
        const double mhat = m[i] * inv_bias1;
        const double vhat = v[i] * inv_bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace catcast::kernels::scalar
