#include "catcast/kernels.hpp"

#include "catcast/error.hpp"

#include <cstdlib>
#include <string>

namespace catcast::kernels {

namespace {

struct KernelTable {
    Backend backend;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*hadamard)(const double*, const double*, double*, std::size_t);
    void (*hadamard_acc)(const double*, const double*, double*, std::size_t);
    void (*affine)(const double*, const double*, const double*, double*, std::size_t, std::size_t);
    void (*matvec_acc)(const double*, const double*, double*, std::size_t, std::size_t);
    void (*matvec_t_acc)(const double*, const double*, double*, std::size_t, std::size_t);
    void (*outer_acc)(double*, const double*, const double*, std::size_t, std::size_t);
    void (*adam_step)(double*, double*, double*, const double*, std::size_t,
                      double, double, double, double, double, double);
};

constexpr KernelTable scalar_table{
    Backend::scalar,      scalar::dot,          scalar::axpy,
    scalar::scale,        scalar::hadamard,     scalar::hadamard_acc,
    scalar::affine,       scalar::matvec_acc,   scalar::matvec_t_acc,
    scalar::outer_acc,    scalar::adam_step,
};

#if defined(CATCAST_HAVE_AVX2_TU)
constexpr KernelTable avx2_table{
    Backend::avx2,        avx2::dot,            avx2::axpy,
    avx2::scale,          avx2::hadamard,       avx2::hadamard_acc,
    avx2::affine,         avx2::matvec_acc,     avx2::matvec_t_acc,
    avx2::outer_acc,      avx2::adam_step,
};
#endif

bool cpu_has_avx2() {
#if defined(CATCAST_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) {
    switch (b) {
    case Backend::scalar:
        return &scalar_table;
    case Backend::avx2:
#if defined(CATCAST_HAVE_AVX2_TU)
        return &avx2_table;
#else
        return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable* detect() {
    if (const char* env = std::getenv("CATCAST_KERNELS")) {
        std::string v(env);
        if (v == "scalar")
            return &scalar_table;
        if (v == "avx2") {
            if (!cpu_has_avx2())
                fail("CATCAST_KERNELS=avx2 but this CPU/build has no AVX2 support");
            return table_for(Backend::avx2);
        }
        if (!v.empty() && v != "auto")
            fail("unknown CATCAST_KERNELS value '", v, "' (expected scalar|avx2|auto)");
    }
#if defined(CATCAST_HAVE_AVX2_TU)
    if (cpu_has_avx2())
        return &avx2_table;
#endif
    return &scalar_table;
}

const KernelTable*& active_table() {
    static const KernelTable* t = detect();
    return t;
}

} // namespace

const char* backend_name(Backend b) {
    switch (b) {
    case Backend::scalar:
        return "scalar";
    case Backend::avx2:
        return "avx2";
    }
    return "?";
}

Backend active_backend() { return active_table()->backend; }

bool backend_supported(Backend b) {
    if (b == Backend::scalar)
        return true;
    return cpu_has_avx2();
}

void set_backend(Backend b) {
    if (!backend_supported(b))
        fail("kernel backend '", backend_name(b), "' not supported on this CPU/build");
    active_table() = table_for(b);
}

void reset_backend() { active_table() = detect(); }

double dot(const double* a, const double* b, std::size_t n) {
    return active_table()->dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active_table()->axpy(alpha, x, y, n);
}
void scale(double alpha, double* x, std::size_t n) {
    active_table()->scale(alpha, x, n);
}
void hadamard(const double* a, const double* b, double* y, std::size_t n) {
    active_table()->hadamard(a, b, y, n);
}
void hadamard_acc(const double* a, const double* b, double* y, std::size_t n) {
    active_table()->hadamard_acc(a, b, y, n);
}
void affine(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    active_table()->affine(w, x, b, y, rows, cols);
}
void matvec_acc(const double* w, const double* x, double* y,
                std::size_t rows, std::size_t cols) {
    active_table()->matvec_acc(w, x, y, rows, cols);
}
void matvec_t_acc(const double* w, const double* dy, double* dx,
                  std::size_t rows, std::size_t cols) {
    active_table()->matvec_t_acc(w, dy, dx, rows, cols);
}
void outer_acc(double* a, const double* dy, const double* x,
               std::size_t rows, std::size_t cols) {
    active_table()->outer_acc(a, dy, x, rows, cols);
}
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double inv_bias1, double inv_bias2) {
    active_table()->adam_step(p, m, v, g, n, lr, beta1, beta2, eps, inv_bias1, inv_bias2);
}

} // namespace catcast::kernels
