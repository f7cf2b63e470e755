#include "catcast/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

using namespace catcast;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> v(n);
    for (auto& x : v)
        x = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 4.0 - 2.0;
    return v;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Sizes straddling the 4-lane vector width, including the shapes the
// forecaster actually uses (70, 4*70).
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 32, 63, 64, 65, 70, 257, 280};

struct BackendGuard {
    kernels::Backend saved;
    BackendGuard() : saved(kernels::active_backend()) {}
    ~BackendGuard() { kernels::set_backend(saved); }
};

} // namespace

TEST_CASE("kernels: scalar dot on known values") {
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, -5.0, 6.0};
    CHECK(kernels::scalar::dot(a, b, 3) == doctest::Approx(12.0));
    CHECK(kernels::scalar::dot(a, b, 0) == 0.0);
}

TEST_CASE("kernels: backend dispatch is controllable") {
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::scalar);
    CHECK(kernels::active_backend() == kernels::Backend::scalar);
    if (kernels::backend_supported(kernels::Backend::avx2)) {
        kernels::set_backend(kernels::Backend::avx2);
        CHECK(kernels::active_backend() == kernels::Backend::avx2);
    }
    CHECK(kernels::backend_name(kernels::Backend::scalar) == std::string("scalar"));
}

#if defined(CATCAST_HAVE_AVX2_TU)
TEST_CASE("kernels: avx2 vector kernels match the scalar reference") {
    if (!kernels::backend_supported(kernels::Backend::avx2)) {
        MESSAGE("AVX2 unsupported on this CPU; skipping equivalence checks");
        return;
    }
    std::mt19937_64 rng(20240811);
    const double tol = 1e-13;

    for (std::size_t n : kSizes) {
        CAPTURE(n);
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);

        CHECK(close_rel(kernels::avx2::dot(a.data(), b.data(), n),
                        kernels::scalar::dot(a.data(), b.data(), n), tol));

        auto y1 = random_vec(n, rng);
        auto y2 = y1;
        kernels::scalar::axpy(0.77, a.data(), y1.data(), n);
        kernels::avx2::axpy(0.77, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(close_rel(y1[i], y2[i], tol));

        auto s1 = a;
        auto s2 = a;
        kernels::scalar::scale(-1.33, s1.data(), n);
        kernels::avx2::scale(-1.33, s2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(s1[i] == s2[i]); // pure elementwise, same expression tree

        auto h1 = random_vec(n, rng);
        auto h2 = h1;
        kernels::scalar::hadamard_acc(a.data(), b.data(), h1.data(), n);
        kernels::avx2::hadamard_acc(a.data(), b.data(), h2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(close_rel(h1[i], h2[i], tol));

        std::vector<double> p1(n), p2(n);
        kernels::scalar::hadamard(a.data(), b.data(), p1.data(), n);
        kernels::avx2::hadamard(a.data(), b.data(), p2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(p1[i] == p2[i]);
    }
}

TEST_CASE("kernels: avx2 matrix kernels match scalar") {
    if (!kernels::backend_supported(kernels::Backend::avx2))
        return;
    std::mt19937_64 rng(7);
    const double tol = 1e-13;
    for (std::size_t rows : {1, 3, 8, 17, 70, 280}) {
        for (std::size_t cols : {1, 2, 5, 16, 70}) {
            CAPTURE(rows);
            CAPTURE(cols);
            auto w = random_vec(rows * cols, rng);
            auto x = random_vec(cols, rng);
            auto bias = random_vec(rows, rng);
            std::vector<double> ys(rows), yv(rows);
            kernels::scalar::affine(w.data(), x.data(), bias.data(), ys.data(), rows, cols);
            kernels::avx2::affine(w.data(), x.data(), bias.data(), yv.data(), rows, cols);
            for (std::size_t i = 0; i < rows; ++i)
                CHECK(close_rel(ys[i], yv[i], tol));

            std::vector<double> zs(rows, 0.25), zv(rows, 0.25);
            kernels::scalar::matvec_acc(w.data(), x.data(), zs.data(), rows, cols);
            kernels::avx2::matvec_acc(w.data(), x.data(), zv.data(), rows, cols);
            for (std::size_t i = 0; i < rows; ++i)
                CHECK(close_rel(zs[i], zv[i], tol));

            auto dy = random_vec(rows, rng);
            std::vector<double> dxs(cols, 0.1), dxv(cols, 0.1);
            kernels::scalar::matvec_t_acc(w.data(), dy.data(), dxs.data(), rows, cols);
            kernels::avx2::matvec_t_acc(w.data(), dy.data(), dxv.data(), rows, cols);
            for (std::size_t i = 0; i < cols; ++i)
                CHECK(close_rel(dxs[i], dxv[i], tol));

            auto as = random_vec(rows * cols, rng);
            auto av = as;
            kernels::scalar::outer_acc(as.data(), dy.data(), x.data(), rows, cols);
            kernels::avx2::outer_acc(av.data(), dy.data(), x.data(), rows, cols);
            for (std::size_t i = 0; i < rows * cols; ++i)
                CHECK(close_rel(as[i], av[i], tol));
        }
    }
}

TEST_CASE("kernels: adam update is bit-identical across backends") {
    if (!kernels::backend_supported(kernels::Backend::avx2))
        return;
    std::mt19937_64 rng(99);
    const std::size_t n = 1003;
    auto p1 = random_vec(n, rng);
    auto m1 = random_vec(n, rng);
    auto v1 = random_vec(n, rng);
    for (auto& x : v1)
        x = std::abs(x);
    auto grad = random_vec(n, rng);
    auto p2 = p1, m2 = m1, v2 = v1;

    kernels::scalar::adam_step(p1.data(), m1.data(), v1.data(), grad.data(), n, 1e-3, 0.9,
                               0.999, 1e-8, 1.0 / (1 - 0.9), 1.0 / (1 - 0.999));
    kernels::avx2::adam_step(p2.data(), m2.data(), v2.data(), grad.data(), n, 1e-3, 0.9,
                             0.999, 1e-8, 1.0 / (1 - 0.9), 1.0 / (1 - 0.999));
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(p1[i] == p2[i]);
        CHECK(m1[i] == m2[i]);
        CHECK(v1[i] == v2[i]);
    }
}
#endif // CATCAST_HAVE_AVX2_TU

TEST_CASE("kernels: adam with zero learning rate leaves parameters unchanged") {
    std::mt19937_64 rng(3);
    const std::size_t n = 37;
    auto p = random_vec(n, rng);
    const auto saved = p;
    std::vector<double> m(n, 0.0), v(n, 0.0);
    auto g = random_vec(n, rng);
    kernels::adam_step(p.data(), m.data(), v.data(), g.data(), n, 0.0, 0.9, 0.999, 1e-8,
                       10.0, 1000.0);
    CHECK(p == saved);
}
