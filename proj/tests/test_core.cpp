#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "geoflow/core.hpp"

using namespace geoflow;

TEST_SUITE_BEGIN("core");

TEST_CASE("gauss_solve recovers a known solution") {
    // A x = b with x = (1, -2, 3)
    double A[9] = {2, 1, 0, 1, 3, -1, 0, -1, 4};
    const double x_ref[3] = {1, -2, 3};
    double b[3];
    mat_vec(A, x_ref, b, 3);
    gauss_solve(3, A, b, "test");
    for (int i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(x_ref[i]).epsilon(1e-14));
}

TEST_CASE("gauss_solve throws on a singular matrix") {
    double A[4] = {1, 2, 2, 4};
    double b[2] = {1, 1};
    CHECK_THROWS_AS(gauss_solve(2, A, b, "test"), NumericalError);
}

TEST_CASE("mat_inv gives the inverse") {
    double A[9] = {4, 1, 0.5, 1, 3, -1, 0.5, -1, 2};
    double Ainv[9], P[9];
    mat_inv(A, Ainv, 3, "test");
    mat_mul(A, Ainv, P, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(P[i * 3 + j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
}

TEST_CASE("cross3 is orthogonal to both factors") {
    const double a[3] = {1.2, -0.3, 0.5}, b[3] = {0.1, 2.0, -0.7};
    double c[3];
    cross3(a, b, c);
    CHECK(std::fabs(dot(a, c, 3)) < 1e-15);
    CHECK(std::fabs(dot(b, c, 3)) < 1e-15);
}

TEST_CASE("deterministic reductions are independent of the parallel flag") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    // sizes straddling the chunk boundary
    for (std::size_t n : {std::size_t(1), std::size_t(1000), std::size_t(1024),
                          std::size_t(1025), std::size_t(5000), std::size_t(70000)}) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        const double s_par = det_sum(a.data(), n, true);
        const double s_ser = det_sum(a.data(), n, false);
        CHECK(s_par == s_ser);  // bitwise
        const double d_par = det_dot(a.data(), b.data(), n, true);
        const double d_ser = det_dot(a.data(), b.data(), n, false);
        CHECK(d_par == d_ser);  // bitwise
        // and both agree with the plain serial sum up to roundoff
        CHECK(std::fabs(d_par - serial_dot(a.data(), b.data(), n)) < 1e-8);
        CHECK(std::fabs(s_par - serial_sum(a.data(), n)) < 1e-8);
    }
}

TEST_SUITE_END();
