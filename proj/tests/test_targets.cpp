#include <cmath>
#include <random>

#include "doctest.h"
#include "geoflow/core.hpp"
#include "geoflow/targets.hpp"

using namespace geoflow;

TEST_SUITE_BEGIN("targets");

TEST_CASE("sphere conformal factor and its closed forms") {
    const SphereTarget t(3);
    const double x[3] = {2, 0, 0};
    CHECK(t.rho(x) == doctest::Approx(17.0 / 32.0).epsilon(1e-15));  // 1/2 + 1/32
    double g[3];
    t.drho(x, g);  // -2 x / |x|^6
    CHECK(g[0] == doctest::Approx(-4.0 / 64.0).epsilon(1e-15));
    CHECK(g[1] == 0.0);

    const double on[3] = {0, 1, 0};
    CHECK(t.rho(on) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.distance(x) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sphere inversion fixes the sphere and maps 1.2 to 1/1.2") {
    const SphereTarget t(3);
    double y[3];
    const double x[3] = {1.2, 0, 0};
    t.involution(x, y);
    CHECK(y[0] == doctest::Approx(1.0 / 1.2).epsilon(1e-15));
    const double s[3] = {0.6, -0.8, 0.0};
    t.involution(s, y);
    CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(-0.8).epsilon(1e-14));
    double p[3];
    t.project(x, p);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sphere guard radius rejects near-origin evaluation") {
    const SphereTarget t(3);
    const double x[3] = {0.05, 0, 0};
    double G[9];
    CHECK_THROWS_AS(t.metric(x, G), NumericalError);
    CHECK_THROWS_AS(t.rho(x), NumericalError);
}

TEST_CASE("sphere Christoffel symbols at the sphere") {
    const SphereTarget t(3);
    const double x[3] = {1, 0, 0};
    double Gam[27];
    t.christoffel(x, Gam);
    // for G = rho Id: Gamma^c_ab = (dlog rho_a d_cb + dlog rho_b d_ca
    //                               - dlog rho_c d_ab)/2; at |x|=1 drho = -2x
    auto ref = [&](int c, int a, int b) {
        const double dl[3] = {-2 * x[0], -2 * x[1], -2 * x[2]};
        double v = 0.0;
        if (c == b) v += dl[a];
        if (c == a) v += dl[b];
        if (a == b) v -= dl[c];
        return 0.5 * v;
    };
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                CHECK(Gam[(c * 3 + a) * 3 + b] ==
                      doctest::Approx(ref(c, a, b)).epsilon(1e-13));
    CHECK(Gam[0] == doctest::Approx(-1.0).epsilon(1e-14));  // Gamma^0_00 = -1
}

TEST_CASE("sphere covariant Hessian closed form") {
    const SphereTarget t(3);
    // on the sphere it reduces to the radial projector x x^T
    const double x[3] = {0.6, 0.8, 0.0};
    double H[9];
    t.covariant_hessian_distance(x, H);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(H[a * 3 + b] == doctest::Approx(x[a] * x[b]).epsilon(1e-13));

    // off the sphere it must match the generic Christoffel-correction route
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        double p[3];
        double r = 0.0;
        do {
            for (double& v : p) v = u(rng);
            r = norm(p, 3);
        } while (r < 0.4);
        double Hc[9], Gam[27];
        t.covariant_hessian_distance(p, Hc);
        t.christoffel(p, Gam);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double s = ((a == b ? 1.0 : 0.0) - p[a] * p[b] / (r * r)) / r;
                for (int c = 0; c < 3; ++c) s -= Gam[(c * 3 + a) * 3 + b] * (p[c] / r);
                CHECK(Hc[a * 3 + b] == doctest::Approx(s).epsilon(5e-12));
            }
    }
}

TEST_CASE("sphere metric derivative matches finite differences") {
    const SphereTarget t(3);
    const double x[3] = {0.7, -0.4, 0.9};
    double dG[27], Gp[9], Gm[9];
    t.metric_deriv(x, dG);
    const double h = 1e-6;
    for (int b = 0; b < 3; ++b) {
        double xp[3] = {x[0], x[1], x[2]};
        xp[b] += h;
        t.metric(xp, Gp);
        xp[b] = x[b] - h;
        t.metric(xp, Gm);
        for (int k = 0; k < 9; ++k)
            CHECK(dG[b * 9 + k] ==
                  doctest::Approx((Gp[k] - Gm[k]) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("unit-sphere hypersurface distances and reflection") {
    const HypersurfaceTarget t = HypersurfaceTarget::unit_sphere(3);
    const double x[3] = {1.2, 0, 0};
    CHECK(t.distance(x) == doctest::Approx(0.2).epsilon(1e-15));
    double g[3];
    t.grad_distance(x, g);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
    double y[3];
    t.involution(x, y);
    CHECK(y[0] == doctest::Approx(0.8).epsilon(1e-15));  // 2p - x
    double a[3];
    t.project(x, a);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-15));

    // G = Id - 2 d D2d + 2 d^2 (D2d)^2: radial eigenvalue 1,
    // tangential 1 - 2d/r + 2(d/r)^2 = 13/18 at r = 1.2
    double G[9];
    t.metric(x, G);
    CHECK(G[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(G[4] == doctest::Approx(13.0 / 18.0).epsilon(1e-14));
    CHECK(G[8] == doctest::Approx(13.0 / 18.0).epsilon(1e-14));
    CHECK(G[1] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("hypersurface covariant Hessian identity on the analytic sphere") {
    const HypersurfaceTarget t = HypersurfaceTarget::unit_sphere(3);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        double x[3];
        double r = 0.0;
        do {
            for (double& v : x) v = u(rng);
            r = norm(x, 3);
        } while (r < 0.7 || r > 1.35);
        double H[9], D2[9], R[9];
        t.covariant_hessian_distance(x, H);
        t.hess_distance(x, D2);
        mat_mul(D2, D2, R, 3);
        const double d = t.distance(x);
        for (int k = 0; k < 9; ++k)
            CHECK(H[k] == doctest::Approx(d * R[k]).epsilon(1e-8));
    }
}

TEST_CASE("ellipsoid closest points at the axis ends") {
    const HypersurfaceTarget t = HypersurfaceTarget::ellipsoid(1.5, 1.0, 0.75);
    CHECK(t.tube_halfwidth() == doctest::Approx(0.4 * 0.75 * 0.75 / 1.5).epsilon(1e-14));
    const double x[3] = {1.6, 0, 0};
    CHECK(t.distance(x) == doctest::Approx(0.1).epsilon(1e-10));
    double p[3];
    t.project(x, p);
    CHECK(p[0] == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(std::fabs(p[1]) < 1e-10);

    const double y[3] = {0, 1.05, 0};
    CHECK(t.distance(y) == doctest::Approx(0.05).epsilon(1e-10));
    const double inside[3] = {0, 0, 0.70};
    CHECK(t.distance(inside) == doctest::Approx(-0.05).epsilon(1e-9));
}

TEST_CASE("ellipsoid reflection flips the signed distance") {
    const HypersurfaceTarget t = HypersurfaceTarget::ellipsoid(1.5, 1.0, 0.75);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gaus(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        double dir[3];
        for (double& v : dir) v = gaus(rng);
        const double len = norm(dir, 3);
        double s = std::sqrt(dir[0] * dir[0] / 2.25 + dir[1] * dir[1] + dir[2] * dir[2] / 0.5625);
        double x[3];
        for (int c = 0; c < 3; ++c) x[c] = dir[c] / s + 0.1 * u(rng) * dir[c] / len;
        double y[3], z[3];
        const double d = t.distance(x);
        t.involution(x, y);
        CHECK(t.distance(y) == doctest::Approx(-d).epsilon(5e-11));
        t.involution(y, z);
        for (int c = 0; c < 3; ++c) CHECK(z[c] == doctest::Approx(x[c]).epsilon(1e-12));
    }
}

TEST_CASE("tube boundary is enforced") {
    const HypersurfaceTarget t = HypersurfaceTarget::ellipsoid(1.5, 1.0, 0.75);
    const double far[3] = {2.5, 0, 0};
    CHECK_THROWS_AS(t.distance(far), NumericalError);
    HypersurfaceTarget wide = t;
    wide.set_tube_halfwidth(1.5);
    CHECK_NOTHROW(wide.distance(far));
}

TEST_CASE("christoffel_from_metric reproduces the sphere closed form") {
    const SphereTarget t(3);
    const double x[3] = {0.9, 0.3, -0.5};
    double G[9], dG[27], Gam[27], Gam2[27];
    t.metric(x, G);
    t.metric_deriv(x, dG);
    christoffel_from_metric(3, G, dG, Gam2);
    t.christoffel(x, Gam);
    for (int k = 0; k < 27; ++k) CHECK(Gam[k] == doctest::Approx(Gam2[k]).epsilon(1e-12));
}

TEST_CASE("metric_eval bundles are self-contained") {
    MetricEval ev;
    {
        const SphereTarget t(3);
        ev = t.metric_eval();
    }  // t destroyed; the bundle must still work
    const double x[3] = {1.1, 0, 0};
    double G[9];
    ev.metric(x, G);
    const double rho = 0.5 + 0.5 / std::pow(1.1, 4.0);
    CHECK(G[0] == doctest::Approx(rho).epsilon(1e-14));
    CHECK(ev.distance(x) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_SUITE_END();
