#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "geoflow/core.hpp"
#include "geoflow/fem.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/presets.hpp"
#include "geoflow/targets.hpp"

using namespace geoflow;

namespace {

SurfaceMesh pillow(const double* p0, const double* p1, const double* p2) {
    SurfaceMesh m;
    m.dim = 2;
    m.coords = {p0[0], p0[1], p0[2], p1[0], p1[1], p1[2], p2[0], p2[1], p2[2]};
    m.simplices = {0, 1, 2, 0, 2, 1};
    return m;
}

VertexField perturbed_identity(const SurfaceMesh& mesh, unsigned long long seed) {
    VertexField f = identity_field(mesh);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        const double s = 1.0 + 0.2 * u(rng);
        for (int c = 0; c < 3; ++c) f.at(v)[c] = s * f.at(v)[c] + 0.15 * u(rng);
    }
    return f;
}

std::vector<double> dense_values(const SparseSystem& sys) { return sys.values; }

}  // namespace

TEST_SUITE_BEGIN("fem");

TEST_CASE("hat gradients on the reference right triangle") {
    const double p0[3] = {0, 0, 0}, p1[3] = {1, 0, 0}, p2[3] = {0, 1, 0};
    const SurfaceMesh m = pillow(p0, p1, p2);
    const ElementGeometry g = element_geometry(m, 0);
    CHECK(g.measure == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.grads[0][0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(g.grads[0][1] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(g.grads[1][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.grads[1][1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(g.grads[2][0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(g.grads[2][1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.normal[2] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hat gradients on a generic embedded triangle") {
    const double p0[3] = {0.2, -0.1, 0.5}, p1[3] = {1.1, 0.4, -0.2}, p2[3] = {-0.3, 0.9, 0.8};
    const SurfaceMesh m = pillow(p0, p1, p2);
    const ElementGeometry g = element_geometry(m, 0);
    const double* pts[3] = {p0, p1, p2};
    for (int i = 0; i < 3; ++i) {
        // tangential, and dual to the edge vectors
        CHECK(std::fabs(dot(g.grads[i], g.normal, 3)) < 1e-13);
        for (int j = 0; j < 3; ++j) {
            double e[3];
            for (int c = 0; c < 3; ++c) e[c] = pts[j][c] - pts[0][c];
            const double expect = (j == i ? 1.0 : 0.0) - (i == 0 ? (j == 0 ? 0.0 : 1.0) : 0.0);
            if (j > 0) CHECK(dot(g.grads[i], e, 3) == doctest::Approx(expect).epsilon(1e-12));
        }
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += std::fabs(g.grads[0][c] + g.grads[1][c] + g.grads[2][c]);
        CHECK(s < 1e-13);
    }
}

TEST_CASE("degenerate simplices are rejected") {
    const double p0[3] = {0, 0, 0}, p1[3] = {1, 0, 0}, p2[3] = {2, 0, 0};
    const SurfaceMesh m = pillow(p0, p1, p2);
    CHECK_THROWS_AS(element_geometry(m, 0), NumericalError);
}

TEST_CASE("mass and stiffness blocks against hand values") {
    const double p0[3] = {0, 0, 0}, p1[3] = {1, 0, 0}, p2[3] = {0, 1, 0};
    const SurfaceMesh mesh = pillow(p0, p1, p2);
    const FemPattern pattern = FemPattern::build(mesh);
    VertexField f;  // constant unit field: rho = 1, reaction = 0
    f.n_components = 3;
    f.values.assign(9, 0.0);
    for (int v = 0; v < 3; ++v) f.at(v)[0] = 1.0;

    AssemblyOptions o1, o2;
    o1.tau = 1.0;
    o2.tau = 0.5;
    SparseSystem a1, a2;
    assemble_step_system(mesh, pattern, f, o1, a1);
    assemble_step_system(mesh, pattern, f, o2, a2);

    // A(tau) = M/tau + S  =>  M = A(0.5) - A(1),  S = 2 A(1) - A(0.5)
    const std::vector<double> v1 = dense_values(a1), v2 = dense_values(a2);
    auto entry = [&](const std::vector<double>& vals, int i, int j) {
        for (int k = a1.row_ptr[i]; k < a1.row_ptr[i + 1]; ++k)
            if (a1.col_idx[k] == j) return vals[k];
        return 0.0;
    };
    // both triangles have area 1/2: M = 2 * (A/12) [2 1 1; 1 2 1; 1 1 2]
    const double mref[9] = {2, 1, 1, 1, 2, 1, 1, 1, 2};
    // S doubled from A grad.grad with grads (-1,-1),(1,0),(0,1)
    const double sref[9] = {2, -1, -1, -1, 1, 0, -1, 0, 1};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double mij = entry(v2, i, j) - entry(v1, i, j);
            const double sij = 2.0 * entry(v1, i, j) - entry(v2, i, j);
            CHECK(mij == doctest::Approx(mref[i * 3 + j] / 12.0).epsilon(1e-13));
            CHECK(sij == doctest::Approx(sref[i * 3 + j]).epsilon(1e-13));
        }
    CHECK(a1.mass_row_sum_max == doctest::Approx(4.0 / 12.0).epsilon(1e-13));

    // for a constant field the rhs is (1/tau) M f exactly (S f = 0, R = 0)
    std::vector<double> af(a1.rhs.size());
    a1.matvec(f.values.data(), af.data(), false);
    for (std::size_t i = 0; i < af.size(); ++i)
        CHECK(a1.rhs[i] == doctest::Approx(af[i]).epsilon(1e-13));
}

TEST_CASE("assembly guards against field collapse toward the origin") {
    const SurfaceMesh mesh = sphere_mesh(1);
    const FemPattern pattern = FemPattern::build(mesh);
    VertexField f;
    f.n_components = 3;
    f.values.assign((std::size_t)mesh.n_vertices() * 3, 0.0);
    for (int v = 0; v < mesh.n_vertices(); ++v) f.at(v)[0] = 0.01;
    AssemblyOptions opts;
    SparseSystem sys;
    CHECK_THROWS_AS(assemble_step_system(mesh, pattern, f, opts, sys), NumericalError);
    CHECK_THROWS_AS(discrete_energy(mesh, f, opts), NumericalError);
}

TEST_CASE("identity energy of the discrete sphere approximates its area") {
    const SurfaceMesh mesh = sphere_mesh(4);
    const VertexField f = identity_field(mesh);
    AssemblyOptions opts;
    const double e = discrete_energy(mesh, f, opts);
    const double pi = std::acos(-1.0);
    CHECK(std::fabs(e - 4.0 * pi) / (4.0 * pi) < 0.02);
}

TEST_CASE("circle identity energy against a dense 1d quadrature oracle") {
    const int k = 16;
    const SurfaceMesh mesh = polygonal_circle(k);
    const VertexField f = identity_field(mesh);
    AssemblyOptions opts;
    const double e = discrete_energy(mesh, f, opts);

    // along each chord |f(t)|^2 = 1 - 4 t (1-t) sin^2(pi/k) and |grad f| = 1;
    // composite Simpson on the weight integral as an independent route
    const double pi = std::acos(-1.0);
    const double s2 = std::sin(pi / k) * std::sin(pi / k);
    auto w = [&](double t) {
        const double n2 = 1.0 - 4.0 * t * (1.0 - t) * s2;
        return 0.5 + 0.5 / (n2 * n2);
    };
    const int n = 2000;
    double integral = w(0.0) + w(1.0);
    for (int i = 1; i < n; ++i) integral += (i % 2 ? 4.0 : 2.0) * w(i / (double)n);
    integral /= 3.0 * n;
    const double len = 2.0 * std::sin(pi / k);
    const double ref = 0.5 * k * len * integral;
    // the weight is rational in t, so a degree-5 rule carries an O(sin^6)
    // chordwise quadrature error (~1e-6 relative here); mass lumping or a
    // wrong weight exponent would sit at ~4e-2
    CHECK(e == doctest::Approx(ref).epsilon(1e-5));

    // and the exact Gauss-3 chord sum pins the value to roundoff
    const double off = std::sqrt(3.0 / 20.0);
    const double gx[3] = {0.5 - off, 0.5, 0.5 + off};
    const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    double ref3 = 0.0;
    for (int q = 0; q < 3; ++q) ref3 += gw[q] * w(gx[q]);
    ref3 *= 0.5 * k * len;
    CHECK(e == doctest::Approx(ref3).epsilon(1e-13));
}

TEST_CASE("first and second variation match finite differences (smoke)") {
    const SurfaceMesh mesh = sphere_mesh(1);
    AssemblyOptions opts;
    const VertexField f = perturbed_identity(mesh, 21);
    const std::vector<double> g = first_variation(mesh, f, opts);
    VertexField fp = f;
    const double h = 1e-6;
    double scale = 0.0, err = 0.0;
    std::vector<double> fd(g.size());
    for (int v = 0; v < mesh.n_vertices(); ++v)
        for (int c = 0; c < 3; ++c) {
            const double orig = fp.at(v)[c];
            fp.at(v)[c] = orig + h;
            const double ep = discrete_energy(mesh, fp, opts);
            fp.at(v)[c] = orig - h;
            const double em = discrete_energy(mesh, fp, opts);
            fp.at(v)[c] = orig;
            fd[(std::size_t)v * 3 + c] = (ep - em) / (2.0 * h);
        }
    for (double v : fd) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < g.size(); ++i)
        err = std::max(err, std::fabs(g[i] - fd[i]));
    CHECK(err / scale < 1e-5);

    VertexField psi = f;
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : psi.values) v = u(rng);
    const double a = second_variation_apply(mesh, f, psi, opts);
    const double h2 = 1e-4;
    VertexField fq = f;
    for (std::size_t i = 0; i < fq.values.size(); ++i)
        fq.values[i] = f.values[i] + h2 * psi.values[i];
    const double ep = discrete_energy(mesh, fq, opts);
    for (std::size_t i = 0; i < fq.values.size(); ++i)
        fq.values[i] = f.values[i] - h2 * psi.values[i];
    const double em = discrete_energy(mesh, fq, opts);
    const double e0 = discrete_energy(mesh, f, opts);
    const double fd2 = (ep - 2.0 * e0 + em) / (h2 * h2);
    CHECK(std::fabs(a - fd2) / std::fabs(fd2) < 1e-4);
}

TEST_CASE("parallel deterministic assembly is bitwise equal to serial") {
    const SurfaceMesh mesh = sphere_mesh(2);
    const FemPattern pattern = FemPattern::build(mesh);
    const VertexField f = perturbed_identity(mesh, 31);
    AssemblyOptions par, ser;
    ser.parallel = false;
    SparseSystem a, b;
    assemble_step_system(mesh, pattern, f, par, a);
    assemble_step_system_serial(mesh, pattern, f, ser, b);
    CHECK(a.values == b.values);  // bitwise
    CHECK(a.rhs == b.rhs);
    CHECK(a.mass_row_sum_max == b.mass_row_sum_max);

    CHECK(first_variation(mesh, f, par) == first_variation_serial(mesh, f, ser));
    CHECK(discrete_energy(mesh, f, par) == discrete_energy_serial(mesh, f, ser));

    AssemblyOptions atom = par;
    atom.deterministic = false;
    SparseSystem c;
    assemble_step_system(mesh, pattern, f, atom, c);
    double maxd = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        maxd = std::max(maxd, std::fabs(c.values[i] - b.values[i]));
        scale = std::max(scale, std::fabs(b.values[i]));
    }
    CHECK(maxd / scale < 1e-13);
}

TEST_CASE("assembled operator is symmetric and positive definite") {
    const SurfaceMesh mesh = sphere_mesh(1);
    const FemPattern pattern = FemPattern::build(mesh);
    const VertexField f = perturbed_identity(mesh, 41);
    AssemblyOptions opts;
    SparseSystem sys;
    assemble_step_system(mesh, pattern, f, opts, sys);
    auto entry = [&](int i, int j) {
        for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k)
            if (sys.col_idx[k] == j) return sys.values[k];
        return 0.0;
    };
    for (int i = 0; i < sys.n; ++i)
        for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k)
            CHECK(sys.values[k] == entry(sys.col_idx[k], i));  // bitwise symmetry

    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x((std::size_t)sys.n_unknowns()), y(x.size());
    for (int trial = 0; trial < 20; ++trial) {
        for (double& v : x) v = u(rng);
        sys.matvec(x.data(), y.data(), false);
        CHECK(serial_dot(x.data(), y.data(), x.size()) > 0.0);
    }
}

TEST_CASE("general-metric assembly with the sphere target matches the specialized one") {
    const SurfaceMesh mesh = sphere_mesh(1);
    const FemPattern pattern = FemPattern::build(mesh);
    const VertexField f = perturbed_identity(mesh, 51);
    AssemblyOptions opts;
    SparseSystem spec, gen;
    assemble_step_system(mesh, pattern, f, opts, spec);
    const MetricEval ev = SphereTarget(3).metric_eval();
    assemble_general_system(mesh, pattern, f, ev, opts, gen);
    REQUIRE(gen.bs == 9);
    double scale = 0.0;
    for (double v : spec.values) scale = std::max(scale, std::fabs(v));
    const int nnz = (int)spec.values.size();
    double maxerr = 0.0;
    for (int k = 0; k < nnz; ++k)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const double want = a == b ? spec.values[k] : 0.0;
                maxerr = std::max(maxerr,
                                  std::fabs(gen.values[(std::size_t)k * 9 + a * 3 + b] - want));
            }
    CHECK(maxerr / scale < 1e-12);
    double rscale = 0.0, rerr = 0.0;
    for (std::size_t i = 0; i < spec.rhs.size(); ++i) {
        rscale = std::max(rscale, std::fabs(spec.rhs[i]));
        rerr = std::max(rerr, std::fabs(gen.rhs[i] - spec.rhs[i]));
    }
    CHECK(rerr / rscale < 1e-12);
}

TEST_CASE("b-form requires unit length at the vertices") {
    const SurfaceMesh mesh = polygonal_circle(16);
    VertexField f = identity_field(mesh);
    VertexField psi = f;
    for (double& v : f.values) v *= 2.0;
    AssemblyOptions opts;
    CHECK_THROWS_AS(bilinear_b(mesh, f, psi, opts), NumericalError);
}

TEST_CASE("b-form at psi = f is close to 2 int |grad f|^2 both ways") {
    const int k = 64;
    const SurfaceMesh mesh = polygonal_circle(k);
    const VertexField f = identity_field(mesh);
    AssemblyOptions opts;
    const BFormValues b = bilinear_b(mesh, f, f, opts);
    double dirichlet = 0.0;  // int |grad f|^2 over the polygon
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const ElementGeometry g = element_geometry(mesh, s);
        const int* vs = mesh.simplex(s);
        double gf2 = 0.0;
        for (int c = 0; c < 2; ++c) {
            double gc[3] = {0, 0, 0};
            for (int i = 0; i < 2; ++i)
                for (int d = 0; d < 3; ++d)
                    gc[d] += g.grads[i][d] * f.at(vs[i])[c];
            gf2 += norm2(gc, 3);
        }
        dirichlet += g.measure * gf2;
    }
    CHECK(std::fabs(b.direct - 2.0 * dirichlet) / (2.0 * dirichlet) < 0.01);
    CHECK(std::fabs(b.decomposed - 2.0 * dirichlet) / (2.0 * dirichlet) < 0.01);
}

TEST_CASE("b-form decomposition discrepancy decays with refinement") {
    AssemblyOptions opts;
    double prev = -1.0;
    for (int k : {8, 16, 32, 64}) {
        const SurfaceMesh mesh = polygonal_circle(k);
        const VertexField f = identity_field(mesh);
        VertexField psi = map_field(f, [](const double* x, double* y) {
            y[0] = x[1] * x[1] - 0.3;
            y[1] = x[0] + 0.5 * x[1];
        });
        const BFormValues b = bilinear_b(mesh, f, psi, opts);
        const double rel = std::fabs(b.direct - b.decomposed) /
                           std::max(std::fabs(b.direct), std::fabs(b.decomposed));
        if (prev >= 0.0) CHECK(rel < 0.75 * prev);
        prev = rel;
    }
}

TEST_CASE("h1 error of the exact interpolant shrinks at second order") {
    AssemblyOptions opts;
    const auto exact = [](const double* x, double* y) {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
        y[0] = x[0] / r;
        y[1] = x[1] / r;
    };
    double e8 = 0.0, e16 = 0.0;
    {
        const SurfaceMesh mesh = polygonal_circle(8);
        e8 = h1_error(mesh, identity_field(mesh), exact, opts);
    }
    {
        const SurfaceMesh mesh = polygonal_circle(16);
        e16 = h1_error(mesh, identity_field(mesh), exact, opts);
    }
    CHECK(e8 > 0.0);
    CHECK(e8 / e16 > 3.0);
    CHECK(e8 / e16 < 5.0);
}

TEST_SUITE_END();
