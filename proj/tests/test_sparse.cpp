#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "geoflow/core.hpp"
#include "geoflow/fem.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/presets.hpp"
#include "geoflow/sparse.hpp"

using namespace geoflow;

namespace {

// dense Gaussian elimination with partial pivoting, oracle for small systems
std::vector<double> dense_solve(std::vector<double> A, std::vector<double> b) {
    const int n = (int)b.size();
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(A[i * n + k]) > std::fabs(A[piv * n + k])) piv = i;
        for (int j = 0; j < n; ++j) std::swap(A[k * n + j], A[piv * n + j]);
        std::swap(b[k], b[piv]);
        for (int i = k + 1; i < n; ++i) {
            const double f = A[i * n + k] / A[k * n + k];
            for (int j = k; j < n; ++j) A[i * n + j] -= f * A[k * n + j];
            b[i] -= f * b[k];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A[i * n + j] * b[j];
        b[i] = s / A[i * n + i];
    }
    return b;
}

// expand the scalar CSR operator applied to component c into a dense matrix
std::vector<double> dense_from_scalar_csr(const SparseSystem& sys) {
    const int n = sys.n;
    std::vector<double> A((std::size_t)n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k)
            A[(std::size_t)i * n + sys.col_idx[k]] = sys.values[k];
    return A;
}

SparseSystem assembled_system() {
    const SurfaceMesh mesh = sphere_mesh(1);
    const FemPattern pattern = FemPattern::build(mesh);
    VertexField f = identity_field(mesh);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    for (double& v : f.values) v *= 1.0 + u(rng);
    AssemblyOptions opts;
    SparseSystem sys;
    assemble_step_system(mesh, pattern, f, opts, sys);
    return sys;
}

}  // namespace

TEST_SUITE_BEGIN("sparse");

TEST_CASE("cg matches a dense oracle on an assembled step system") {
    const SparseSystem sys = assembled_system();
    REQUIRE(sys.nc == 3);
    REQUIRE(sys.bs == 1);
    const std::vector<double> A = dense_from_scalar_csr(sys);

    std::vector<double> x((std::size_t)sys.n * sys.nc, 0.0);
    CgOptions opts;
    const CgResult res = cg_solve(sys, x.data(), opts);
    CHECK(res.rel_residual <= opts.rel_tol);

    for (int c = 0; c < sys.nc; ++c) {
        std::vector<double> bc(sys.n);
        for (int i = 0; i < sys.n; ++i) bc[i] = sys.rhs[(std::size_t)i * sys.nc + c];
        const std::vector<double> ref = dense_solve(A, bc);
        for (int i = 0; i < sys.n; ++i)
            CHECK(x[(std::size_t)i * sys.nc + c] ==
                  doctest::Approx(ref[i]).epsilon(1e-7));
    }
}

TEST_CASE("jacobi preconditioning reaches the same solution") {
    const SparseSystem sys = assembled_system();
    std::vector<double> x0((std::size_t)sys.n_unknowns(), 0.0), x1 = x0;
    CgOptions plain, jac;
    jac.jacobi = true;
    cg_solve(sys, x0.data(), plain);
    cg_solve(sys, x1.data(), jac);
    for (std::size_t i = 0; i < x0.size(); ++i)
        CHECK(x0[i] == doctest::Approx(x1[i]).epsilon(1e-7));
}

TEST_CASE("matvec parallel equals serial bitwise") {
    const SparseSystem sys = assembled_system();
    std::vector<double> x((std::size_t)sys.n_unknowns());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * (double)i);
    std::vector<double> yp(x.size()), ys(x.size());
    sys.matvec(x.data(), yp.data(), true);
    sys.matvec_serial(x.data(), ys.data());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(yp[i] == ys[i]);
}

TEST_CASE("cg is deterministic run to run") {
    const SparseSystem sys = assembled_system();
    std::vector<double> x0((std::size_t)sys.n_unknowns(), 0.0), x1 = x0;
    CgOptions opts;
    const CgResult r0 = cg_solve(sys, x0.data(), opts);
    const CgResult r1 = cg_solve(sys, x1.data(), opts);
    CHECK(r0.iters == r1.iters);
    CHECK(x0 == x1);  // bitwise
}

TEST_CASE("warm starts do not take more iterations") {
    const SparseSystem sys = assembled_system();
    std::vector<double> cold((std::size_t)sys.n_unknowns(), 0.0);
    CgOptions opts;
    const CgResult rc = cg_solve(sys, cold.data(), opts);
    std::vector<double> warm = cold;  // exact solution as initial guess
    const CgResult rw = cg_solve(sys, warm.data(), opts);
    CHECK(rw.iters <= rc.iters);
    CHECK(rw.iters <= 1);
}

TEST_CASE("cg reports breakdown on an indefinite matrix") {
    SparseSystem sys;
    sys.n = 2;
    sys.nc = 1;
    sys.bs = 1;
    sys.row_ptr = {0, 1, 2};
    sys.col_idx = {0, 1};
    sys.values = {1.0, -1.0};
    sys.rhs = {0.0, 1.0};
    std::vector<double> x(2, 0.0);
    CgOptions opts;
    CHECK_THROWS_AS(cg_solve(sys, x.data(), opts), NumericalError);
}

TEST_CASE("jacobi refuses a nonpositive diagonal") {
    SparseSystem sys;
    sys.n = 2;
    sys.nc = 1;
    sys.bs = 1;
    sys.row_ptr = {0, 1, 2};
    sys.col_idx = {0, 1};
    sys.values = {1.0, -1.0};
    sys.rhs = {1.0, 1.0};
    std::vector<double> x(2, 0.0);
    CgOptions opts;
    opts.jacobi = true;
    CHECK_THROWS_AS(cg_solve(sys, x.data(), opts), NumericalError);
}

TEST_SUITE_END();
