#include "geoflow/sparse.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "geoflow/core.hpp"

namespace geoflow {

namespace {

template <bool Block>
void matvec_rows(const SparseSystem& A, const double* x, double* y, bool parallel) {
    const int nc = A.nc;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int i = 0; i < A.n; ++i) {
        double acc[3] = {0, 0, 0};
        for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
            const double* xj = x + (std::size_t)A.col_idx[p] * nc;
            if constexpr (Block) {
                const double* blk = A.values.data() + (std::size_t)p * nc * nc;
                for (int a = 0; a < nc; ++a)
                    for (int b = 0; b < nc; ++b) acc[a] += blk[a * nc + b] * xj[b];
            } else {
                const double v = A.values[p];
                for (int a = 0; a < nc; ++a) acc[a] += v * xj[a];
            }
        }
        for (int a = 0; a < nc; ++a) y[(std::size_t)i * nc + a] = acc[a];
    }
}

}  // namespace

void SparseSystem::matvec(const double* x, double* y, bool parallel) const {
    if (nc > 3) throw NumericalError("sparse: more than 3 components unsupported");
    if (block())
        matvec_rows<true>(*this, x, y, parallel);
    else
        matvec_rows<false>(*this, x, y, parallel);
}

void SparseSystem::matvec_serial(const double* x, double* y) const {
    const std::size_t N = (std::size_t)n * nc;
    for (std::size_t i = 0; i < N; ++i) y[i] = 0.0;
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            const int j = col_idx[p];
            if (block()) {
                const double* blk = values.data() + (std::size_t)p * nc * nc;
                for (int a = 0; a < nc; ++a)
                    for (int b = 0; b < nc; ++b)
                        y[(std::size_t)i * nc + a] += blk[a * nc + b] * x[(std::size_t)j * nc + b];
            } else {
                for (int a = 0; a < nc; ++a)
                    y[(std::size_t)i * nc + a] += values[p] * x[(std::size_t)j * nc + a];
            }
        }
}

std::vector<double> SparseSystem::diagonal() const {
    std::vector<double> d((std::size_t)n * nc, 0.0);
    for (int i = 0; i < n; ++i)
        for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            if (col_idx[p] != i) continue;
            for (int a = 0; a < nc; ++a)
                d[(std::size_t)i * nc + a] =
                    block() ? values[(std::size_t)p * nc * nc + a * nc + a] : values[p];
        }
    return d;
}

namespace {

double reduce_dot(const double* a, const double* b, std::size_t n, const CgOptions& o) {
    if (o.deterministic) return det_dot(a, b, n, o.parallel);
    double s = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : s) if (o.parallel)
#endif
    for (long long i = 0; i < (long long)n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

CgResult cg_solve(const SparseSystem& A, double* x, const CgOptions& opts) {
    const std::size_t N = (std::size_t)A.n_unknowns();
    if (A.rhs.size() != N) throw NumericalError("cg: rhs size mismatch");
    const long max_iters = opts.max_iters > 0 ? opts.max_iters : 10L * (long)N;
    const double* b = A.rhs.data();

    const double bnorm = std::sqrt(reduce_dot(b, b, N, opts));
    if (bnorm == 0.0) {
        std::memset(x, 0, N * sizeof(double));
        return {0, 0.0};
    }
    const double tol_abs = opts.rel_tol * bnorm;

    std::vector<double> dinv;
    if (opts.jacobi) {
        dinv = A.diagonal();
        for (auto& v : dinv) {
            if (!(v > 0.0)) throw NumericalError("cg: nonpositive diagonal, matrix not SPD");
            v = 1.0 / v;
        }
    }
    auto precond = [&](const double* r, double* z) {
        if (opts.jacobi)
            for (std::size_t i = 0; i < N; ++i) z[i] = dinv[i] * r[i];
        else
            std::memcpy(z, r, N * sizeof(double));
    };

    std::vector<double> r(N), z(N), p(N), v(N);
    long total_iters = 0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        A.matvec(x, v.data(), opts.parallel);
        for (std::size_t i = 0; i < N; ++i) r[i] = b[i] - v[i];
        double rnorm = std::sqrt(reduce_dot(r.data(), r.data(), N, opts));
        if (rnorm <= tol_abs) return {(int)total_iters, rnorm / bnorm};

        precond(r.data(), z.data());
        std::memcpy(p.data(), z.data(), N * sizeof(double));
        double rz = reduce_dot(r.data(), z.data(), N, opts);
        while (total_iters < max_iters) {
            A.matvec(p.data(), v.data(), opts.parallel);
            const double pv = reduce_dot(p.data(), v.data(), N, opts);
            if (!(pv > 0.0)) throw NumericalError("cg: breakdown, matrix not SPD");
            const double alpha = rz / pv;
            for (std::size_t i = 0; i < N; ++i) x[i] += alpha * p[i];
            for (std::size_t i = 0; i < N; ++i) r[i] -= alpha * v[i];
            ++total_iters;
            rnorm = std::sqrt(reduce_dot(r.data(), r.data(), N, opts));
            if (rnorm <= tol_abs) break;
            precond(r.data(), z.data());
            const double rznew = reduce_dot(r.data(), z.data(), N, opts);
            const double beta = rznew / rz;
            rz = rznew;
            for (std::size_t i = 0; i < N; ++i) p[i] = z[i] + beta * p[i];
        }
        // confirm with the true residual; restart if the recurrence drifted
        A.matvec(x, v.data(), opts.parallel);
        for (std::size_t i = 0; i < N; ++i) r[i] = b[i] - v[i];
        rnorm = std::sqrt(reduce_dot(r.data(), r.data(), N, opts));
        if (rnorm <= tol_abs) return {(int)total_iters, rnorm / bnorm};
        if (total_iters >= max_iters)
            throw NumericalError("cg: iteration cap reached, residual " +
                                 std::to_string(rnorm / bnorm));
    }
    throw NumericalError("cg: failed to reach tolerance after restarts");
}

}  // namespace geoflow
