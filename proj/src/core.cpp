#include "geoflow/core.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cstring>

namespace geoflow {

void gauss_solve(int n, double* A, double* b, const char* what) {
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(A[i * n + k]) > std::fabs(A[piv * n + k])) piv = i;
        if (std::fabs(A[piv * n + k]) < 1e-300)
            throw NumericalError(std::string(what) + ": singular matrix");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A[k * n + j], A[piv * n + j]);
            std::swap(b[k], b[piv]);
        }
        const double inv = 1.0 / A[k * n + k];
        for (int i = k + 1; i < n; ++i) {
            const double f = A[i * n + k] * inv;
            if (f == 0.0) continue;
            for (int j = k; j < n; ++j) A[i * n + j] -= f * A[k * n + j];
            b[i] -= f * b[k];
        }
    }
    for (int k = n - 1; k >= 0; --k) {
        double s = b[k];
        for (int j = k + 1; j < n; ++j) s -= A[k * n + j] * b[j];
        b[k] = s / A[k * n + k];
    }
}

void mat_inv(const double* A, double* Ainv, int m, const char* what) {
    for (int col = 0; col < m; ++col) {
        double work[9];
        double e[3] = {0, 0, 0};
        std::memcpy(work, A, sizeof(double) * m * m);
        e[col] = 1.0;
        gauss_solve(m, work, e, what);
        for (int i = 0; i < m; ++i) Ainv[i * m + col] = e[i];
    }
}

double serial_sum(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
}

double serial_dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

namespace {

template <class ChunkOp>
double chunked_reduce(std::size_t n, bool parallel, ChunkOp op) {
    const std::size_t nchunks = (n + kReductionChunk - 1) / kReductionChunk;
    if (nchunks <= 1) return op(0, n);
    std::vector<double> partial(nchunks);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (long long c = 0; c < (long long)nchunks; ++c) {
        const std::size_t lo = (std::size_t)c * kReductionChunk;
        const std::size_t hi = std::min(n, lo + kReductionChunk);
        partial[(std::size_t)c] = op(lo, hi);
    }
    // index-ordered combination keeps the result thread-count independent
    double s = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) s += partial[c];
    return s;
}

}  // namespace

double det_sum(const double* v, std::size_t n, bool parallel) {
    return chunked_reduce(n, parallel, [&](std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += v[i];
        return s;
    });
}

double det_dot(const double* a, const double* b, std::size_t n, bool parallel) {
    return chunked_reduce(n, parallel, [&](std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
        return s;
    });
}

}  // namespace geoflow
