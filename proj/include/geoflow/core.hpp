#pragma once

// Small fixed-size linear algebra helpers (ambient dimensions are 2 or 3)
// plus deterministic parallel reductions used by the assembly and CG kernels.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoflow {

// Thrown for numerical failures (solver breakdown, inadmissible evaluation
// points, degenerate geometry).  CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double dot(const double* a, const double* b, int m) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const double* a, int m) { return dot(a, a, m); }
inline double norm(const double* a, int m) { return std::sqrt(norm2(a, m)); }

inline void axpy(double s, const double* x, double* y, int m) {
    for (int i = 0; i < m; ++i) y[i] += s * x[i];
}

inline void scale(double s, double* x, int m) {
    for (int i = 0; i < m; ++i) x[i] *= s;
}

inline void copy(const double* x, double* y, int m) {
    for (int i = 0; i < m; ++i) y[i] = x[i];
}

inline void cross3(const double* a, const double* b, double* c) {
    c[0] = a[1] * b[2] - a[2] * b[1];
    c[1] = a[2] * b[0] - a[0] * b[2];
    c[2] = a[0] * b[1] - a[1] * b[0];
}

// y = A x for a row-major m x m matrix, m <= 3.
inline void mat_vec(const double* A, const double* x, double* y, int m) {
    for (int i = 0; i < m; ++i) y[i] = dot(A + i * m, x, m);
}

// C = A B, row-major m x m, C may not alias A or B.
inline void mat_mul(const double* A, const double* B, double* C, int m) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < m; ++k) s += A[i * m + k] * B[k * m + j];
            C[i * m + j] = s;
        }
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Sizes up to 4 cover everything in this library (closest-point Newton).
void gauss_solve(int n, double* A, double* b, const char* what);

// Inverse of a row-major m x m matrix, m <= 3.  Throws on (near-)singularity.
void mat_inv(const double* A, double* Ainv, int m, const char* what);

// --- Deterministic reductions -------------------------------------------
//
// Dot products and sums over long arrays are accumulated in fixed chunks of
// 1024 entries: chunks may be processed by any thread, but the chunk partial
// sums are combined serially in index order, so the result is bitwise
// independent of the thread count and of run-to-run scheduling.

inline constexpr std::size_t kReductionChunk = 1024;

double det_sum(const double* v, std::size_t n, bool parallel);
double det_dot(const double* a, const double* b, std::size_t n, bool parallel);

// Plain serial reference reductions, kept for validating the chunked path.
double serial_sum(const double* v, std::size_t n);
double serial_dot(const double* a, const double* b, std::size_t n);

}  // namespace geoflow
