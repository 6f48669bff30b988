#pragma once

// CSR storage for the step systems and a conjugate gradient solver.
//
// The vertex adjacency pattern is scalar; systems either hold one value per
// pattern entry (component-decoupled sphere scheme, the same matrix acts on
// every solution component) or an nc x nc block per entry (component-coupled
// general-metric scheme).  Solution vectors are vertex-major: x[v*nc + c].

#include <cstddef>
#include <vector>

namespace geoflow {

struct SparseSystem {
    int n = 0;   // vertices (pattern rows)
    int nc = 1;  // solution components per vertex
    int bs = 1;  // values per pattern entry edge: 1 or nc*nc (block)
    std::vector<int> row_ptr;     // n+1
    std::vector<int> col_idx;     // nnz
    std::vector<double> values;   // nnz * bs
    std::vector<double> rhs;      // n * nc
    double mass_row_sum_max = 0;  // max row sum of the weighted mass matrix

    int n_unknowns() const { return n * nc; }
    bool block() const { return bs != 1; }

    /// y = A x.  OpenMP over rows; each row is accumulated serially, so the
    /// result does not depend on the thread count.
    void matvec(const double* x, double* y, bool parallel = true) const;
    /// Plain single-loop reference used to validate the parallel kernel.
    void matvec_serial(const double* x, double* y) const;

    /// Diagonal of the operator (for Jacobi preconditioning).
    std::vector<double> diagonal() const;
};

struct CgOptions {
    double rel_tol = 1e-10;
    long max_iters = 0;  // 0: 10 * n_unknowns
    bool jacobi = false;
    bool parallel = true;
    bool deterministic = true;  // chunk-ordered reductions
};

struct CgResult {
    int iters = 0;
    double rel_residual = 0.0;  // true residual norm / rhs norm at exit
};

/// Conjugate gradients on the assembled SPD system; x holds the initial
/// guess on entry (warm start) and the solution on exit.  Guarantees
/// |A x - b| <= rel_tol |b| on return (verified against the true residual,
/// with restart); throws NumericalError on breakdown or iteration cap.
CgResult cg_solve(const SparseSystem& A, double* x, const CgOptions& opts);

}  // namespace geoflow
