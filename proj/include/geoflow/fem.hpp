#pragma once

// P1 surface finite elements on simplicial hypersurface meshes.
//
// All forms are evaluated with the shared simplex quadrature (degree 5 by
// default); the nonlinear weights are evaluated at the quadrature points, not
// lumped.  Every assembly/integration kernel has an OpenMP path whose result
// is reproducible bit-for-bit (per-simplex contributions merged in simplex
// order, reductions chunk-ordered) plus a plain serial reference used by the
// tests and the benchmark.

#include <functional>
#include <vector>

#include "geoflow/mesh.hpp"
#include "geoflow/quadrature.hpp"
#include "geoflow/sparse.hpp"
#include "geoflow/targets.hpp"

namespace geoflow {

struct ElementGeometry {
    double measure = 0.0;
    double grads[3][3] = {};  // tangential hat gradients [local vertex][coord]
    double normal[3] = {};    // unit normal (consistent with orientation)
};

/// Tangential P1 geometry of simplex s; throws on degenerate simplices.
ElementGeometry element_geometry(const SurfaceMesh& mesh, int s);

struct AssemblyOptions {
    double tau = 1e-3;
    int quad_degree = 5;
    double guard_radius = 0.1;
    bool parallel = true;
    bool deterministic = true;  // simplex-ordered merge / chunked reductions
};

/// Vertex-adjacency CSR pattern with a per-simplex scatter table, built once
/// per mesh and reused across time steps.
struct FemPattern {
    std::vector<int> row_ptr;
    std::vector<int> col_idx;
    std::vector<int> scatter;  // n_simplices * (d+1)^2 value slots

    static FemPattern build(const SurfaceMesh& mesh);
};

/// One semi-implicit step for sphere targets: fills the scalar system
///   A = (1/tau) M(f_old) + S(f_old),
///   b_i = sum_j [(1/tau) M_ij + R_ij] f_old_j,
/// with M/S weighted by rho(f_old) = 1/2 + 1/(2|f_old|^4) and the reaction
/// R_ij = \int phi_i phi_j |grad f_old|^2 / |f_old|^6 at quadrature points.
void assemble_step_system(const SurfaceMesh& mesh, const FemPattern& pattern,
                          const VertexField& f_old, const AssemblyOptions& opts,
                          SparseSystem& out);

/// Serial reference for assemble_step_system (independent accumulation path).
void assemble_step_system_serial(const SurfaceMesh& mesh, const FemPattern& pattern,
                                 const VertexField& f_old, const AssemblyOptions& opts,
                                 SparseSystem& out);

/// Component-coupled step system for a general extended metric G:
///   M_ij^{ab} = \int phi_i phi_j G_ab(f_old),   S likewise with gradients,
///   b_i^b = (1/tau)(M f_old)_i^b
///           - 1/2 \int D_b G_{kl}(f_old) (grad f_old^k . grad f_old^l) phi_i.
void assemble_general_system(const SurfaceMesh& mesh, const FemPattern& pattern,
                             const VertexField& f_old, const MetricEval& metric,
                             const AssemblyOptions& opts, SparseSystem& out);

void assemble_general_system_serial(const SurfaceMesh& mesh, const FemPattern& pattern,
                                    const VertexField& f_old, const MetricEval& metric,
                                    const AssemblyOptions& opts, SparseSystem& out);

/// E_h(f) = 1/2 \int |grad f|^2 (1/2 + 1/(2|f|^4)).
double discrete_energy(const SurfaceMesh& mesh, const VertexField& f,
                       const AssemblyOptions& opts);
double discrete_energy_serial(const SurfaceMesh& mesh, const VertexField& f,
                              const AssemblyOptions& opts);

/// Gradient of E_h: g_i^a = \int grad f^a . grad phi_i rho(f)
///                        - \int |grad f|^2 f^a phi_i / |f|^6.
std::vector<double> first_variation(const SurfaceMesh& mesh, const VertexField& f,
                                    const AssemblyOptions& opts);
std::vector<double> first_variation_serial(const SurfaceMesh& mesh, const VertexField& f,
                                           const AssemblyOptions& opts);

/// E''_h(f)(psi,psi) = \int |grad psi|^2 rho(f)
///   - 4 \int (grad f : grad psi)(f.psi)/|f|^6 - \int |grad f|^2 |psi|^2/|f|^6
///   + 6 \int |grad f|^2 (f.psi)^2 / |f|^8.
double second_variation_apply(const SurfaceMesh& mesh, const VertexField& f,
                              const VertexField& psi, const AssemblyOptions& opts);

struct BFormValues {
    double direct = 0.0;      // \int |grad psi|^2 - 4 (grad f : grad psi)(f.psi)
                              //   - |grad f|^2 |psi|^2 + 6 |grad f|^2 (f.psi)^2
    double decomposed = 0.0;  // \int |grad(psi.f)|^2 + |grad(psi.f_perp)|^2
                              //   + 2 |grad f|^2 (psi.f)^2
};

/// Second-variation form at a unit-circle-valued map (weights = 1) and its
/// normal/tangential decomposition; the two agree for exactly harmonic unit
/// maps and drift apart at O(h) for discretized ones.  d = 1, two components.
BFormValues bilinear_b(const SurfaceMesh& mesh, const VertexField& f,
                       const VertexField& psi, const AssemblyOptions& opts);

/// sqrt( |f_h - exact|^2_{L2} + |grad(f_h - I_h exact)|^2_{L2} ) where
/// `exact` evaluates the comparison map composed with the lift at an ambient
/// point (e.g. identity after radial projection) and I_h is the vertex
/// interpolant.
double h1_error(const SurfaceMesh& mesh, const VertexField& f,
                const std::function<void(const double*, double*)>& exact,
                const AssemblyOptions& opts);

}  // namespace geoflow
