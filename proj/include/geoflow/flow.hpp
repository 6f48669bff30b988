#pragma once

// Semi-implicit harmonic map heat flow: at each step the weights are frozen
// at the previous iterate and one SPD linear system is solved by CG (warm
// started with the previous solution).  Time is accumulated as step * tau.

#include <vector>

#include "geoflow/fem.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/sparse.hpp"
#include "geoflow/targets.hpp"

namespace geoflow {

enum class Scheme {
    SphereSpecialized,  // scalar system with rho = 1/2 + 1/(2|f|^4)
    GeneralMetric,      // component-coupled system from a MetricEval
};

struct FlowConfig {
    double tau = 1e-3;
    double stop_tol = 1e-5;   // on max_j |f^{m+1}(p_j) - f^m(p_j)| / tau
    long max_steps = 1000000;
    double cg_rel_tol = 1e-10;
    long cg_max_iters = 0;  // 0: 10 * n_unknowns
    bool jacobi = false;
    int quad_degree = 5;
    double guard_radius = 0.1;
    bool parallel = true;
    bool deterministic = true;
    double t_end = 0.0;  // > 0: finish at t >= t_end instead of requiring the
                         // stopping rule to fire
    Scheme scheme = Scheme::SphereSpecialized;

    AssemblyOptions assembly() const {
        return {tau, quad_degree, guard_radius, parallel, deterministic};
    }
    void check() const;
};

struct MonitorRecord {
    double t = 0.0;
    double max_distance = 0.0;  // max_j |dist(f(p_j))| to the target manifold
    double energy = 0.0;
    double max_velocity = 0.0;  // 0 in the t = 0 record
    int cg_iters = 0;
};

struct StepResult {
    double max_velocity = 0.0;
    int cg_iters = 0;
};

struct FlowResult {
    VertexField f;
    std::vector<MonitorRecord> monitors;  // t = 0 row plus one row per step
    long steps = 0;
    double final_time = 0.0;
    bool stopped_by_tolerance = false;
    double mass_row_sum_max = 0.0;  // of the last assembled system
};

/// One semi-implicit step; f is advanced in place, `system` is reused
/// workspace.  `metric` must be non-null for Scheme::GeneralMetric.
StepResult flow_step(const SurfaceMesh& mesh, const FemPattern& pattern,
                     VertexField& f, SparseSystem& system, const FlowConfig& cfg,
                     const MetricEval* metric);

/// Called after every recorded monitor row (including the t = 0 row) with
/// the current iterate; used for snapshots and custom per-step traces.
using StepObserver = std::function<void(const MonitorRecord&, const VertexField&)>;

/// Runs the flow until the stopping rule max velocity <= stop_tol fires (or
/// t_end is reached when set).  Throws if max_steps is exhausted first.
FlowResult run_flow(const SurfaceMesh& mesh, const VertexField& f0,
                    const FlowConfig& cfg, const MetricEval* metric = nullptr,
                    const StepObserver& observer = {});

struct StationaryResult {
    FlowResult flow;
    double residual_max = 0.0;    // max component of the first variation
    double residual_bound = 0.0;  // 4 * stop_tol * (mass-matrix row-sum bound):
                                  // the stopping rule leaves a mass-weighted
                                  // velocity of at most stop_tol per node, the
                                  // factor absorbs the weight drift between
                                  // the final two iterates
};

/// Flow to stationarity (sphere scheme) and certify the discrete first
/// variation residually.  Throws if the residual exceeds its bound.
StationaryResult solve_stationary(const SurfaceMesh& mesh, const VertexField& f0,
                                  const FlowConfig& cfg);

/// RK4 samples of r' = n r (1 - r^4)/(1 + r^4), r(0) = r0, at k*dt up to
/// t_end; the radial motion of f(x,t) = r(t) x under the averaged metric.
std::vector<double> scaling_ode_reference(double r0, double t_end, double dt, int n);

/// RK4 samples of r' = -n r + n r^2: the same motion under the naive
/// (non-averaged) extension, with the sphere as an unstable equilibrium.
std::vector<double> unstable_extension_ode(double r0, double t_end, double dt, int n);

}  // namespace geoflow
