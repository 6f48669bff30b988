#include "geoflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "geoflow/core.hpp"

namespace geoflow {

void FlowConfig::check() const {
    if (!(tau > 0.0)) throw NumericalError("flow: tau must be positive");
    if (!(stop_tol > 0.0)) throw NumericalError("flow: stop_tol must be positive");
    if (max_steps <= 0) throw NumericalError("flow: max_steps must be positive");
    if (!(cg_rel_tol > 0.0)) throw NumericalError("flow: cg_rel_tol must be positive");
    if (quad_degree != 3 && quad_degree != 5 && quad_degree != 7)
        throw NumericalError("flow: quad_degree must be 3, 5 or 7");
}

namespace {

double sphere_distance(const double* x, int m) { return norm(x, m) - 1.0; }

double max_distance_monitor(const VertexField& f, const MetricEval* metric) {
    double md = 0.0;
    for (int v = 0; v < f.n_vertices(); ++v) {
        const double d = metric ? metric->distance(f.at(v))
                                : sphere_distance(f.at(v), f.n_components);
        md = std::max(md, std::fabs(d));
    }
    return md;
}

}  // namespace

StepResult flow_step(const SurfaceMesh& mesh, const FemPattern& pattern,
                     VertexField& f, SparseSystem& system, const FlowConfig& cfg,
                     const MetricEval* metric) {
    const AssemblyOptions aopts = cfg.assembly();
    if (cfg.scheme == Scheme::GeneralMetric) {
        if (!metric) throw NumericalError("flow: general scheme needs a metric");
        assemble_general_system(mesh, pattern, f, *metric, aopts, system);
    } else {
        assemble_step_system(mesh, pattern, f, aopts, system);
    }
    std::vector<double> x = f.values;  // warm start with the previous iterate
    CgOptions copts;
    copts.rel_tol = cfg.cg_rel_tol;
    copts.max_iters = cfg.cg_max_iters;
    copts.jacobi = cfg.jacobi;
    copts.parallel = cfg.parallel;
    copts.deterministic = cfg.deterministic;
    const CgResult cg = cg_solve(system, x.data(), copts);

    double maxvel = 0.0;
    const int nc = f.n_components;
    for (int v = 0; v < f.n_vertices(); ++v) {
        double d2 = 0.0;
        for (int a = 0; a < nc; ++a) {
            const double d = x[(std::size_t)v * nc + a] - f.values[(std::size_t)v * nc + a];
            d2 += d * d;
        }
        maxvel = std::max(maxvel, std::sqrt(d2));
    }
    f.values.swap(x);
    return {maxvel / cfg.tau, cg.iters};
}

FlowResult run_flow(const SurfaceMesh& mesh, const VertexField& f0,
                    const FlowConfig& cfg, const MetricEval* metric,
                    const StepObserver& observer) {
    cfg.check();
    if (f0.n_vertices() != mesh.n_vertices())
        throw NumericalError("flow: initial field/mesh vertex count mismatch");
    const FemPattern pattern = FemPattern::build(mesh);
    const AssemblyOptions aopts = cfg.assembly();

    FlowResult out;
    out.f = f0;
    SparseSystem system;
    out.monitors.push_back({0.0, max_distance_monitor(out.f, metric),
                            discrete_energy(mesh, out.f, aopts), 0.0, 0});
    if (observer) observer(out.monitors.back(), out.f);
    for (long m = 0;; ++m) {
        if (cfg.t_end > 0.0 && (double)m * cfg.tau >= cfg.t_end - 1e-12) {
            out.stopped_by_tolerance = false;
            break;
        }
        if (m >= cfg.max_steps)
            throw NumericalError("flow: stopping rule not reached within max_steps");
        const StepResult st = flow_step(mesh, pattern, out.f, system, cfg, metric);
        out.steps = m + 1;
        out.final_time = (double)(m + 1) * cfg.tau;
        out.monitors.push_back({out.final_time, max_distance_monitor(out.f, metric),
                                discrete_energy(mesh, out.f, aopts), st.max_velocity,
                                st.cg_iters});
        if (observer) observer(out.monitors.back(), out.f);
        if (st.max_velocity <= cfg.stop_tol) {
            out.stopped_by_tolerance = true;
            break;
        }
    }
    if (out.steps == 0) {  // t_end smaller than one step: still report the bound
        if (cfg.scheme == Scheme::GeneralMetric && metric)
            assemble_general_system(mesh, pattern, out.f, *metric, aopts, system);
        else
            assemble_step_system(mesh, pattern, out.f, aopts, system);
    }
    out.mass_row_sum_max = system.mass_row_sum_max;
    return out;
}

StationaryResult solve_stationary(const SurfaceMesh& mesh, const VertexField& f0,
                                  const FlowConfig& cfg) {
    if (cfg.scheme != Scheme::SphereSpecialized)
        throw NumericalError("solve_stationary: only the sphere scheme is certified");
    if (cfg.t_end > 0.0)
        throw NumericalError("solve_stationary: t_end is incompatible with stationarity");
    StationaryResult res;
    res.flow = run_flow(mesh, f0, cfg);
    const std::vector<double> grad = first_variation(mesh, res.flow.f, cfg.assembly());
    for (double g : grad) res.residual_max = std::max(res.residual_max, std::fabs(g));
    res.residual_bound = 4.0 * cfg.stop_tol * res.flow.mass_row_sum_max;
    if (res.residual_max > res.residual_bound)
        throw NumericalError("solve_stationary: first variation residual " +
                             std::to_string(res.residual_max) + " exceeds bound " +
                             std::to_string(res.residual_bound));
    return res;
}

namespace {

template <class Rhs>
std::vector<double> rk4(double r0, double t_end, double dt, Rhs rhs) {
    if (!(dt > 0.0) || !(t_end >= 0.0))
        throw NumericalError("ode reference: bad step or horizon");
    const long K = (long)std::llround(t_end / dt);
    std::vector<double> r;
    r.reserve((std::size_t)K + 1);
    double y = r0;
    r.push_back(y);
    for (long k = 0; k < K; ++k) {
        const double k1 = rhs(y);
        const double k2 = rhs(y + 0.5 * dt * k1);
        const double k3 = rhs(y + 0.5 * dt * k2);
        const double k4 = rhs(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        r.push_back(y);
    }
    return r;
}

}  // namespace

std::vector<double> scaling_ode_reference(double r0, double t_end, double dt, int n) {
    return rk4(r0, t_end, dt, [n](double r) {
        const double r4 = r * r * r * r;
        return n * r * (1.0 - r4) / (1.0 + r4);
    });
}

std::vector<double> unstable_extension_ode(double r0, double t_end, double dt, int n) {
    return rk4(r0, t_end, dt, [n](double r) { return -double(n) * r + double(n) * r * r; });
}

}  // namespace geoflow
