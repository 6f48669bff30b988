#pragma once

// Canned runs: the three sphere-flow experiments, the circle convergence
// study, the radial scaling comparison, and the geometry/variation check
// batteries.  Each writes its artifacts (monitor CSVs, VTK snapshots, summary
// CSV, report) into an output directory and returns the measured numbers
// plus a list of named pass/fail assertions; the CLI and the acceptance
// suite both drive these entry points.

#include <string>
#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/mesh.hpp"

namespace geoflow {

struct AssertLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunReport {
    std::string tag;
    std::vector<AssertLine> asserts;
    bool all_pass() const {
        for (const auto& a : asserts)
            if (!a.pass) return false;
        return true;
    }
};

struct PresetOptions {
    std::string out_dir = "out";
    double tau = 1e-3;
    double stop_tol = 1e-5;
    double cg_rel_tol = 1e-10;
    bool jacobi = false;
    int quad_degree = 5;
    bool parallel = true;
    bool deterministic = true;
    long snapshot_every = 0;             // extra VTK snapshots every k steps
    bool corrected_deformation = true;   // false: literal (x1, a x2, a x2) map
    unsigned long long seed = 12345;     // check batteries
};

/// Octahedron refined `level` times with new vertices projected to |x| = 1.
SurfaceMesh sphere_mesh(int level);

/// The surface deformations used by the experiments:
/// (x1,x2,x3) -> (x1, a(x1) x2, a(x1) x3) with a(s) = c2 s^2 + c0
/// (corrected variant; the literal printed variant repeats the x2 image).
std::function<void(const double*, double*)> experiment_deformation(double c2, double c0,
                                                                   bool corrected);

struct ExperimentLevelResult {
    int level = 0;
    double h_max = 0.0;
    int n_vertices = 0;
    long steps = 0;
    double final_time = 0.0;
    double initial_max_distance = 0.0;
    double sup_max_distance = 0.0;
    double final_energy = 0.0;
    double decay_time = -1.0;  // first t with max_distance < 0.02 (-1: never)
    int snapshots_written = 0;
    std::vector<MonitorRecord> monitors;
};

struct ExperimentResult {
    std::vector<ExperimentLevelResult> levels;
    RunReport report;
};

/// Deformed-sphere relaxation (a = 0.6 x1^2 + 0.4) over the given refinement
/// levels; identity-interpolant initial map taken before deformation.
ExperimentResult run_experiment1(const PresetOptions& opts,
                                 const std::vector<int>& levels = {4, 5, 6});

/// Same surface at one level, initial map composed with y -> (0.5 + y1^2 y3^2) y.
ExperimentResult run_experiment2(const PresetOptions& opts, int level = 5);

/// Stronger deformation a = 0.75 x1^2 + 0.25 at one level.
ExperimentResult run_experiment3(const PresetOptions& opts, int level = 5);

struct ConvergeLevelResult {
    int k = 0;  // polygon has 8 * 2^k vertices
    double h = 0.0;
    double error = 0.0;  // h1_error against the identity through radial lift
    double eoc = 0.0;    // w.r.t. previous level (0 for the first)
    double residual = 0.0;
    double residual_bound = 0.0;
};

struct ConvergeResult {
    std::vector<ConvergeLevelResult> levels;
    RunReport report;
};

/// Stationary harmonic maps of regular polygons into S^1 and the H1-error
/// convergence order against the identity.
ConvergeResult run_converge_circle(const PresetOptions& opts,
                                   const std::vector<int>& levels = {1, 2, 3, 4});

struct ScalingCase {
    double r0 = 0.0;
    double max_deviation = 0.0;  // max |mean vertex norm - ODE r(t)|, t in [0,1]
};

struct ScalingResult {
    std::vector<ScalingCase> cases;
    RunReport report;
};

/// Radially scaled identity maps on the level-`level` sphere mesh flow back
/// to the sphere; mean vertex norm is compared with the scaling ODE.
ScalingResult run_scaling_test(const PresetOptions& opts,
                               const std::vector<double>& r0s = {0.9, 1.1},
                               int level = 5, double t_end = 1.0);

struct CheckHooks {
    bool corrupt_metric = false;  // drop the d^2 term of the extended metric
    bool flip_reaction = false;   // flip the reaction sign in the gradient
};

/// Property battery over both target types (involutions, metric identities,
/// Christoffel/covariant-Hessian consistency, tube positivity).  The battery
/// always also runs the corrupted variants and checks that they are caught;
/// the hooks force the corruption into the main checks (for exercising the
/// failure path end to end).
RunReport run_check_geometry(const PresetOptions& opts, const CheckHooks& hooks = {});

/// Finite-difference harness for the discrete energy gradient and Hessian.
RunReport run_check_variations(const PresetOptions& opts, const CheckHooks& hooks = {});

void write_report(const RunReport& report, const std::string& path);
void write_failed_marker(const std::string& out_dir, const std::string& message);

}  // namespace geoflow
