// Benchmark of the OpenMP kernels against their serial reference
// implementations: step-system assembly, sparse matvec, energy/gradient
// evaluation and the chunked reductions.  Also reports the max deviation
// between the two paths (0 expected for the deterministic assembly).
//
// usage: bench [level=4] [reps=5]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "geoflow/core.hpp"
#include "geoflow/fem.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/presets.hpp"
#include "geoflow/sparse.hpp"

using namespace geoflow;

namespace {

double time_best_ms(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial_ms, double parallel_ms, double maxdiff) {
    std::printf("%-28s %10.3f %10.3f %8.2fx   %.3g\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, maxdiff);
}

double field_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::fabs(a[i] - b[i]));
    return e;
}

}  // namespace

int main(int argc, char** argv) {
    const int level = argc > 1 ? std::atoi(argv[1]) : 4;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;

    const SurfaceMesh mesh = sphere_mesh(level);
    const FemPattern pattern = FemPattern::build(mesh);
    VertexField f = identity_field(mesh);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-0.2, 0.2);
    for (double& v : f.values) v *= 1.0 + unif(rng);

    AssemblyOptions par;  // parallel, deterministic merge
    AssemblyOptions atomics = par;
    atomics.deterministic = false;
    AssemblyOptions ser = par;
    ser.parallel = false;

#ifdef _OPENMP
    std::printf("level %d: %d vertices, %d triangles, %d OpenMP threads\n", level,
                mesh.n_vertices(), mesh.n_simplices(), omp_get_max_threads());
#else
    std::printf("level %d: %d vertices, %d triangles, OpenMP disabled\n", level,
                mesh.n_vertices(), mesh.n_simplices());
#endif
    std::printf("%-28s %10s %10s %9s   %s\n", "kernel", "serial_ms", "parallel", "speedup",
                "max|diff|");

    SparseSystem sys_par, sys_ser, sys_atomic;
    const double t_ser =
        time_best_ms(reps, [&] { assemble_step_system_serial(mesh, pattern, f, ser, sys_ser); });
    const double t_par =
        time_best_ms(reps, [&] { assemble_step_system(mesh, pattern, f, par, sys_par); });
    double d = std::max(field_diff(sys_par.values, sys_ser.values),
                        field_diff(sys_par.rhs, sys_ser.rhs));
    row("assemble (ordered merge)", t_ser, t_par, d);

    const double t_atomic = time_best_ms(
        reps, [&] { assemble_step_system(mesh, pattern, f, atomics, sys_atomic); });
    d = std::max(field_diff(sys_atomic.values, sys_ser.values),
                 field_diff(sys_atomic.rhs, sys_ser.rhs));
    row("assemble (atomic merge)", t_ser, t_atomic, d);

    const std::size_t n = sys_par.rhs.size();
    std::vector<double> x(n), y_par(n), y_ser(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.01 * (double)i);
    const int mv_reps = 50;
    const double mv_ser = time_best_ms(reps, [&] {
        for (int r = 0; r < mv_reps; ++r) sys_par.matvec_serial(x.data(), y_ser.data());
    });
    const double mv_par = time_best_ms(reps, [&] {
        for (int r = 0; r < mv_reps; ++r) sys_par.matvec(x.data(), y_par.data(), true);
    });
    row("matvec x50", mv_ser, mv_par, field_diff(y_par, y_ser));

    const double e_ser = time_best_ms(reps, [&] { (void)discrete_energy(mesh, f, ser); });
    const double e_par = time_best_ms(reps, [&] { (void)discrete_energy(mesh, f, par); });
    row("energy", e_ser, e_par,
        std::fabs(discrete_energy(mesh, f, par) - discrete_energy(mesh, f, ser)));

    std::vector<double> g_ser, g_par;
    const double g_ts = time_best_ms(reps, [&] { g_ser = first_variation_serial(mesh, f, ser); });
    const double g_tp = time_best_ms(reps, [&] { g_par = first_variation(mesh, f, par); });
    row("gradient", g_ts, g_tp, field_diff(g_par, g_ser));

    std::vector<double> big(1 << 22);
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = std::cos(0.001 * (double)i);
    const double r_ser =
        time_best_ms(reps, [&] { (void)serial_dot(big.data(), big.data(), big.size()); });
    const double r_par =
        time_best_ms(reps, [&] { (void)det_dot(big.data(), big.data(), big.size(), true); });
    row("chunked dot (4M)", r_ser, r_par,
        std::fabs(det_dot(big.data(), big.data(), big.size(), true) -
                  serial_dot(big.data(), big.data(), big.size())));
    return 0;
}
