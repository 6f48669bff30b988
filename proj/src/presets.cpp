#include "geoflow/presets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "geoflow/core.hpp"
#include "geoflow/io.hpp"
#include "geoflow/targets.hpp"

namespace geoflow {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kMonitorHeader = {"t", "max_distance", "energy",
                                                 "max_velocity", "cg_iters"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void ensure_dir(const std::string& d) { fs::create_directories(d); }

void add(RunReport& r, const std::string& name, bool pass, const std::string& detail) {
    r.asserts.push_back({name, pass, detail});
}

std::vector<std::vector<double>> monitor_rows(const std::vector<MonitorRecord>& ms) {
    std::vector<std::vector<double>> rows;
    rows.reserve(ms.size());
    for (const auto& m : ms)
        rows.push_back({m.t, m.max_distance, m.energy, m.max_velocity, (double)m.cg_iters});
    return rows;
}

FlowConfig preset_flow_config(const PresetOptions& o) {
    FlowConfig cfg;
    cfg.tau = o.tau;
    cfg.stop_tol = o.stop_tol;
    cfg.cg_rel_tol = o.cg_rel_tol;
    cfg.jacobi = o.jacobi;
    cfg.quad_degree = o.quad_degree;
    cfg.parallel = o.parallel;
    cfg.deterministic = o.deterministic;
    return cfg;
}

double max_energy_increase(const std::vector<MonitorRecord>& ms) {
    double inc = -1e300;
    for (std::size_t i = 1; i < ms.size(); ++i)
        inc = std::max(inc, ms[i].energy - ms[i - 1].energy);
    return inc;
}

}  // namespace

SurfaceMesh sphere_mesh(int level) {
    SurfaceMesh mesh = octahedron();
    for (int l = 0; l < level; ++l) mesh = refine_global(mesh, true);
    return mesh;
}

std::function<void(const double*, double*)> experiment_deformation(double c2, double c0,
                                                                   bool corrected) {
    return [=](const double* x, double* y) {
        const double a = c2 * x[0] * x[0] + c0;
        y[0] = x[0];
        y[1] = a * x[1];
        y[2] = corrected ? a * x[2] : a * x[1];
    };
}

namespace {

// Shared driver for the sphere-flow experiments: builds the refined sphere,
// takes the identity interpolant (optionally composed with a pointwise map)
// as the initial datum, deforms the mesh afterwards, runs the flow and
// writes monitors plus snapshots.
ExperimentLevelResult run_sphere_flow(const PresetOptions& opts, int level,
                                      const std::function<void(const double*, double*)>* deformation,
                                      const std::function<void(const double*, double*)>* compose,
                                      const std::string& tag, double t_end = 0.0,
                                      double stop_tol_override = 0.0) {
    ensure_dir(opts.out_dir);
    const SurfaceMesh base = sphere_mesh(level);
    VertexField f0 = identity_field(base);
    if (compose) f0 = map_field(f0, *compose);
    const SurfaceMesh mesh = deformation ? deform(base, *deformation) : base;

    FlowConfig cfg = preset_flow_config(opts);
    cfg.t_end = t_end;
    if (stop_tol_override > 0.0) cfg.stop_tol = stop_tol_override;

    ExperimentLevelResult res;
    res.level = level;
    const MeshStats st = mesh_stats(mesh);
    res.h_max = st.h_max;
    res.n_vertices = st.n_vertices;

    long last_snapshot_step = -1;
    auto snapshot = [&](double t, const VertexField& f) {
        export_vtk(mesh, {{"f", &f}},
                   opts.out_dir + "/mesh_" + tag + "_t" + num(t) + ".vtk");
        ++res.snapshots_written;
    };
    StepObserver obs = [&](const MonitorRecord& rec, const VertexField& f) {
        const long step = (long)std::llround(rec.t / cfg.tau);
        const bool periodic =
            opts.snapshot_every > 0 && step > 0 && step % opts.snapshot_every == 0;
        if (rec.t == 0.0 || periodic) {
            snapshot(rec.t, f);
            last_snapshot_step = step;
        }
    };

    const FlowResult fr = run_flow(mesh, f0, cfg, nullptr, obs);
    if ((long)std::llround(fr.final_time / cfg.tau) != last_snapshot_step)
        snapshot(fr.final_time, fr.f);

    res.steps = fr.steps;
    res.final_time = fr.final_time;
    res.monitors = fr.monitors;
    res.initial_max_distance = fr.monitors.front().max_distance;
    res.final_energy = fr.monitors.back().energy;
    for (const auto& m : fr.monitors) {
        res.sup_max_distance = std::max(res.sup_max_distance, m.max_distance);
        if (res.decay_time < 0.0 && m.max_distance < 0.02) res.decay_time = m.t;
    }
    export_csv(kMonitorHeader, monitor_rows(fr.monitors),
               opts.out_dir + "/monitors_" + tag + ".csv");
    return res;
}

void append_flow_asserts(RunReport& rep, const ExperimentLevelResult& r,
                         const std::string& tag) {
    add(rep, tag + " reached stopping rule", r.steps > 0,
        "steps=" + std::to_string(r.steps) + " final_t=" + num(r.final_time));
    const double inc = max_energy_increase(r.monitors);
    add(rep, tag + " energy non-increasing (slack 1e-10)", inc <= 1e-10,
        "max step increase=" + num(inc));
}

}  // namespace

ExperimentResult run_experiment1(const PresetOptions& opts, const std::vector<int>& levels) {
    ExperimentResult out;
    out.report.tag = "exp1";
    const auto map = experiment_deformation(0.6, 0.4, opts.corrected_deformation);
    std::vector<std::vector<double>> summary;
    for (int level : levels) {
        const std::string tag = "exp1_l" + std::to_string(level);
        ExperimentLevelResult r = run_sphere_flow(opts, level, &map, nullptr, tag);
        append_flow_asserts(out.report, r, tag);
        summary.push_back({(double)level, r.h_max, (double)r.n_vertices, (double)r.steps,
                           r.final_time, r.initial_max_distance, r.sup_max_distance,
                           r.final_energy});
        out.levels.push_back(std::move(r));
    }
    for (const auto& r : out.levels) {
        if (r.level == 4)
            add(out.report, "exp1_l4 sup max_distance <= 0.02 (figure-derived bound)",
                r.sup_max_distance <= 0.02, "sup=" + num(r.sup_max_distance));
        if (r.level == 5)
            add(out.report, "exp1_l5 final time within 50% of 1.9 (figure-derived bound)",
                r.final_time >= 0.95 && r.final_time <= 2.85,
                "final_t=" + num(r.final_time));
    }
    for (std::size_t i = 1; i < out.levels.size(); ++i)
        add(out.report,
            "exp1 sup max_distance decreases from level " +
                std::to_string(out.levels[i - 1].level) + " to " +
                std::to_string(out.levels[i].level),
            out.levels[i].sup_max_distance < out.levels[i - 1].sup_max_distance,
            num(out.levels[i - 1].sup_max_distance) + " -> " +
                num(out.levels[i].sup_max_distance));
    export_csv({"level", "h_max", "n_vertices", "steps", "final_time",
                "initial_max_distance", "sup_max_distance", "final_energy"},
               summary, opts.out_dir + "/summary_exp1.csv");
    write_report(out.report, opts.out_dir + "/report_exp1.txt");
    return out;
}

ExperimentResult run_experiment2(const PresetOptions& opts, int level) {
    ExperimentResult out;
    out.report.tag = "exp2";
    const auto map = experiment_deformation(0.6, 0.4, opts.corrected_deformation);
    const std::function<void(const double*, double*)> compose = [](const double* y, double* z) {
        const double beta = 0.5 + y[0] * y[0] * y[2] * y[2];
        for (int c = 0; c < 3; ++c) z[c] = beta * y[c];
    };
    const std::string tag = "exp2_l" + std::to_string(level);
    ExperimentLevelResult r = run_sphere_flow(opts, level, &map, &compose, tag);
    append_flow_asserts(out.report, r, tag);
    add(out.report, "exp2 initial max_distance equals 0.5",
        std::fabs(r.initial_max_distance - 0.5) <= 1e-15,
        "value=" + format_double(r.initial_max_distance));
    add(out.report, "exp2 max_distance < 0.02 by t <= 2.8 (figure-derived bound)",
        r.decay_time >= 0.0 && r.decay_time <= 2.8, "decay_t=" + num(r.decay_time));
    double worst = -1e300;
    for (std::size_t i = 11; i < r.monitors.size(); ++i)
        worst = std::max(worst, r.monitors[i].max_distance - r.monitors[i - 1].max_distance);
    add(out.report, "exp2 max_distance monotone after 10 steps (slack 1e-6)",
        worst <= 1e-6, "max increase=" + num(worst));
    export_csv({"level", "h_max", "n_vertices", "steps", "final_time",
                "initial_max_distance", "sup_max_distance", "decay_time", "final_energy"},
               {{(double)level, r.h_max, (double)r.n_vertices, (double)r.steps,
                 r.final_time, r.initial_max_distance, r.sup_max_distance, r.decay_time,
                 r.final_energy}},
               opts.out_dir + "/summary_exp2.csv");
    out.levels.push_back(std::move(r));
    write_report(out.report, opts.out_dir + "/report_exp2.txt");
    return out;
}

ExperimentResult run_experiment3(const PresetOptions& opts, int level) {
    ExperimentResult out;
    out.report.tag = "exp3";
    const auto map = experiment_deformation(0.75, 0.25, opts.corrected_deformation);
    const std::string tag = "exp3_l" + std::to_string(level);
    ExperimentLevelResult r = run_sphere_flow(opts, level, &map, nullptr, tag);
    append_flow_asserts(out.report, r, tag);
    if (level == 5)
        add(out.report, "exp3_l5 sup max_distance <= 0.05 (figure-derived bound)",
            r.sup_max_distance <= 0.05, "sup=" + num(r.sup_max_distance));
    if (opts.snapshot_every == 0)
        add(out.report, "exp3 writes exactly two snapshots", r.snapshots_written == 2,
            "count=" + std::to_string(r.snapshots_written));
    export_csv({"level", "h_max", "n_vertices", "steps", "final_time",
                "initial_max_distance", "sup_max_distance", "final_energy"},
               {{(double)level, r.h_max, (double)r.n_vertices, (double)r.steps,
                 r.final_time, r.initial_max_distance, r.sup_max_distance, r.final_energy}},
               opts.out_dir + "/summary_exp3.csv");
    out.levels.push_back(std::move(r));
    write_report(out.report, opts.out_dir + "/report_exp3.txt");
    return out;
}

ConvergeResult run_converge_circle(const PresetOptions& opts, const std::vector<int>& levels) {
    ensure_dir(opts.out_dir);
    ConvergeResult out;
    out.report.tag = "circle";
    const FlowConfig base_cfg = preset_flow_config(opts);
    std::vector<std::vector<double>> summary;
    for (int k : levels) {
        const int nverts = 8 << k;
        const SurfaceMesh mesh = polygonal_circle(nverts);
        const VertexField f0 = identity_field(mesh);
        const StationaryResult st = solve_stationary(mesh, f0, base_cfg);
        ConvergeLevelResult lv;
        lv.k = k;
        lv.h = mesh_stats(mesh).h_max;
        lv.residual = st.residual_max;
        lv.residual_bound = st.residual_bound;
        lv.error = h1_error(mesh, st.flow.f,
                            [](const double* x, double* y) {
                                const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
                                y[0] = x[0] / r;
                                y[1] = x[1] / r;
                            },
                            base_cfg.assembly());
        if (!out.levels.empty()) {
            const auto& prev = out.levels.back();
            lv.eoc = std::log(prev.error / lv.error) / std::log(prev.h / lv.h);
        }
        export_csv(kMonitorHeader, monitor_rows(st.flow.monitors),
                   opts.out_dir + "/monitors_circle_k" + std::to_string(k) + ".csv");
        summary.push_back({(double)k, (double)nverts, lv.h, lv.error, lv.eoc, lv.residual,
                           lv.residual_bound});
        out.levels.push_back(lv);
    }
    for (std::size_t i = 1; i < out.levels.size(); ++i) {
        add(out.report,
            "circle error decreases k=" + std::to_string(out.levels[i - 1].k) + " -> " +
                std::to_string(out.levels[i].k),
            out.levels[i].error < out.levels[i - 1].error,
            num(out.levels[i - 1].error) + " -> " + num(out.levels[i].error));
        add(out.report, "circle EOC >= 0.9 at k=" + std::to_string(out.levels[i].k),
            out.levels[i].eoc >= 0.9, "eoc=" + num(out.levels[i].eoc));
    }
    export_csv({"k", "n_vertices", "h", "h1_error", "eoc", "residual", "residual_bound"},
               summary, opts.out_dir + "/summary_circle.csv");
    write_report(out.report, opts.out_dir + "/report_circle.txt");
    return out;
}

ScalingResult run_scaling_test(const PresetOptions& opts, const std::vector<double>& r0s,
                               int level, double t_end) {
    ensure_dir(opts.out_dir);
    ScalingResult out;
    out.report.tag = "scaling";
    const SurfaceMesh mesh = sphere_mesh(level);
    std::vector<std::vector<double>> summary;
    for (double r0 : r0s) {
        VertexField f0 = identity_field(mesh);
        for (double& v : f0.values) v *= r0;
        FlowConfig cfg = preset_flow_config(opts);
        cfg.t_end = t_end;
        cfg.stop_tol = 1e-9;  // must not fire before t_end
        const std::vector<double> ref =
            scaling_ode_reference(r0, t_end, cfg.tau, mesh.ambient() - 1);
        std::vector<std::vector<double>> trace;
        double maxdev = 0.0;
        StepObserver obs = [&](const MonitorRecord& rec, const VertexField& f) {
            double mean = 0.0;
            for (int v = 0; v < f.n_vertices(); ++v) mean += norm(f.at(v), f.n_components);
            mean /= f.n_vertices();
            const std::size_t idx = (std::size_t)std::llround(rec.t / cfg.tau);
            const double r_ref = idx < ref.size() ? ref[idx] : ref.back();
            const double dev = std::fabs(mean - r_ref);
            maxdev = std::max(maxdev, dev);
            trace.push_back({rec.t, mean, r_ref, dev});
        };
        const std::string tag = "scaling_r" + num(r0);
        const FlowResult fr = run_flow(mesh, f0, cfg, nullptr, obs);
        export_csv(kMonitorHeader, monitor_rows(fr.monitors),
                   opts.out_dir + "/monitors_" + tag + ".csv");
        export_csv({"t", "mean_norm", "r_reference", "abs_deviation"}, trace,
                   opts.out_dir + "/trace_" + tag + ".csv");
        add(out.report, tag + " mean norm within 0.02 of scaling ODE", maxdev <= 0.02,
            "max deviation=" + num(maxdev) + " final_t=" + num(fr.final_time));
        summary.push_back({r0, maxdev});
        out.cases.push_back({r0, maxdev});
    }
    export_csv({"r0", "max_abs_deviation"}, summary, opts.out_dir + "/summary_scaling.csv");
    write_report(out.report, opts.out_dir + "/report_scaling.txt");
    return out;
}

// --- check batteries --------------------------------------------------------

namespace {

struct Sampler {
    std::mt19937_64 rng;
    explicit Sampler(unsigned long long seed) : rng(seed) {}
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
    double sym() { return std::uniform_real_distribution<double>(-1.0, 1.0)(rng); }
    void direction(double* u, int m) {
        std::normal_distribution<double> g(0.0, 1.0);
        double n = 0.0;
        do {
            for (int c = 0; c < m; ++c) u[c] = g(rng);
            n = norm(u, m);
        } while (n < 1e-8);
        for (int c = 0; c < m; ++c) u[c] /= n;
    }
};

double max_abs_diff(const double* a, const double* b, int n) {
    double e = 0.0;
    for (int i = 0; i < n; ++i) e = std::max(e, std::fabs(a[i] - b[i]));
    return e;
}

double max_abs(const double* a, int n) {
    double e = 0.0;
    for (int i = 0; i < n; ++i) e = std::max(e, std::fabs(a[i]));
    return e;
}

bool spd_minors(const double* G, int m) {
    if (!(G[0] > 0)) return false;
    if (m >= 2 && !(G[0] * G[m + 1] - G[1] * G[m] > 0)) return false;
    if (m == 3) {
        const double det = G[0] * (G[4] * G[8] - G[5] * G[7]) -
                           G[1] * (G[3] * G[8] - G[5] * G[6]) +
                           G[2] * (G[3] * G[7] - G[4] * G[6]);
        if (!(det > 0)) return false;
    }
    return true;
}

// covariant Hessian of the signed distance for an arbitrary metric bundle
// (used for the corrupted-metric probe): D2d - Gamma . Dd
void hessian_via_metric(const HypersurfaceTarget& t, const MetricEval& ev, const double* x,
                        double* H) {
    const int m = t.dim();
    double G[9], dG[27], Gam[27], Dd[3], D2d[9];
    ev.metric(x, G);
    ev.metric_deriv(x, dG);
    christoffel_from_metric(m, G, dG, Gam);
    t.grad_distance(x, Dd);
    t.hess_distance(x, D2d);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            double s = D2d[a * m + b];
            for (int c = 0; c < m; ++c) s -= Gam[(c * m + a) * m + b] * Dd[c];
            H[a * m + b] = s;
        }
}

void hessian_identity_rhs(const HypersurfaceTarget& t, const double* x, double* R) {
    const int m = t.dim();
    double D2d[9];
    t.hess_distance(x, D2d);
    mat_mul(D2d, D2d, R, m);
    const double d = t.distance(x);
    for (int i = 0; i < m * m; ++i) R[i] *= d;
}

MetricEval corrupted_metric(const HypersurfaceTarget& t) {
    MetricEval ev;
    const int m = t.dim();
    ev.dim = m;
    ev.metric = [t, m](const double* x, double* G) {
        // deliberately missing the + 2 d^2 D2d D2d term
        double H[9];
        t.hess_distance(x, H);
        const double d = t.distance(x);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                G[a * m + b] = (a == b ? 1.0 : 0.0) - 2.0 * d * H[a * m + b];
    };
    const auto bad_metric = ev.metric;
    ev.metric_deriv = [bad_metric, m](const double* x, double* dG) {
        const double h = 1e-6;
        double xp[3], Gp[9], Gm[9];
        for (int b = 0; b < m; ++b) {
            copy(x, xp, m);
            xp[b] = x[b] + h;
            bad_metric(xp, Gp);
            xp[b] = x[b] - h;
            bad_metric(xp, Gm);
            for (int k = 0; k < m * m; ++k) dG[b * m * m + k] = (Gp[k] - Gm[k]) / (2.0 * h);
        }
    };
    ev.distance = [t](const double* x) { return t.distance(x); };
    return ev;
}

void sample_in_tube_sphere(Sampler& smp, double range, double* x) {
    double u[3];
    smp.direction(u, 3);
    const double r = 1.0 + range * smp.sym();
    for (int c = 0; c < 3; ++c) x[c] = r * u[c];
}

void sample_in_tube_ellipsoid(Sampler& smp, double range, double* x, double axes_a,
                              double axes_b, double axes_c) {
    double u[3];
    smp.direction(u, 3);
    const double s = std::sqrt(u[0] * u[0] / (axes_a * axes_a) +
                               u[1] * u[1] / (axes_b * axes_b) +
                               u[2] * u[2] / (axes_c * axes_c));
    double p[3];
    for (int c = 0; c < 3; ++c) p[c] = u[c] / s;  // on the ellipsoid
    double nu[3] = {2 * p[0] / (axes_a * axes_a), 2 * p[1] / (axes_b * axes_b),
                    2 * p[2] / (axes_c * axes_c)};
    const double len = norm(nu, 3);
    const double off = range * smp.sym();
    for (int c = 0; c < 3; ++c) x[c] = p[c] + off * nu[c] / len;
}

}  // namespace

RunReport run_check_geometry(const PresetOptions& opts, const CheckHooks& hooks) {
    ensure_dir(opts.out_dir);
    RunReport rep;
    rep.tag = "checkgeom";
    Sampler smp(opts.seed);

    const SphereTarget sph(3);
    const HypersurfaceTarget hs = HypersurfaceTarget::unit_sphere(3);
    const double ea = 1.5, eb = 1.0, ec = 0.75;
    const HypersurfaceTarget ell = HypersurfaceTarget::ellipsoid(ea, eb, ec);
    const double fd = 1e-6;

    {  // sphere inversion is an involution
        double err = 0.0;
        for (int i = 0; i < 1000; ++i) {
            double u[3], x[3], y[3], z[3];
            smp.direction(u, 3);
            const double r = 0.5 + 1.5 * smp.unit();
            for (int c = 0; c < 3; ++c) x[c] = r * u[c];
            sph.involution(x, y);
            sph.involution(y, z);
            err = std::max(err, max_abs_diff(z, x, 3));
        }
        add(rep, "sphere involution i(i(x)) = x (tol 1e-12)", err <= 1e-12, "max err=" + num(err));
    }
    {  // metric = averaged pullback of the inversion (FD jacobian)
        double err = 0.0;
        for (int i = 0; i < 200; ++i) {
            double u[3], x[3];
            smp.direction(u, 3);
            const double r = 0.5 + 1.5 * smp.unit();
            for (int c = 0; c < 3; ++c) x[c] = r * u[c];
            double Di[9];
            for (int k = 0; k < 3; ++k) {
                double xp[3], yp[3], ym[3];
                copy(x, xp, 3);
                xp[k] = x[k] + fd;
                sph.involution(xp, yp);
                xp[k] = x[k] - fd;
                sph.involution(xp, ym);
                for (int j = 0; j < 3; ++j) Di[j * 3 + k] = (yp[j] - ym[j]) / (2 * fd);
            }
            double DtD[9], G[9];
            double Dt[9];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) Dt[a * 3 + b] = Di[b * 3 + a];
            mat_mul(Dt, Di, DtD, 3);
            sph.metric(x, G);
            double scale = max_abs(G, 9);
            for (int j = 0; j < 9; ++j) {
                const double avg = 0.5 * ((j % 4 == 0 ? 1.0 : 0.0) + DtD[j]);
                err = std::max(err, std::fabs(avg - G[j]) / scale);
            }
        }
        add(rep, "sphere metric equals averaged inversion pullback (rel 1e-6)", err <= 1e-6,
            "max rel err=" + num(err));
    }
    {  // analytic dG against finite differences of G
        double err = 0.0;
        for (int i = 0; i < 200; ++i) {
            double u[3], x[3];
            smp.direction(u, 3);
            const double r = 0.5 + 1.5 * smp.unit();
            for (int c = 0; c < 3; ++c) x[c] = r * u[c];
            double dG[27], fdv[27], Gp[9], Gm[9], xp[3];
            sph.metric_deriv(x, dG);
            for (int b = 0; b < 3; ++b) {
                copy(x, xp, 3);
                xp[b] = x[b] + fd;
                sph.metric(xp, Gp);
                xp[b] = x[b] - fd;
                sph.metric(xp, Gm);
                for (int k = 0; k < 9; ++k) fdv[b * 9 + k] = (Gp[k] - Gm[k]) / (2 * fd);
            }
            const double scale = std::max(max_abs(dG, 27), 1e-300);
            err = std::max(err, max_abs_diff(dG, fdv, 27) / scale);
        }
        add(rep, "sphere dG matches FD of G (rel 1e-5)", err <= 1e-5, "max rel err=" + num(err));
    }
    {  // G = Id on the sphere
        double err = 0.0;
        for (int i = 0; i < 1000; ++i) {
            double x[3], G[9];
            smp.direction(x, 3);
            sph.metric(x, G);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    err = std::max(err, std::fabs(G[a * 3 + b] - (a == b ? 1.0 : 0.0)));
        }
        add(rep, "sphere G = Id on the target manifold (tol 1e-12)", err <= 1e-12,
            "max err=" + num(err));
    }
    {  // closed-form covariant Hessian vs the Christoffel route
        double err = 0.0;
        for (int i = 0; i < 200; ++i) {
            double u[3], x[3];
            smp.direction(u, 3);
            const double r = 0.5 + 1.5 * smp.unit();
            for (int c = 0; c < 3; ++c) x[c] = r * u[c];
            double H[9], Gam[27], H2[9];
            sph.covariant_hessian_distance(x, H);
            sph.christoffel(x, Gam);
            const double rr = norm(x, 3);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    double s = ((a == b ? 1.0 : 0.0) - x[a] * x[b] / (rr * rr)) / rr;
                    for (int c = 0; c < 3; ++c)
                        s -= Gam[(c * 3 + a) * 3 + b] * (x[c] / rr);
                    H2[a * 3 + b] = s;
                }
            err = std::max(err, max_abs_diff(H, H2, 9));
        }
        add(rep, "sphere covariant Hessian closed form = Christoffel route (tol 1e-12)",
            err <= 1e-12, "max err=" + num(err));
    }

    auto hypersurface_checks = [&](const HypersurfaceTarget& t, const std::string& label,
                                   auto sample_point, double hess_tol) {
        double inv_err = 0.0, dflip_err = 0.0, gid_err = 0.0, gdd_err = 0.0,
               proj_err = 0.0, pull_err = 0.0;
        bool spd_ok = true;
        for (int i = 0; i < 1000; ++i) {
            double x[3];
            sample_point(x);
            double y[3], z[3];
            t.involution(x, y);
            t.involution(y, z);
            inv_err = std::max(inv_err, max_abs_diff(z, x, 3));
            dflip_err = std::max(dflip_err, std::fabs(t.distance(y) + t.distance(x)));
            double a[3];
            t.project(x, a);
            proj_err = std::max(proj_err, std::fabs(t.distance(a)));
            double G[9], Dd[3], GDd[3];
            t.metric(x, G);
            spd_ok = spd_ok && spd_minors(G, 3);
            t.grad_distance(x, Dd);
            mat_vec(G, Dd, GDd, 3);
            gdd_err = std::max(gdd_err, max_abs_diff(GDd, Dd, 3));
        }
        for (int i = 0; i < 500; ++i) {  // G = Id on M via projected samples
            double x[3], a[3], G[9];
            sample_point(x);
            t.project(x, a);
            t.metric(a, G);
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    gid_err = std::max(gid_err,
                                       std::fabs(G[p * 3 + q] - (p == q ? 1.0 : 0.0)));
        }
        for (int i = 0; i < 100; ++i) {  // metric equals averaged reflection pullback
            double x[3];
            sample_point(x);
            double Di[9];
            for (int k = 0; k < 3; ++k) {
                double xp[3], yp[3], ym[3];
                copy(x, xp, 3);
                xp[k] = x[k] + fd;
                t.involution(xp, yp);
                xp[k] = x[k] - fd;
                t.involution(xp, ym);
                for (int j = 0; j < 3; ++j) Di[j * 3 + k] = (yp[j] - ym[j]) / (2 * fd);
            }
            double Dt[9], DtD[9], G[9];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) Dt[a * 3 + b] = Di[b * 3 + a];
            mat_mul(Dt, Di, DtD, 3);
            t.metric(x, G);
            const double scale = max_abs(G, 9);
            for (int j = 0; j < 9; ++j) {
                const double avg = 0.5 * ((j % 4 == 0 ? 1.0 : 0.0) + DtD[j]);
                pull_err = std::max(pull_err, std::fabs(avg - G[j]) / scale);
            }
        }
        add(rep, label + " involution i(i(x)) = x (tol 1e-12)", inv_err <= 1e-12,
            "max err=" + num(inv_err));
        add(rep, label + " d(i(x)) = -d(x) (tol 1e-12)", dflip_err <= 1e-12,
            "max err=" + num(dflip_err));
        add(rep, label + " projection lands on M (tol 1e-12)", proj_err <= 1e-12,
            "max err=" + num(proj_err));
        add(rep, label + " G = Id on M (tol 1e-12)", gid_err <= 1e-12, "max err=" + num(gid_err));
        add(rep, label + " G Dd = Dd in the tube (tol 1e-10)", gdd_err <= 1e-10,
            "max err=" + num(gdd_err));
        add(rep, label + " G positive definite over sampled tube", spd_ok,
            spd_ok ? "all minors positive" : "nonpositive minor found");
        add(rep, label + " metric equals averaged reflection pullback (rel 1e-6)",
            pull_err <= 1e-6, "max rel err=" + num(pull_err));

        // covariant Hessian identity (optionally corrupted through the hook)
        double hess_err = 0.0;
        const MetricEval ev = hooks.corrupt_metric ? corrupted_metric(t) : t.metric_eval();
        for (int i = 0; i < 1000; ++i) {
            double x[3], H[9], R[9];
            sample_point(x);
            if (hooks.corrupt_metric)
                hessian_via_metric(t, ev, x, H);
            else
                t.covariant_hessian_distance(x, H);
            hessian_identity_rhs(t, x, R);
            hess_err = std::max(hess_err, max_abs_diff(H, R, 9));
        }
        add(rep, label + " covariant Hessian of d equals d (D2d)^2 (tol " + num(hess_tol) + ")",
            hess_err <= hess_tol, "max err=" + num(hess_err));

        // the corrupted metric must be caught by the same identity
        double bad_err = 0.0;
        const MetricEval bad = corrupted_metric(t);
        for (int i = 0; i < 50; ++i) {
            double x[3], H[9], R[9];
            sample_point(x);
            hessian_via_metric(t, bad, x, H);
            hessian_identity_rhs(t, x, R);
            bad_err = std::max(bad_err, max_abs_diff(H, R, 9));
        }
        add(rep, label + " corrupted metric (d^2 term dropped) is caught",
            bad_err > 100.0 * hess_tol, "corrupted err=" + num(bad_err));
    };

    hypersurface_checks(hs, "unit-sphere hypersurface",
                        [&](double* x) { sample_in_tube_sphere(smp, 0.3, x); }, 1e-8);
    hypersurface_checks(ell, "ellipsoid(1.5,1,0.75)",
                        [&](double* x) {
                            sample_in_tube_ellipsoid(smp, 0.75 * ell.tube_halfwidth(), x, ea,
                                                     eb, ec);
                        },
                        1e-6);

    write_report(rep, opts.out_dir + "/report_checkgeom.txt");
    return rep;
}

RunReport run_check_variations(const PresetOptions& opts, const CheckHooks& hooks) {
    ensure_dir(opts.out_dir);
    RunReport rep;
    rep.tag = "checkvar";
    Sampler smp(opts.seed);
    const SurfaceMesh mesh = sphere_mesh(2);
    AssemblyOptions ao;
    ao.quad_degree = opts.quad_degree;
    ao.parallel = opts.parallel;
    ao.deterministic = opts.deterministic;
    const int nv = mesh.n_vertices();

    auto random_field = [&]() {
        VertexField f = identity_field(mesh);
        for (int v = 0; v < nv; ++v) {
            const double s = 1.0 + 0.25 * smp.sym();
            for (int c = 0; c < 3; ++c) f.at(v)[c] = s * f.at(v)[c] + 0.25 * smp.sym();
        }
        return f;
    };
    auto random_direction_field = [&]() {
        VertexField p;
        p.n_components = 3;
        p.values.resize((std::size_t)nv * 3);
        for (double& v : p.values) v = smp.sym();
        return p;
    };
    // reaction-flipped gradient: 2 * (weighted-stiffness action) - gradient;
    // the stiffness action is extracted with a huge tau so that (1/tau) M
    // vanishes below the FD tolerance
    auto flipped_gradient = [&](const VertexField& f) {
        std::vector<double> g = first_variation(mesh, f, ao);
        const FemPattern pattern = FemPattern::build(mesh);
        AssemblyOptions big = ao;
        big.tau = 1e30;
        SparseSystem sys;
        assemble_step_system(mesh, pattern, f, big, sys);
        std::vector<double> sf((std::size_t)nv * 3);
        sys.matvec(f.values.data(), sf.data(), ao.parallel);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * sf[i] - g[i];
        return g;
    };

    const double h1 = 1e-6;
    double grad_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const VertexField f = random_field();
        const std::vector<double> g =
            hooks.flip_reaction ? flipped_gradient(f) : first_variation(mesh, f, ao);
        VertexField fp = f;
        double scale = 0.0, err = 0.0;
        std::vector<double> fdg(g.size());
        for (int v = 0; v < nv; ++v)
            for (int c = 0; c < 3; ++c) {
                const double orig = fp.at(v)[c];
                fp.at(v)[c] = orig + h1;
                const double ep = discrete_energy(mesh, fp, ao);
                fp.at(v)[c] = orig - h1;
                const double em = discrete_energy(mesh, fp, ao);
                fp.at(v)[c] = orig;
                fdg[(std::size_t)v * 3 + c] = (ep - em) / (2.0 * h1);
            }
        for (double v : fdg) scale = std::max(scale, std::fabs(v));
        for (std::size_t i = 0; i < g.size(); ++i)
            err = std::max(err, std::fabs(g[i] - fdg[i]) / scale);
        grad_err = std::max(grad_err, err);
    }
    add(rep, "first variation matches FD gradient, step 1e-6 (rel 1e-5)", grad_err <= 1e-5,
        "max rel err=" + num(grad_err));

    const double h2 = 1e-4;
    double hess_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const VertexField f = random_field();
        const VertexField psi = random_direction_field();
        const double a = second_variation_apply(mesh, f, psi, ao);
        VertexField fp = f;
        for (std::size_t i = 0; i < fp.values.size(); ++i)
            fp.values[i] = f.values[i] + h2 * psi.values[i];
        const double ep = discrete_energy(mesh, fp, ao);
        for (std::size_t i = 0; i < fp.values.size(); ++i)
            fp.values[i] = f.values[i] - h2 * psi.values[i];
        const double em = discrete_energy(mesh, fp, ao);
        const double e0 = discrete_energy(mesh, f, ao);
        const double fd2 = (ep - 2.0 * e0 + em) / (h2 * h2);
        hess_err = std::max(hess_err, std::fabs(a - fd2) / std::max(std::fabs(fd2), 1e-14));
    }
    add(rep, "second variation matches FD second difference, step 1e-4 (rel 1e-4)",
        hess_err <= 1e-4, "max rel err=" + num(hess_err));

    {  // constant maps are critical points of the Dirichlet part
        VertexField f;
        f.n_components = 3;
        f.values.assign((std::size_t)nv * 3, 0.0);
        for (int v = 0; v < nv; ++v) f.at(v)[0] = 1.3;
        const std::vector<double> g = first_variation(mesh, f, ao);
        double err = 0.0;
        for (double v : g) err = std::max(err, std::fabs(v));
        add(rep, "constant map first variation vanishes to roundoff", err <= 1e-14,
            "max |g|=" + num(err));
    }
    {  // a sign-flipped reaction must be caught by the FD harness
        const VertexField f = random_field();
        const std::vector<double> g = flipped_gradient(f);
        VertexField fp = f;
        double scale = 0.0, err = 0.0;
        for (int v = 0; v < nv; ++v)
            for (int c = 0; c < 3; ++c) {
                const double orig = fp.at(v)[c];
                fp.at(v)[c] = orig + h1;
                const double ep = discrete_energy(mesh, fp, ao);
                fp.at(v)[c] = orig - h1;
                const double em = discrete_energy(mesh, fp, ao);
                fp.at(v)[c] = orig;
                const double fdv = (ep - em) / (2.0 * h1);
                scale = std::max(scale, std::fabs(fdv));
                err = std::max(err, std::fabs(g[(std::size_t)v * 3 + c] - fdv));
            }
        add(rep, "sign-flipped reaction is caught by the FD harness", err / scale > 1e-5,
            "flipped rel err=" + num(err / scale));
    }

    write_report(rep, opts.out_dir + "/report_checkvar.txt");
    return rep;
}

void write_report(const RunReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw NumericalError("write_report: cannot open " + path);
    out << "report: " << report.tag << "\n";
    for (const auto& a : report.asserts)
        out << (a.pass ? "PASS " : "FAIL ") << a.name << " (" << a.detail << ")\n";
    out << "result: " << (report.all_pass() ? "PASS" : "FAIL") << "\n";
}

void write_failed_marker(const std::string& out_dir, const std::string& message) {
    ensure_dir(out_dir);
    std::ofstream out(out_dir + "/FAILED");
    out << message << "\n";
}

}  // namespace geoflow
