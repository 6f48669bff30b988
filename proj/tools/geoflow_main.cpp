// geoflow: harmonic map heat flow on triangulated closed hypersurfaces.
//
// Exit codes: 0 success, 1 named assertion failed (FAILED marker written),
// 2 usage error, 3 numerical failure (guard/tube violation, CG breakdown,
// Newton divergence, ...).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "geoflow/core.hpp"
#include "geoflow/flow.hpp"
#include "geoflow/io.hpp"
#include "geoflow/mesh.hpp"
#include "geoflow/presets.hpp"
#include "geoflow/targets.hpp"

using nlohmann::json;
using namespace geoflow;

namespace {

void print_report(const RunReport& rep) {
    for (const auto& a : rep.asserts)
        std::printf("[%s] %s (%s)\n", a.pass ? "PASS" : "FAIL", a.name.c_str(),
                    a.detail.c_str());
}

int finish(const RunReport& rep, const PresetOptions& opts) {
    print_report(rep);
    std::printf("artifacts: %s\n", opts.out_dir.c_str());
    if (!rep.all_pass()) {
        std::string first;
        for (const auto& a : rep.asserts)
            if (!a.pass) {
                first = a.name;
                break;
            }
        write_failed_marker(opts.out_dir, "assertion failed: " + first);
        std::printf("RESULT: FAIL\n");
        return 1;
    }
    std::printf("RESULT: PASS\n");
    return 0;
}

const std::vector<std::string> kMonitorHeader = {"t", "max_distance", "energy",
                                                 "max_velocity", "cg_iters"};

int run_custom(const json& j, const PresetOptions& opts) {
    if (!j.contains("mesh")) throw NumericalError("custom run: config needs a \"mesh\" entry");
    const json& jm = j.at("mesh");
    const std::string kind = jm.value("kind", "sphere");
    SurfaceMesh mesh;
    if (kind == "sphere")
        mesh = sphere_mesh(jm.value("level", 4));
    else if (kind == "octahedron")
        mesh = octahedron();
    else if (kind == "circle")
        mesh = polygonal_circle(jm.value("vertices", 16));
    else if (kind == "off")
        mesh = load_off(jm.at("path").get<std::string>());
    else
        throw NumericalError("custom run: unknown mesh kind " + kind);

    VertexField f0 = identity_field(mesh);
    if (j.value("compose_beta", false)) {
        // the experiment-2 composition y -> (0.5 + y1^2 y3^2) y
        f0 = map_field(f0, [](const double* y, double* z) {
            const double beta = 0.5 + y[0] * y[0] * y[2] * y[2];
            for (int c = 0; c < 3; ++c) z[c] = beta * y[c];
        });
    }
    const double scale = j.value("initial_scale", 1.0);
    if (scale != 1.0)
        for (double& v : f0.values) v *= scale;
    if (j.contains("deformation")) {
        const double c2 = j["deformation"].value("c2", 0.6);
        const double c0 = j["deformation"].value("c0", 0.4);
        mesh = deform(mesh, experiment_deformation(c2, c0, opts.corrected_deformation));
    }

    FlowConfig cfg;
    cfg.tau = opts.tau;
    cfg.stop_tol = opts.stop_tol;
    cfg.cg_rel_tol = opts.cg_rel_tol;
    cfg.jacobi = opts.jacobi;
    cfg.quad_degree = opts.quad_degree;
    cfg.parallel = opts.parallel;
    cfg.deterministic = opts.deterministic;
    cfg.t_end = j.value("t_end", 0.0);
    cfg.max_steps = j.value("max_steps", (long)1000000);

    MetricEval metric;
    const MetricEval* metric_ptr = nullptr;
    const std::string target = j.value("target", std::string("sphere"));
    const std::string scheme = j.value("scheme", std::string("sphere"));
    if (scheme == "general") {
        cfg.scheme = Scheme::GeneralMetric;
        if (target == "sphere")
            metric = SphereTarget(mesh.ambient()).metric_eval();
        else if (target == "unit-sphere-hypersurface")
            metric = HypersurfaceTarget::unit_sphere(mesh.ambient()).metric_eval();
        else if (target == "ellipsoid") {
            const json& ja = j.at("axes");
            metric = HypersurfaceTarget::ellipsoid(ja.at(0), ja.at(1), ja.at(2)).metric_eval();
        } else
            throw NumericalError("custom run: unknown target " + target);
        metric_ptr = &metric;
    } else if (scheme != "sphere")
        throw NumericalError("custom run: unknown scheme " + scheme);

    const std::string tag = j.value("tag", std::string("custom"));
    std::filesystem::create_directories(opts.out_dir);
    long last_snapshot_step = -1;
    int snapshots = 0;
    StepObserver obs = [&](const MonitorRecord& rec, const VertexField& f) {
        const long step = (long)std::llround(rec.t / cfg.tau);
        const bool periodic =
            opts.snapshot_every > 0 && step > 0 && step % opts.snapshot_every == 0;
        if (rec.t == 0.0 || periodic) {
            char tbuf[32];
            std::snprintf(tbuf, sizeof tbuf, "%.6g", rec.t);
            export_vtk(mesh, {{"f", &f}},
                       opts.out_dir + "/mesh_" + tag + "_t" + tbuf + ".vtk");
            last_snapshot_step = step;
            ++snapshots;
        }
    };
    const FlowResult fr = run_flow(mesh, f0, cfg, metric_ptr, obs);
    if ((long)std::llround(fr.final_time / cfg.tau) != last_snapshot_step) {
        char tbuf[32];
        std::snprintf(tbuf, sizeof tbuf, "%.6g", fr.final_time);
        export_vtk(mesh, {{"f", &fr.f}},
                   opts.out_dir + "/mesh_" + tag + "_t" + tbuf + ".vtk");
        ++snapshots;
    }
    std::vector<std::vector<double>> rows;
    for (const auto& m : fr.monitors)
        rows.push_back({m.t, m.max_distance, m.energy, m.max_velocity, (double)m.cg_iters});
    export_csv(kMonitorHeader, rows, opts.out_dir + "/monitors_" + tag + ".csv");

    const MonitorRecord& last = fr.monitors.back();
    std::printf("steps=%ld final_t=%.6g max_distance=%.6g energy=%.6g stopped_by_rule=%d "
                "snapshots=%d\n",
                fr.steps, fr.final_time, last.max_distance, last.energy,
                fr.stopped_by_tolerance ? 1 : 0, snapshots);
    std::printf("artifacts: %s\n", opts.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"harmonic map heat flow and stationary harmonic maps on "
                 "triangulated closed hypersurfaces"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    PresetOptions opts;
    CheckHooks hooks;
    std::string variant = "corrected";

    app.add_option("--config", config_path, "JSON config file; explicit flags win over it");
    auto* o_out = app.add_option("--out", opts.out_dir, "output directory (default: out)");
    auto* o_tau = app.add_option("--tau", opts.tau, "time step")->check(CLI::PositiveNumber);
    auto* o_tol =
        app.add_option("--tol", opts.stop_tol, "stopping tolerance on max velocity")
            ->check(CLI::PositiveNumber);
    auto* o_cg = app.add_option("--cg-tol", opts.cg_rel_tol, "CG relative residual")
                     ->check(CLI::PositiveNumber);
    auto* o_quad = app.add_option("--quad-degree", opts.quad_degree,
                                  "quadrature exactness degree (3, 5 or 7)")
                       ->check(CLI::IsMember({3, 5, 7}));
    auto* f_jacobi = app.add_flag("--jacobi,!--no-jacobi", opts.jacobi,
                                  "Jacobi-precondition the CG solve");
    auto* f_det = app.add_flag("--deterministic,!--no-deterministic", opts.deterministic,
                               "bitwise run-to-run reproducible reductions (default on)");
    auto* f_serial = app.add_flag("--serial", "disable OpenMP parallel kernels");
    auto* o_seed = app.add_option("--seed", opts.seed, "RNG seed for the check batteries");
    auto* o_snap = app.add_option("--snapshot-every", opts.snapshot_every,
                                  "write a VTK snapshot every k steps (0: start/end only)");
    auto* o_var = app.add_option("--deformation-variant", variant,
                                 "surface deformation: corrected (x1,a x2,a x3) or the "
                                 "literal printed (x1,a x2,a x2)")
                      ->check(CLI::IsMember({"corrected", "printed"}));
    app.add_flag("--hook-corrupt-metric", hooks.corrupt_metric)->group("");
    app.add_flag("--hook-flip-reaction", hooks.flip_reaction)->group("");

    std::vector<int> exp_levels = {4, 5, 6};
    int exp2_level = 5, exp3_level = 5;
    std::vector<int> circle_levels = {1, 2, 3, 4};
    std::vector<double> r0s = {0.9, 1.1};
    int scaling_level = 5;
    double scaling_t_end = 1.0;

    auto* exp1 = app.add_subcommand(
        "experiment1", "flow on the a = 0.6 x1^2 + 0.4 deformed sphere across levels");
    auto* o_levels1 =
        exp1->add_option("--levels", exp_levels, "refinement levels")->delimiter(',');
    auto* exp2 = app.add_subcommand(
        "experiment2", "same surface, initial map composed with y -> (0.5 + y1^2 y3^2) y");
    auto* o_level2 = exp2->add_option("--level", exp2_level, "refinement level");
    auto* exp3 = app.add_subcommand(
        "experiment3", "flow on the stronger a = 0.75 x1^2 + 0.25 deformation");
    auto* o_level3 = exp3->add_option("--level", exp3_level, "refinement level");
    auto* circle = app.add_subcommand(
        "converge-circle", "stationary maps of regular polygons into S^1, H1 error orders");
    auto* o_ks = circle->add_option("--levels", circle_levels,
                                    "k values; the polygon has 8*2^k vertices")
                     ->delimiter(',');
    auto* scaling = app.add_subcommand(
        "scaling-test", "radially scaled identity vs the scaling ODE reference");
    auto* o_r0 = scaling->add_option("--r0", r0s, "initial radii")->delimiter(',');
    auto* o_slevel = scaling->add_option("--level", scaling_level, "refinement level");
    auto* o_stend = scaling->add_option("--t-end", scaling_t_end, "comparison horizon");
    auto* checkgeom = app.add_subcommand(
        "check-geometry", "target-geometry property battery (involutions, metric identities)");
    auto* checkvar = app.add_subcommand(
        "check-variations", "finite-difference harness for the energy gradient and Hessian");
    auto* custom = app.add_subcommand(
        "custom", "run one flow described by the --config file (see README)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    json cfg_json = json::object();
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::fprintf(stderr, "cannot open config file %s\n", config_path.c_str());
                return 2;
            }
            in >> cfg_json;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config parse error: %s\n", e.what());
        return 2;
    }

    // config file fills whatever the command line left untouched
    try {
        if (!o_out->count()) opts.out_dir = cfg_json.value("out", opts.out_dir);
        if (!o_tau->count()) opts.tau = cfg_json.value("tau", opts.tau);
        if (!o_tol->count()) opts.stop_tol = cfg_json.value("tol", opts.stop_tol);
        if (!o_cg->count()) opts.cg_rel_tol = cfg_json.value("cg_tol", opts.cg_rel_tol);
        if (!o_quad->count()) opts.quad_degree = cfg_json.value("quad_degree", opts.quad_degree);
        if (!f_jacobi->count()) opts.jacobi = cfg_json.value("jacobi", opts.jacobi);
        if (!f_det->count())
            opts.deterministic = cfg_json.value("deterministic", opts.deterministic);
        if (!o_seed->count()) opts.seed = cfg_json.value("seed", opts.seed);
        if (!o_snap->count())
            opts.snapshot_every = cfg_json.value("snapshot_every", opts.snapshot_every);
        if (!o_var->count())
            variant = cfg_json.value("deformation_variant", variant);
        if (f_serial->count())
            opts.parallel = false;
        else
            opts.parallel = cfg_json.value("parallel", opts.parallel);
        if (!o_levels1->count() && cfg_json.contains("levels"))
            exp_levels = cfg_json["levels"].get<std::vector<int>>();
        if (!o_ks->count() && cfg_json.contains("levels"))
            circle_levels = cfg_json["levels"].get<std::vector<int>>();
        if (!o_level2->count()) exp2_level = cfg_json.value("level", exp2_level);
        if (!o_level3->count()) exp3_level = cfg_json.value("level", exp3_level);
        if (!o_slevel->count()) scaling_level = cfg_json.value("level", scaling_level);
        if (!o_r0->count() && cfg_json.contains("r0"))
            r0s = cfg_json["r0"].get<std::vector<double>>();
        if (!o_stend->count()) scaling_t_end = cfg_json.value("t_end", scaling_t_end);
        if (cfg_json.value("quad_degree", 5) != 3 && cfg_json.value("quad_degree", 5) != 5 &&
            cfg_json.value("quad_degree", 5) != 7) {
            std::fprintf(stderr, "config: quad_degree must be 3, 5 or 7\n");
            return 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    opts.corrected_deformation = (variant == "corrected");

    try {
        if (exp1->parsed()) return finish(run_experiment1(opts, exp_levels).report, opts);
        if (exp2->parsed()) return finish(run_experiment2(opts, exp2_level).report, opts);
        if (exp3->parsed()) return finish(run_experiment3(opts, exp3_level).report, opts);
        if (circle->parsed())
            return finish(run_converge_circle(opts, circle_levels).report, opts);
        if (scaling->parsed())
            return finish(run_scaling_test(opts, r0s, scaling_level, scaling_t_end).report,
                          opts);
        if (checkgeom->parsed()) return finish(run_check_geometry(opts, hooks), opts);
        if (checkvar->parsed()) return finish(run_check_variations(opts, hooks), opts);
        if (custom->parsed()) return run_custom(cfg_json, opts);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        write_failed_marker(opts.out_dir, std::string("numerical failure: ") + e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        write_failed_marker(opts.out_dir, std::string("error: ") + e.what());
        return 3;
    }
    return 2;
}
