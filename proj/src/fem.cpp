#include "geoflow/fem.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <string>

#include "geoflow/core.hpp"

namespace geoflow {

ElementGeometry element_geometry(const SurfaceMesh& mesh, int s) {
    ElementGeometry g;
    const int* v = mesh.simplex(s);
    if (mesh.dim == 1) {
        const double* a = mesh.vertex(v[0]);
        const double* b = mesh.vertex(v[1]);
        const double e[2] = {b[0] - a[0], b[1] - a[1]};
        const double L = norm(e, 2);
        if (!(L > 0.0))
            throw NumericalError("element_geometry: degenerate segment " + std::to_string(s));
        g.measure = L;
        g.grads[1][0] = e[0] / (L * L);
        g.grads[1][1] = e[1] / (L * L);
        g.grads[0][0] = -g.grads[1][0];
        g.grads[0][1] = -g.grads[1][1];
        g.normal[0] = e[1] / L;  // outward for counterclockwise polygons
        g.normal[1] = -e[0] / L;
    } else {
        double t1[3], t2[3], n[3];
        for (int c = 0; c < 3; ++c) {
            t1[c] = mesh.vertex(v[1])[c] - mesh.vertex(v[0])[c];
            t2[c] = mesh.vertex(v[2])[c] - mesh.vertex(v[0])[c];
        }
        cross3(t1, t2, n);
        const double n2 = norm(n, 3);
        const double diam2 = std::max({norm2(t1, 3), norm2(t2, 3)});
        if (!(n2 > 2e-10 * diam2))
            throw NumericalError("element_geometry: degenerate triangle " + std::to_string(s));
        g.measure = 0.5 * n2;
        for (int c = 0; c < 3; ++c) g.normal[c] = n[c] / n2;
        const double a = dot(t1, t1, 3), b = dot(t1, t2, 3), c = dot(t2, t2, 3);
        const double det = a * c - b * b;
        for (int k = 0; k < 3; ++k) {
            g.grads[1][k] = (c * t1[k] - b * t2[k]) / det;
            g.grads[2][k] = (a * t2[k] - b * t1[k]) / det;
            g.grads[0][k] = -g.grads[1][k] - g.grads[2][k];
        }
    }
    return g;
}

FemPattern FemPattern::build(const SurfaceMesh& mesh) {
    const int nv = mesh.n_vertices();
    const int k = mesh.dim + 1;
    std::vector<std::vector<int>> adj(nv);
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const int* v = mesh.simplex(s);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) adj[v[i]].push_back(v[j]);
    }
    FemPattern p;
    p.row_ptr.resize(nv + 1, 0);
    for (int i = 0; i < nv; ++i) {
        auto& row = adj[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        p.row_ptr[i + 1] = p.row_ptr[i] + (int)row.size();
    }
    p.col_idx.reserve(p.row_ptr[nv]);
    for (int i = 0; i < nv; ++i)
        p.col_idx.insert(p.col_idx.end(), adj[i].begin(), adj[i].end());

    p.scatter.resize((std::size_t)mesh.n_simplices() * k * k);
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const int* v = mesh.simplex(s);
        for (int i = 0; i < k; ++i) {
            const int* lo = p.col_idx.data() + p.row_ptr[v[i]];
            const int* hi = p.col_idx.data() + p.row_ptr[v[i] + 1];
            for (int j = 0; j < k; ++j) {
                const int* it = std::lower_bound(lo, hi, v[j]);
                p.scatter[((std::size_t)s * k + i) * k + j] =
                    (int)(p.row_ptr[v[i]] + (it - lo));
            }
        }
    }
    return p;
}

namespace {

struct FieldGradients {
    double gf[3][3];  // [component][ambient coord]
    double gradsq;
};

FieldGradients field_gradients(const ElementGeometry& geo, const SurfaceMesh& mesh,
                               const VertexField& f, const int* v) {
    FieldGradients r;
    const int k = mesh.dim + 1, m = mesh.ambient(), nc = f.n_components;
    std::memset(r.gf, 0, sizeof r.gf);
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < nc; ++a)
            for (int c = 0; c < m; ++c) r.gf[a][c] += f.at(v[i])[a] * geo.grads[i][c];
    r.gradsq = 0.0;
    for (int a = 0; a < nc; ++a) r.gradsq += norm2(r.gf[a], m);
    return r;
}

struct StepElem {
    double A[9];
    double b[9];
    double rowsum[3];
};

void element_step(const SurfaceMesh& mesh, const QuadratureRule& rule,
                  const VertexField& f, const AssemblyOptions& opts, int s,
                  StepElem& e) {
    const int k = mesh.dim + 1, m = mesh.ambient(), nc = f.n_components;
    const int* v = mesh.simplex(s);
    const ElementGeometry geo = element_geometry(mesh, s);
    const FieldGradients fg = field_gradients(geo, mesh, f, v);
    const double guard2 = opts.guard_radius * opts.guard_radius;

    double Sgeo[9];
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) Sgeo[i * k + j] = dot(geo.grads[i], geo.grads[j], m);

    double M[9] = {}, R[9] = {};
    double wrho = 0.0;
    for (int q = 0; q < rule.n_points; ++q) {
        const double* lam = rule.point(q);
        const double w = rule.weights[q] * geo.measure;
        double fq[3] = {};
        for (int i = 0; i < k; ++i) axpy(lam[i], f.at(v[i]), fq, nc);
        const double r2 = norm2(fq, nc);
        if (r2 < guard2)
            throw NumericalError("assembly: field below guard radius at quadrature point"
                                 " of simplex " + std::to_string(s));
        const double r4 = r2 * r2;
        const double rho = 0.5 + 0.5 / r4;
        const double react = fg.gradsq / (r4 * r2);
        wrho += w * rho;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double lij = lam[i] * lam[j];
                M[i * k + j] += w * rho * lij;
                R[i * k + j] += w * react * lij;
            }
    }
    const double inv_tau = 1.0 / opts.tau;
    for (int i = 0; i < k; ++i) {
        double rs = 0.0;
        for (int j = 0; j < k; ++j) {
            e.A[i * k + j] = inv_tau * M[i * k + j] + wrho * Sgeo[i * k + j];
            rs += M[i * k + j];
        }
        e.rowsum[i] = rs;
        for (int a = 0; a < nc; ++a) {
            double s2 = 0.0;
            for (int j = 0; j < k; ++j)
                s2 += (inv_tau * M[i * k + j] + R[i * k + j]) * f.at(v[j])[a];
            e.b[i * nc + a] = s2;
        }
    }
}

struct GenElem {
    double A[81];  // [(i*k+j)*nc*nc + a*nc + b]
    double b[9];
    double rowsum[3];
};

void element_general(const SurfaceMesh& mesh, const QuadratureRule& rule,
                     const VertexField& f, const MetricEval& metric,
                     const AssemblyOptions& opts, int s, GenElem& e) {
    const int k = mesh.dim + 1, m = mesh.ambient(), nc = f.n_components;
    const int* v = mesh.simplex(s);
    const ElementGeometry geo = element_geometry(mesh, s);
    const FieldGradients fg = field_gradients(geo, mesh, f, v);

    double Sgeo[9];
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) Sgeo[i * k + j] = dot(geo.grads[i], geo.grads[j], m);
    double B[9];  // gram matrix of component gradients
    for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) B[a * nc + b] = dot(fg.gf[a], fg.gf[b], m);

    double M[81] = {}, wG[9] = {}, reac[9] = {};
    for (int q = 0; q < rule.n_points; ++q) {
        const double* lam = rule.point(q);
        const double w = rule.weights[q] * geo.measure;
        double fq[3] = {};
        for (int i = 0; i < k; ++i) axpy(lam[i], f.at(v[i]), fq, nc);
        double G[9], dG[27];
        try {
            metric.metric(fq, G);
            metric.metric_deriv(fq, dG);
        } catch (const NumericalError& err) {
            throw NumericalError(std::string(err.what()) + " (quadrature point of simplex " +
                                 std::to_string(s) + ")");
        }
        for (int ab = 0; ab < nc * nc; ++ab) wG[ab] += w * G[ab];
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double wl = w * lam[i] * lam[j];
                double* blk = M + (std::size_t)(i * k + j) * nc * nc;
                for (int ab = 0; ab < nc * nc; ++ab) blk[ab] += wl * G[ab];
            }
        for (int b = 0; b < nc; ++b) {
            double sum = 0.0;
            for (int kk = 0; kk < nc; ++kk)
                for (int ll = 0; ll < nc; ++ll) sum += dG[(b * nc + kk) * nc + ll] * B[kk * nc + ll];
            const double Rb = -0.5 * sum;
            for (int i = 0; i < k; ++i) reac[i * nc + b] += w * lam[i] * Rb;
        }
    }
    const double inv_tau = 1.0 / opts.tau;
    for (int i = 0; i < k; ++i) {
        double rs = 0.0;
        for (int a = 0; a < nc; ++a) {
            double rsa = 0.0, ba = reac[i * nc + a];
            for (int j = 0; j < k; ++j) {
                const double* Mblk = M + (std::size_t)(i * k + j) * nc * nc;
                for (int b = 0; b < nc; ++b) {
                    e.A[(std::size_t)(i * k + j) * nc * nc + a * nc + b] =
                        inv_tau * Mblk[a * nc + b] + wG[a * nc + b] * Sgeo[i * k + j];
                    rsa += std::fabs(Mblk[a * nc + b]);
                    ba += inv_tau * Mblk[a * nc + b] * f.at(v[j])[b];
                }
            }
            e.b[i * nc + a] = ba;
            rs = std::max(rs, rsa);
        }
        e.rowsum[i] = rs;
    }
}

void init_system(const FemPattern& pattern, int nv, int nc, int bs, SparseSystem& out) {
    out.n = nv;
    out.nc = nc;
    out.bs = bs;
    out.row_ptr = pattern.row_ptr;
    out.col_idx = pattern.col_idx;
    out.values.assign((std::size_t)pattern.col_idx.size() * bs, 0.0);
    out.rhs.assign((std::size_t)nv * nc, 0.0);
    out.mass_row_sum_max = 0.0;
}

// Exceptions (guard radius, degenerate simplices) may not escape an OpenMP
// region; capture the first one and rethrow after the loop.
template <class Body>
void guarded_loop(int ns, bool parallel, Body&& body) {
    std::atomic<bool> failed{false};
    std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#else
    (void)parallel;
#endif
    for (int s = 0; s < ns; ++s) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            body(s);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(geoflow_fem_guarded_loop)
#endif
            {
                if (!err) err = std::current_exception();
            }
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (err) std::rethrow_exception(err);
}

void check_field(const SurfaceMesh& mesh, const VertexField& f, const char* what) {
    if (f.n_vertices() != mesh.n_vertices())
        throw NumericalError(std::string(what) + ": field/mesh vertex count mismatch");
    if (f.n_components < 2 || f.n_components > 3)
        throw NumericalError(std::string(what) + ": field must have 2 or 3 components");
}

// Shared two-pass driver: per-simplex element data computed in parallel, then
// merged into CSR either in simplex order (deterministic) or with atomics.
template <class Elem, class Kernel>
void assemble_two_pass(const SurfaceMesh& mesh, const FemPattern& pattern, int nc,
                       int bs, const AssemblyOptions& opts, SparseSystem& out,
                       Kernel kernel) {
    const int k = mesh.dim + 1;
    const int ns = mesh.n_simplices();
    init_system(pattern, mesh.n_vertices(), nc, bs, out);

    std::vector<Elem> elems((std::size_t)ns);
    guarded_loop(ns, opts.parallel, [&](int s) { kernel(s, elems[(std::size_t)s]); });

    std::vector<double> vrow((std::size_t)mesh.n_vertices(), 0.0);
    auto merge_one = [&](int s, bool atomic) {
        const Elem& e = elems[(std::size_t)s];
        const int* v = mesh.simplex(s);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const int slot = pattern.scatter[((std::size_t)s * k + i) * k + j];
                for (int c = 0; c < bs; ++c) {
                    const double add = e.A[(std::size_t)(i * k + j) * bs + c];
                    if (atomic) {
#ifdef _OPENMP
#pragma omp atomic
#endif
                        out.values[(std::size_t)slot * bs + c] += add;
                    } else {
                        out.values[(std::size_t)slot * bs + c] += add;
                    }
                }
            }
            for (int a = 0; a < nc; ++a) {
                const double add = e.b[i * nc + a];
                if (atomic) {
#ifdef _OPENMP
#pragma omp atomic
#endif
                    out.rhs[(std::size_t)v[i] * nc + a] += add;
                } else {
                    out.rhs[(std::size_t)v[i] * nc + a] += add;
                }
            }
            if (atomic) {
#ifdef _OPENMP
#pragma omp atomic
#endif
                vrow[v[i]] += e.rowsum[i];
            } else {
                vrow[v[i]] += e.rowsum[i];
            }
        }
    };
    if (opts.deterministic || !opts.parallel) {
        for (int s = 0; s < ns; ++s) merge_one(s, false);
    } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int s = 0; s < ns; ++s) merge_one(s, true);
    }
    out.mass_row_sum_max = 0.0;
    for (double r : vrow) out.mass_row_sum_max = std::max(out.mass_row_sum_max, r);
}

}  // namespace

void assemble_step_system(const SurfaceMesh& mesh, const FemPattern& pattern,
                          const VertexField& f_old, const AssemblyOptions& opts,
                          SparseSystem& out) {
    check_field(mesh, f_old, "assemble_step_system");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    assemble_two_pass<StepElem>(mesh, pattern, f_old.n_components, 1, opts, out,
                                [&](int s, StepElem& e) {
                                    element_step(mesh, rule, f_old, opts, s, e);
                                });
}

void assemble_step_system_serial(const SurfaceMesh& mesh, const FemPattern& pattern,
                                 const VertexField& f_old, const AssemblyOptions& opts,
                                 SparseSystem& out) {
    check_field(mesh, f_old, "assemble_step_system");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int k = mesh.dim + 1, nc = f_old.n_components;
    init_system(pattern, mesh.n_vertices(), nc, 1, out);
    std::vector<double> vrow((std::size_t)mesh.n_vertices(), 0.0);
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        StepElem e;
        element_step(mesh, rule, f_old, opts, s, e);
        const int* v = mesh.simplex(s);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j)
                out.values[pattern.scatter[((std::size_t)s * k + i) * k + j]] +=
                    e.A[i * k + j];
            for (int a = 0; a < nc; ++a) out.rhs[(std::size_t)v[i] * nc + a] += e.b[i * nc + a];
            vrow[v[i]] += e.rowsum[i];
        }
    }
    for (double r : vrow) out.mass_row_sum_max = std::max(out.mass_row_sum_max, r);
}

void assemble_general_system(const SurfaceMesh& mesh, const FemPattern& pattern,
                             const VertexField& f_old, const MetricEval& metric,
                             const AssemblyOptions& opts, SparseSystem& out) {
    check_field(mesh, f_old, "assemble_general_system");
    if (metric.dim != f_old.n_components)
        throw NumericalError("assemble_general_system: metric dimension mismatch");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int nc = f_old.n_components;
    assemble_two_pass<GenElem>(mesh, pattern, nc, nc * nc, opts, out,
                               [&](int s, GenElem& e) {
                                   element_general(mesh, rule, f_old, metric, opts, s, e);
                               });
}

void assemble_general_system_serial(const SurfaceMesh& mesh, const FemPattern& pattern,
                                    const VertexField& f_old, const MetricEval& metric,
                                    const AssemblyOptions& opts, SparseSystem& out) {
    check_field(mesh, f_old, "assemble_general_system");
    if (metric.dim != f_old.n_components)
        throw NumericalError("assemble_general_system: metric dimension mismatch");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int k = mesh.dim + 1, nc = f_old.n_components, bs = nc * nc;
    init_system(pattern, mesh.n_vertices(), nc, bs, out);
    std::vector<double> vrow((std::size_t)mesh.n_vertices(), 0.0);
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        GenElem e;
        element_general(mesh, rule, f_old, metric, opts, s, e);
        const int* v = mesh.simplex(s);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const int slot = pattern.scatter[((std::size_t)s * k + i) * k + j];
                for (int c = 0; c < bs; ++c)
                    out.values[(std::size_t)slot * bs + c] +=
                        e.A[(std::size_t)(i * k + j) * bs + c];
            }
            for (int a = 0; a < nc; ++a) out.rhs[(std::size_t)v[i] * nc + a] += e.b[i * nc + a];
            vrow[v[i]] += e.rowsum[i];
        }
    }
    for (double r : vrow) out.mass_row_sum_max = std::max(out.mass_row_sum_max, r);
}

namespace {

double element_energy(const SurfaceMesh& mesh, const QuadratureRule& rule,
                      const VertexField& f, const AssemblyOptions& opts, int s) {
    const int k = mesh.dim + 1, nc = f.n_components;
    const int* v = mesh.simplex(s);
    const ElementGeometry geo = element_geometry(mesh, s);
    const FieldGradients fg = field_gradients(geo, mesh, f, v);
    const double guard2 = opts.guard_radius * opts.guard_radius;
    double e = 0.0;
    for (int q = 0; q < rule.n_points; ++q) {
        const double* lam = rule.point(q);
        double fq[3] = {};
        for (int i = 0; i < k; ++i) axpy(lam[i], f.at(v[i]), fq, nc);
        const double r2 = norm2(fq, nc);
        if (r2 < guard2)
            throw NumericalError("energy: field below guard radius at quadrature point"
                                 " of simplex " + std::to_string(s));
        const double rho = 0.5 + 0.5 / (r2 * r2);
        e += rule.weights[q] * geo.measure * 0.5 * fg.gradsq * rho;
    }
    return e;
}

template <class PerSimplex>
double integrate_simplices(int ns, const AssemblyOptions& opts, PerSimplex func) {
    std::vector<double> partial((std::size_t)ns);
    guarded_loop(ns, opts.parallel, [&](int s) { partial[(std::size_t)s] = func(s); });
    if (opts.deterministic || !opts.parallel)
        return det_sum(partial.data(), partial.size(), opts.parallel);
    double total = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total)
#endif
    for (long long s = 0; s < ns; ++s) total += partial[(std::size_t)s];
    return total;
}

}  // namespace

double discrete_energy(const SurfaceMesh& mesh, const VertexField& f,
                       const AssemblyOptions& opts) {
    check_field(mesh, f, "discrete_energy");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    return integrate_simplices(mesh.n_simplices(), opts, [&](int s) {
        return element_energy(mesh, rule, f, opts, s);
    });
}

double discrete_energy_serial(const SurfaceMesh& mesh, const VertexField& f,
                              const AssemblyOptions& opts) {
    check_field(mesh, f, "discrete_energy");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    double e = 0.0;
    for (int s = 0; s < mesh.n_simplices(); ++s)
        e += element_energy(mesh, rule, f, opts, s);
    return e;
}

namespace {

void element_first_variation(const SurfaceMesh& mesh, const QuadratureRule& rule,
                             const VertexField& f, const AssemblyOptions& opts, int s,
                             double* ge /* k*nc */) {
    const int k = mesh.dim + 1, m = mesh.ambient(), nc = f.n_components;
    const int* v = mesh.simplex(s);
    const ElementGeometry geo = element_geometry(mesh, s);
    const FieldGradients fg = field_gradients(geo, mesh, f, v);
    const double guard2 = opts.guard_radius * opts.guard_radius;

    double gdot[9];  // grad f^a . grad phi_i
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < nc; ++a) gdot[i * nc + a] = dot(fg.gf[a], geo.grads[i], m);

    std::memset(ge, 0, sizeof(double) * k * nc);
    double wrho = 0.0;
    for (int q = 0; q < rule.n_points; ++q) {
        const double* lam = rule.point(q);
        const double w = rule.weights[q] * geo.measure;
        double fq[3] = {};
        for (int i = 0; i < k; ++i) axpy(lam[i], f.at(v[i]), fq, nc);
        const double r2 = norm2(fq, nc);
        if (r2 < guard2)
            throw NumericalError("first_variation: field below guard radius at quadrature"
                                 " point of simplex " + std::to_string(s));
        const double r4 = r2 * r2;
        wrho += w * (0.5 + 0.5 / r4);
        const double c = w * fg.gradsq / (r4 * r2);
        for (int i = 0; i < k; ++i)
            for (int a = 0; a < nc; ++a) ge[i * nc + a] -= c * lam[i] * fq[a];
    }
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < nc; ++a) ge[i * nc + a] += wrho * gdot[i * nc + a];
}

}  // namespace

std::vector<double> first_variation(const SurfaceMesh& mesh, const VertexField& f,
                                    const AssemblyOptions& opts) {
    check_field(mesh, f, "first_variation");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int k = mesh.dim + 1, nc = f.n_components;
    const int ns = mesh.n_simplices();
    std::vector<double> buf((std::size_t)ns * k * nc);
    guarded_loop(ns, opts.parallel, [&](int s) {
        element_first_variation(mesh, rule, f, opts, s, buf.data() + (std::size_t)s * k * nc);
    });

    std::vector<double> g((std::size_t)mesh.n_vertices() * nc, 0.0);
    if (opts.deterministic || !opts.parallel) {
        for (int s = 0; s < ns; ++s) {
            const int* v = mesh.simplex(s);
            for (int i = 0; i < k; ++i)
                for (int a = 0; a < nc; ++a)
                    g[(std::size_t)v[i] * nc + a] += buf[((std::size_t)s * k + i) * nc + a];
        }
    } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int s = 0; s < ns; ++s) {
            const int* v = mesh.simplex(s);
            for (int i = 0; i < k; ++i)
                for (int a = 0; a < nc; ++a) {
                    const double add = buf[((std::size_t)s * k + i) * nc + a];
#ifdef _OPENMP
#pragma omp atomic
#endif
                    g[(std::size_t)v[i] * nc + a] += add;
                }
        }
    }
    return g;
}

std::vector<double> first_variation_serial(const SurfaceMesh& mesh, const VertexField& f,
                                           const AssemblyOptions& opts) {
    check_field(mesh, f, "first_variation");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int k = mesh.dim + 1, nc = f.n_components;
    std::vector<double> g((std::size_t)mesh.n_vertices() * nc, 0.0);
    double ge[9];
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        element_first_variation(mesh, rule, f, opts, s, ge);
        const int* v = mesh.simplex(s);
        for (int i = 0; i < k; ++i)
            for (int a = 0; a < nc; ++a) g[(std::size_t)v[i] * nc + a] += ge[i * nc + a];
    }
    return g;
}

double second_variation_apply(const SurfaceMesh& mesh, const VertexField& f,
                              const VertexField& psi, const AssemblyOptions& opts) {
    check_field(mesh, f, "second_variation_apply");
    check_field(mesh, psi, "second_variation_apply");
    if (psi.n_components != f.n_components)
        throw NumericalError("second_variation_apply: component mismatch");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int k = mesh.dim + 1, m = mesh.ambient(), nc = f.n_components;
    const double guard2 = opts.guard_radius * opts.guard_radius;
    return integrate_simplices(mesh.n_simplices(), opts, [&](int s) {
        const int* v = mesh.simplex(s);
        const ElementGeometry geo = element_geometry(mesh, s);
        const FieldGradients fg = field_gradients(geo, mesh, f, v);
        const FieldGradients pg = field_gradients(geo, mesh, psi, v);
        double cross = 0.0;
        for (int a = 0; a < nc; ++a) cross += dot(fg.gf[a], pg.gf[a], m);
        double acc = 0.0;
        for (int q = 0; q < rule.n_points; ++q) {
            const double* lam = rule.point(q);
            const double w = rule.weights[q] * geo.measure;
            double fq[3] = {}, pq[3] = {};
            for (int i = 0; i < k; ++i) {
                axpy(lam[i], f.at(v[i]), fq, nc);
                axpy(lam[i], psi.at(v[i]), pq, nc);
            }
            const double r2 = norm2(fq, nc);
            if (r2 < guard2)
                throw NumericalError("second_variation_apply: field below guard radius at"
                                     " quadrature point of simplex " + std::to_string(s));
            const double r4 = r2 * r2, r6 = r4 * r2, r8 = r4 * r4;
            const double fp = dot(fq, pq, nc);
            acc += w * (pg.gradsq * (0.5 + 0.5 / r4) - 4.0 * cross * fp / r6 -
                        fg.gradsq * norm2(pq, nc) / r6 + 6.0 * fg.gradsq * fp * fp / r8);
        }
        return acc;
    });
}

BFormValues bilinear_b(const SurfaceMesh& mesh, const VertexField& f,
                       const VertexField& psi, const AssemblyOptions& opts) {
    if (mesh.dim != 1 || f.n_components != 2)
        throw NumericalError("bilinear_b: requires a polygonal mesh and two components");
    check_field(mesh, f, "bilinear_b");
    check_field(mesh, psi, "bilinear_b");
    for (int vtx = 0; vtx < f.n_vertices(); ++vtx)
        if (std::fabs(norm(f.at(vtx), 2) - 1.0) > 1e-10)
            throw NumericalError("bilinear_b: map must be unit length at the vertices");

    const QuadratureRule& rule = quadrature_rule(1, opts.quad_degree);
    const int k = 2, m = 2, nc = 2;
    BFormValues out;
    std::vector<double> direct((std::size_t)mesh.n_simplices());
    std::vector<double> decomp((std::size_t)mesh.n_simplices());
    guarded_loop(mesh.n_simplices(), opts.parallel, [&](int s) {
        const int* v = mesh.simplex(s);
        const ElementGeometry geo = element_geometry(mesh, s);
        const FieldGradients fg = field_gradients(geo, mesh, f, v);
        const FieldGradients pg = field_gradients(geo, mesh, psi, v);
        double cross = 0.0;
        for (int a = 0; a < nc; ++a) cross += dot(fg.gf[a], pg.gf[a], m);
        // gradient rows of the rotated map f_perp = (-f_2, f_1)
        double gperp[2][2];
        for (int c = 0; c < m; ++c) {
            gperp[0][c] = -fg.gf[1][c];
            gperp[1][c] = fg.gf[0][c];
        }
        double dir = 0.0, dec = 0.0;
        for (int q = 0; q < rule.n_points; ++q) {
            const double* lam = rule.point(q);
            const double w = rule.weights[q] * geo.measure;
            double fq[2] = {}, pq[2] = {};
            for (int i = 0; i < k; ++i) {
                axpy(lam[i], f.at(v[i]), fq, nc);
                axpy(lam[i], psi.at(v[i]), pq, nc);
            }
            const double fp = dot(fq, pq, nc);
            dir += w * (pg.gradsq - 4.0 * cross * fp - fg.gradsq * norm2(pq, nc) +
                        6.0 * fg.gradsq * fp * fp);
            // product-rule gradients of the quadratics psi.f and psi.f_perp
            const double fperp_q[2] = {-fq[1], fq[0]};
            double gnu[2] = {}, gtau[2] = {};
            for (int a = 0; a < nc; ++a)
                for (int c = 0; c < m; ++c) {
                    gnu[c] += fq[a] * pg.gf[a][c] + pq[a] * fg.gf[a][c];
                    gtau[c] += fperp_q[a] * pg.gf[a][c] + pq[a] * gperp[a][c];
                }
            const double psi_nu = fp;
            dec += w * (norm2(gnu, m) + norm2(gtau, m) +
                        2.0 * fg.gradsq * psi_nu * psi_nu);
        }
        direct[(std::size_t)s] = dir;
        decomp[(std::size_t)s] = dec;
    });
    out.direct = det_sum(direct.data(), direct.size(), opts.parallel);
    out.decomposed = det_sum(decomp.data(), decomp.size(), opts.parallel);
    return out;
}

double h1_error(const SurfaceMesh& mesh, const VertexField& f,
                const std::function<void(const double*, double*)>& exact,
                const AssemblyOptions& opts) {
    check_field(mesh, f, "h1_error");
    const QuadratureRule& rule = quadrature_rule(mesh.dim, opts.quad_degree);
    const int k = mesh.dim + 1, m = mesh.ambient(), nc = f.n_components;

    VertexField interp;  // I_h(exact)
    interp.n_components = nc;
    interp.values.resize(f.values.size());
    for (int vtx = 0; vtx < mesh.n_vertices(); ++vtx)
        exact(mesh.vertex(vtx), interp.at(vtx));

    const double err2 = integrate_simplices(mesh.n_simplices(), opts, [&](int s) {
        const int* v = mesh.simplex(s);
        const ElementGeometry geo = element_geometry(mesh, s);
        double acc = 0.0;
        for (int q = 0; q < rule.n_points; ++q) {
            const double* lam = rule.point(q);
            const double w = rule.weights[q] * geo.measure;
            double xq[3] = {}, fq[3] = {}, ex[3];
            for (int i = 0; i < k; ++i) {
                axpy(lam[i], mesh.vertex(v[i]), xq, m);
                axpy(lam[i], f.at(v[i]), fq, nc);
            }
            exact(xq, ex);
            double e2 = 0.0;
            for (int a = 0; a < nc; ++a) e2 += (fq[a] - ex[a]) * (fq[a] - ex[a]);
            acc += w * e2;
        }
        // gradient deviation from the interpolant, constant on the simplex
        double diff[3][3] = {};
        for (int i = 0; i < k; ++i)
            for (int a = 0; a < nc; ++a)
                for (int c = 0; c < m; ++c)
                    diff[a][c] += (f.at(v[i])[a] - interp.at(v[i])[a]) * geo.grads[i][c];
        double g2 = 0.0;
        for (int a = 0; a < nc; ++a) g2 += norm2(diff[a], m);
        return acc + geo.measure * g2;
    });
    return std::sqrt(err2);
}

}  // namespace geoflow
