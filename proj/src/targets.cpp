#include "geoflow/targets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace geoflow {

// --- sphere ---------------------------------------------------------------

SphereTarget::SphereTarget(int ambient_dim, double guard_radius)
    : m_(ambient_dim), guard_(guard_radius) {
    if (m_ < 2 || m_ > 3) throw NumericalError("sphere target: ambient dim must be 2 or 3");
    if (!(guard_ > 0.0)) throw NumericalError("sphere target: guard radius must be positive");
}

void SphereTarget::check_admissible(const double* x) const {
    if (norm(x, m_) < guard_)
        throw NumericalError("sphere target: evaluation too close to origin");
}

double SphereTarget::rho(const double* x) const {
    check_admissible(x);
    const double r2 = norm2(x, m_);
    return 0.5 + 0.5 / (r2 * r2);
}

void SphereTarget::drho(const double* x, double* g) const {
    check_admissible(x);
    const double r2 = norm2(x, m_);
    const double r6 = r2 * r2 * r2;
    for (int i = 0; i < m_; ++i) g[i] = -2.0 * x[i] / r6;
}

void SphereTarget::involution(const double* x, double* y) const {
    check_admissible(x);
    const double r2 = norm2(x, m_);
    for (int i = 0; i < m_; ++i) y[i] = x[i] / r2;
}

double SphereTarget::distance(const double* x) const { return norm(x, m_) - 1.0; }

void SphereTarget::project(const double* x, double* y) const {
    check_admissible(x);
    const double r = norm(x, m_);
    for (int i = 0; i < m_; ++i) y[i] = x[i] / r;
}

void SphereTarget::metric(const double* x, double* G) const {
    const double r = rho(x);
    std::memset(G, 0, sizeof(double) * m_ * m_);
    for (int i = 0; i < m_; ++i) G[i * m_ + i] = r;
}

void SphereTarget::metric_deriv(const double* x, double* dG) const {
    double g[3];
    drho(x, g);
    std::memset(dG, 0, sizeof(double) * m_ * m_ * m_);
    for (int b = 0; b < m_; ++b)
        for (int k = 0; k < m_; ++k) dG[(b * m_ + k) * m_ + k] = g[b];
}

void SphereTarget::christoffel(const double* x, double* Gam) const {
    const double r = rho(x);
    double g[3];
    drho(x, g);
    const double inv2r = 0.5 / r;
    for (int c = 0; c < m_; ++c)
        for (int a = 0; a < m_; ++a)
            for (int b = 0; b < m_; ++b)
                Gam[(c * m_ + a) * m_ + b] =
                    inv2r * ((c == b ? g[a] : 0.0) + (c == a ? g[b] : 0.0) -
                             (a == b ? g[c] : 0.0));
}

void SphereTarget::covariant_hessian_distance(const double* x, double* H) const {
    check_admissible(x);
    const double r = norm(x, m_);
    const double r2 = r * r, r4 = r2 * r2;
    const double sigma = r - 1.0;
    const double pref = 1.0 / (r * (1.0 + r4));
    const double diag = (1.0 + r) * (1.0 + r2) * sigma;
    const double rank1 = 3.0 - r4;
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b)
            H[a * m_ + b] =
                pref * ((a == b ? diag : 0.0) + rank1 * (x[a] / r) * (x[b] / r));
}

MetricEval SphereTarget::metric_eval() const {
    MetricEval ev;
    ev.dim = m_;
    SphereTarget self = *this;
    ev.metric = [self](const double* x, double* G) { self.metric(x, G); };
    ev.metric_deriv = [self](const double* x, double* dG) { self.metric_deriv(x, dG); };
    ev.distance = [self](const double* x) { return self.distance(x); };
    return ev;
}

// --- generic Christoffel symbols -------------------------------------------

void christoffel_from_metric(int m, const double* G, const double* dG, double* Gam) {
    double Ginv[9];
    mat_inv(G, Ginv, m, "christoffel");
    for (int c = 0; c < m; ++c)
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                double s = 0.0;
                for (int d = 0; d < m; ++d)
                    s += Ginv[c * m + d] * (dG[(a * m + d) * m + b] +
                                            dG[(b * m + d) * m + a] -
                                            dG[(d * m + a) * m + b]);
                Gam[(c * m + a) * m + b] = 0.5 * s;
            }
}

// --- hypersurfaces ----------------------------------------------------------

HypersurfaceTarget HypersurfaceTarget::unit_sphere(int ambient_dim) {
    if (ambient_dim < 2 || ambient_dim > 3)
        throw NumericalError("hypersurface target: ambient dim must be 2 or 3");
    HypersurfaceTarget t;
    t.m_ = ambient_dim;
    t.analytic_sphere_ = true;
    t.tube_ = 0.4;  // 0.4 / max |curvature|, curvature 1
    return t;
}

HypersurfaceTarget HypersurfaceTarget::ellipsoid(double a, double b, double c) {
    if (!(a > 0 && b > 0 && c > 0))
        throw NumericalError("hypersurface target: ellipsoid semi-axes must be positive");
    HypersurfaceTarget t;
    t.m_ = 3;
    const double axes[3] = {a, b, c};
    const double amax = std::max({a, b, c});
    const double amin = std::min({a, b, c});
    t.tube_ = 0.4 * amin * amin / amax;  // max curvature of an ellipsoid is amax/amin^2
    t.phi_ = [=](const double* x) {
        double s = -1.0;
        for (int i = 0; i < 3; ++i) s += x[i] * x[i] / (axes[i] * axes[i]);
        return s;
    };
    t.dphi_ = [=](const double* x, double* g) {
        for (int i = 0; i < 3; ++i) g[i] = 2.0 * x[i] / (axes[i] * axes[i]);
    };
    t.d2phi_ = [=](const double*, double* H) {
        std::memset(H, 0, sizeof(double) * 9);
        for (int i = 0; i < 3; ++i) H[i * 3 + i] = 2.0 / (axes[i] * axes[i]);
    };
    return t;
}

void HypersurfaceTarget::check_tube(double d) const {
    if (!(std::fabs(d) <= tube_))
        throw NumericalError("hypersurface target: point outside tubular neighbourhood");
}

void HypersurfaceTarget::foot_point(const double* x, double* p, double* dist) const {
    if (analytic_sphere_) {
        const double r = norm(x, m_);
        if (r < 1e-12)
            throw NumericalError("hypersurface target: foot point undefined at origin");
        for (int i = 0; i < m_; ++i) p[i] = x[i] / r;
        *dist = r - 1.0;
        return;
    }
    // initial guess: radial push onto the surface in axis-scaled coordinates
    // (phi + 1 is the squared scaled radius for the quadratic level sets here)
    const int n = m_ + 1;
    double g[3], Hphi[9];
    double s2 = phi_(x) + 1.0;
    if (s2 < 1e-20) throw NumericalError("hypersurface target: foot point undefined at centre");
    const double sc = 1.0 / std::sqrt(s2);
    double unk[4];  // p, t
    for (int i = 0; i < m_; ++i) unk[i] = sc * x[i];
    dphi_(unk, g);
    double diff[3];
    for (int i = 0; i < m_; ++i) diff[i] = x[i] - unk[i];
    unk[m_] = dot(diff, g, m_) / norm2(g, m_);

    bool converged = false;
    for (int it = 0; it < newton_max_; ++it) {
        dphi_(unk, g);
        d2phi_(unk, Hphi);
        double F[4], J[16];
        for (int i = 0; i < m_; ++i) F[i] = unk[i] + unk[m_] * g[i] - x[i];
        F[m_] = phi_(unk);
        if (norm(F, n) <= newton_tol_) {
            converged = true;
            break;
        }
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < m_; ++j)
                J[i * n + j] = (i == j ? 1.0 : 0.0) + unk[m_] * Hphi[i * m_ + j];
            J[i * n + m_] = g[i];
            J[m_ * n + i] = g[i];
        }
        J[m_ * n + m_] = 0.0;
        double rhs[4];
        for (int i = 0; i < n; ++i) rhs[i] = -F[i];
        gauss_solve(n, J, rhs, "closest-point Newton");
        for (int i = 0; i < n; ++i) unk[i] += rhs[i];
    }
    if (!converged)
        throw NumericalError("hypersurface target: closest-point Newton did not converge");
    for (int i = 0; i < m_; ++i) p[i] = unk[i];
    dphi_(p, g);
    *dist = unk[m_] * norm(g, m_);  // x - p = t grad(phi), t > 0 outside
}

double HypersurfaceTarget::distance(const double* x) const {
    double p[3], d;
    foot_point(x, p, &d);
    check_tube(d);
    return d;
}

void HypersurfaceTarget::grad_distance(const double* x, double* g) const {
    double p[3], d;
    foot_point(x, p, &d);
    check_tube(d);
    if (analytic_sphere_) {
        const double r = norm(x, m_);
        for (int i = 0; i < m_; ++i) g[i] = x[i] / r;
        return;
    }
    double gp[3];
    dphi_(p, gp);
    const double len = norm(gp, m_);
    for (int i = 0; i < m_; ++i) g[i] = gp[i] / len;
}

void HypersurfaceTarget::hess_distance(const double* x, double* H) const {
    double p[3], d;
    foot_point(x, p, &d);
    check_tube(d);
    if (analytic_sphere_) {
        const double r = norm(x, m_);
        for (int a = 0; a < m_; ++a)
            for (int b = 0; b < m_; ++b)
                H[a * m_ + b] = ((a == b ? 1.0 : 0.0) - (x[a] / r) * (x[b] / r)) / r;
        return;
    }
    // shape operator A of the level set at the foot point, then
    // D2d(x) = A (Id + d A)^{-1}  (A and the resolvent commute)
    double gp[3], Hphi[9], nu[3];
    dphi_(p, gp);
    d2phi_(p, Hphi);
    const double len = norm(gp, m_);
    for (int i = 0; i < m_; ++i) nu[i] = gp[i] / len;
    double P[9], T[9], A[9];
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b) P[a * m_ + b] = (a == b ? 1.0 : 0.0) - nu[a] * nu[b];
    mat_mul(P, Hphi, T, m_);
    mat_mul(T, P, A, m_);
    for (int i = 0; i < m_ * m_; ++i) A[i] /= len;
    double R[9], Rinv[9];
    for (int i = 0; i < m_ * m_; ++i) R[i] = d * A[i];
    for (int i = 0; i < m_; ++i) R[i * m_ + i] += 1.0;
    mat_inv(R, Rinv, m_, "hess_distance resolvent");
    mat_mul(A, Rinv, H, m_);
    // symmetrise away the last-digit asymmetry of the solve
    for (int a = 0; a < m_; ++a)
        for (int b = a + 1; b < m_; ++b) {
            const double s = 0.5 * (H[a * m_ + b] + H[b * m_ + a]);
            H[a * m_ + b] = H[b * m_ + a] = s;
        }
}

void HypersurfaceTarget::project(const double* x, double* a) const {
    double d;
    foot_point(x, a, &d);
    check_tube(d);
}

void HypersurfaceTarget::involution(const double* x, double* y) const {
    double p[3], d;
    foot_point(x, p, &d);
    check_tube(d);
    // i(x) = x - 2 d Dd = 2p - x  (x = p + d Dd)
    for (int i = 0; i < m_; ++i) y[i] = 2.0 * p[i] - x[i];
}

void HypersurfaceTarget::metric(const double* x, double* G) const {
    const double d = distance(x);
    double H[9], HH[9];
    hess_distance(x, H);
    mat_mul(H, H, HH, m_);
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b)
            G[a * m_ + b] = (a == b ? 1.0 : 0.0) - 2.0 * d * H[a * m_ + b] +
                            2.0 * d * d * HH[a * m_ + b];
}

void HypersurfaceTarget::metric_deriv(const double* x, double* dG) const {
    double xp[3], Gp[9], Gm[9];
    for (int b = 0; b < m_; ++b) {
        copy(x, xp, m_);
        xp[b] = x[b] + fd_step_;
        metric(xp, Gp);
        xp[b] = x[b] - fd_step_;
        metric(xp, Gm);
        for (int k = 0; k < m_ * m_; ++k)
            dG[b * m_ * m_ + k] = (Gp[k] - Gm[k]) / (2.0 * fd_step_);
    }
}

void HypersurfaceTarget::christoffel(const double* x, double* Gam) const {
    double G[9], dG[27];
    metric(x, G);
    metric_deriv(x, dG);
    christoffel_from_metric(m_, G, dG, Gam);
}

void HypersurfaceTarget::covariant_hessian_distance(const double* x, double* H) const {
    double Dd[3], D2d[9], Gam[27];
    grad_distance(x, Dd);
    hess_distance(x, D2d);
    christoffel(x, Gam);
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b) {
            double s = D2d[a * m_ + b];
            for (int c = 0; c < m_; ++c) s -= Gam[(c * m_ + a) * m_ + b] * Dd[c];
            H[a * m_ + b] = s;
        }
}

MetricEval HypersurfaceTarget::metric_eval() const {
    MetricEval ev;
    ev.dim = m_;
    HypersurfaceTarget self = *this;
    ev.metric = [self](const double* x, double* G) { self.metric(x, G); };
    ev.metric_deriv = [self](const double* x, double* dG) { self.metric_deriv(x, dG); };
    ev.distance = [self](const double* x) { return self.distance(x); };
    return ev;
}

}  // namespace geoflow
