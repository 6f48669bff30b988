#pragma once

// Target manifolds and their extended ambient metrics.
//
// Maps into a sphere or a closed hypersurface M are computed without
// constraints by endowing the target ambient space with a metric G that makes
// M totally geodesic: G is the average of the flat metric with its pullback
// under an involution that fixes M (inversion at the sphere, reflection at M
// through the signed-distance foot point for a general hypersurface).

#include <functional>

#include "geoflow/core.hpp"

namespace geoflow {

/// Callable bundle consumed by the general-metric assembly: metric G(x)
/// (m*m, row-major), its derivative dG with layout dG[b*m*m + k*m + l] =
/// D_b G_{kl}, and a signed distance used by monitors.
struct MetricEval {
    int dim = 0;
    std::function<void(const double*, double*)> metric;
    std::function<void(const double*, double*)> metric_deriv;
    std::function<double(const double*)> distance;
};

/// Unit sphere S^{m-1} in R^m with the inversion-averaged metric
/// G(x) = rho(x) Id, rho(x) = 1/2 + 1/(2|x|^4).
class SphereTarget {
public:
    explicit SphereTarget(int ambient_dim, double guard_radius = 0.1);

    int dim() const { return m_; }
    double guard_radius() const { return guard_; }

    double rho(const double* x) const;
    void drho(const double* x, double* g) const;

    /// i(x) = x / |x|^2.
    void involution(const double* x, double* y) const;
    /// Signed distance |x| - 1 (used by monitors and the stationarity check).
    double distance(const double* x) const;
    /// Radial projection onto the sphere.
    void project(const double* x, double* y) const;

    void metric(const double* x, double* G) const;
    void metric_deriv(const double* x, double* dG) const;

    /// Gam[c*m*m + a*m + b] = Gamma^c_{ab} of the metric rho Id.
    void christoffel(const double* x, double* Gam) const;
    /// Covariant Hessian of sigma(x) = |x| - 1 in the metric rho Id
    /// (closed form; must agree with the Christoffel route).
    void covariant_hessian_distance(const double* x, double* H) const;

    MetricEval metric_eval() const;

private:
    void check_admissible(const double* x) const;
    int m_;
    double guard_;
};

/// Closed hypersurface M = {phi = 0} with the reflection-averaged metric
/// G = Id - 2 d D2d + 2 d^2 D2d D2d, defined on a tubular neighbourhood of M.
class HypersurfaceTarget {
public:
    /// |x| - 1 with closed-form derivatives (no Newton solve).
    static HypersurfaceTarget unit_sphere(int ambient_dim);
    /// x^2/a^2 + y^2/b^2 + z^2/c^2 = 1; signed distance via closest-point
    /// Newton iteration (tol 1e-13, <= 50 iterations).
    static HypersurfaceTarget ellipsoid(double a, double b, double c);

    int dim() const { return m_; }
    double tube_halfwidth() const { return tube_; }
    void set_tube_halfwidth(double w) { tube_ = w; }

    double distance(const double* x) const;
    void grad_distance(const double* x, double* g) const;
    void hess_distance(const double* x, double* H) const;

    /// Foot point a(x) = x - d(x) Dd(x) on M.
    void project(const double* x, double* a) const;
    /// Reflection i(x) = x - 2 d(x) Dd(x) through M.
    void involution(const double* x, double* y) const;

    void metric(const double* x, double* G) const;
    /// Central finite differences of `metric`, step 1e-6 (third derivatives
    /// of the distance are not assumed available).
    void metric_deriv(const double* x, double* dG) const;

    void christoffel(const double* x, double* Gam) const;
    /// D2d - Gamma . Dd; by the totally-geodesic property this must equal
    /// d * (D2d D2d).
    void covariant_hessian_distance(const double* x, double* H) const;

    MetricEval metric_eval() const;

private:
    HypersurfaceTarget() = default;
    void check_tube(double d) const;
    /// Closest point on M and the signed distance, via Newton on the
    /// Lagrange system of min |x-p|^2 subject to phi(p) = 0.
    void foot_point(const double* x, double* p, double* dist) const;

    int m_ = 3;
    double tube_ = 0.4;
    bool analytic_sphere_ = false;
    double fd_step_ = 1e-6;
    double newton_tol_ = 1e-13;
    int newton_max_ = 50;
    std::function<double(const double*)> phi_;
    std::function<void(const double*, double*)> dphi_;
    std::function<void(const double*, double*)> d2phi_;
};

/// Gamma^c_{ab} = 1/2 G^{cd} (D_a G_{db} + D_b G_{da} - D_d G_{ab}).
void christoffel_from_metric(int m, const double* G, const double* dG, double* Gam);

}  // namespace geoflow
