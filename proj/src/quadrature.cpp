#include "geoflow/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>

#include "geoflow/core.hpp"

namespace geoflow {

namespace {

QuadratureRule gauss_segment(int npts, int degree) {
    QuadratureRule r;
    r.dim = 1;
    r.degree = degree;
    r.n_points = npts;
    std::vector<double> t, w;  // on [0,1]
    switch (npts) {
        case 2: {
            const double s = 0.5 / std::sqrt(3.0);
            t = {0.5 - s, 0.5 + s};
            w = {0.5, 0.5};
            break;
        }
        case 3: {
            const double s = 0.5 * std::sqrt(3.0 / 5.0);
            t = {0.5 - s, 0.5, 0.5 + s};
            w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
            break;
        }
        case 4: {
            const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
            const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
            const double wa = (18.0 + std::sqrt(30.0)) / 72.0;
            const double wb = (18.0 - std::sqrt(30.0)) / 72.0;
            t = {0.5 * (1 - b), 0.5 * (1 - a), 0.5 * (1 + a), 0.5 * (1 + b)};
            w = {wb, wa, wa, wb};
            break;
        }
        case 5: {
            const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
            const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
            const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 1800.0;
            const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 1800.0;
            t = {0.5 * (1 - b), 0.5 * (1 - a), 0.5, 0.5 * (1 + a), 0.5 * (1 + b)};
            w = {wb, wa, 128.0 / 450.0, wa, wb};
            break;
        }
        default:
            throw NumericalError("quadrature: unsupported Gauss point count");
    }
    for (int q = 0; q < npts; ++q) {
        r.bary.insert(r.bary.end(), {1.0 - t[q], t[q]});
        r.weights.push_back(w[q]);
    }
    return r;
}

void push_orbit3(QuadratureRule& r, double a, double b, double c, double w) {
    // all distinct cyclic/symmetric placements of the multiset {a,b,c}
    std::vector<std::array<double, 3>> pts = {{a, b, c}, {b, c, a}, {c, a, b},
                                              {a, c, b}, {c, b, a}, {b, a, c}};
    std::vector<std::array<double, 3>> uniq;
    for (auto& p : pts) {
        bool seen = false;
        for (auto& u : uniq)
            if (std::fabs(u[0] - p[0]) + std::fabs(u[1] - p[1]) + std::fabs(u[2] - p[2]) < 1e-14)
                seen = true;
        if (!seen) uniq.push_back(p);
    }
    for (auto& p : uniq) {
        r.bary.insert(r.bary.end(), p.begin(), p.end());
        r.weights.push_back(w);
        ++r.n_points;
    }
}

// Strang 6-point rule, exact through degree 4 (serves the "3" setting with
// positive weights).
QuadratureRule triangle_low() {
    QuadratureRule r;
    r.dim = 2;
    r.degree = 3;
    push_orbit3(r, 0.816847572980459, 0.091576213509771, 0.091576213509771,
                0.109951743655322);
    push_orbit3(r, 0.108103018168070, 0.445948490915965, 0.445948490915965,
                0.223381589678011);
    return r;
}

// Classical 7-point degree-5 rule; every constant is closed form in sqrt(15).
QuadratureRule triangle_deg5() {
    QuadratureRule r;
    r.dim = 2;
    r.degree = 5;
    const double s15 = std::sqrt(15.0);
    push_orbit3(r, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0);
    const double a1 = (6.0 - s15) / 21.0;
    const double a2 = (6.0 + s15) / 21.0;
    push_orbit3(r, 1.0 - 2.0 * a1, a1, a1, (155.0 - s15) / 1200.0);
    push_orbit3(r, 1.0 - 2.0 * a2, a2, a2, (155.0 + s15) / 1200.0);
    return r;
}

// Degree-7 rule as a collapsed Gauss product (Duffy map x=u, y=v(1-u)):
// 5-point Gauss in u absorbs the extra (1-u) Jacobian degree, 4-point in v.
// 20 points, all weights positive.
QuadratureRule triangle_deg7() {
    const QuadratureRule gu = gauss_segment(5, 9);
    const QuadratureRule gv = gauss_segment(4, 7);
    QuadratureRule r;
    r.dim = 2;
    r.degree = 7;
    for (int i = 0; i < gu.n_points; ++i)
        for (int j = 0; j < gv.n_points; ++j) {
            const double u = gu.point(i)[1], v = gv.point(j)[1];
            const double x = u, y = v * (1.0 - u);
            r.bary.insert(r.bary.end(), {1.0 - x - y, x, y});
            r.weights.push_back(2.0 * gu.weights[i] * gv.weights[j] * (1.0 - u));
            ++r.n_points;
        }
    return r;
}

}  // namespace

const QuadratureRule& quadrature_rule(int dim, int degree) {
    static const std::map<std::pair<int, int>, QuadratureRule> rules = [] {
        std::map<std::pair<int, int>, QuadratureRule> m;
        m[{1, 3}] = gauss_segment(2, 3);
        m[{1, 5}] = gauss_segment(3, 5);
        m[{1, 7}] = gauss_segment(4, 7);
        m[{2, 3}] = triangle_low();
        m[{2, 5}] = triangle_deg5();
        m[{2, 7}] = triangle_deg7();
        return m;
    }();
    const auto it = rules.find({dim, degree});
    if (it == rules.end())
        throw NumericalError("quadrature: no rule for dim " + std::to_string(dim) +
                             " degree " + std::to_string(degree));
    return it->second;
}

}  // namespace geoflow
