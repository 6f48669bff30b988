#pragma once

// Quadrature on reference simplices in barycentric coordinates.  Weights sum
// to one; integrals are weight * simplex measure * integrand at the mapped
// points.  The degree-5 rules are the default everywhere (they integrate all
// products appearing in the weighted P1 forms exactly up to the nonlinear
// weight); 3 and 7 exist so that quadrature sensitivity can be probed.

#include <vector>

namespace geoflow {

struct QuadratureRule {
    int dim = 0;       // simplex dimension (1 or 2)
    int degree = 0;    // guaranteed polynomial exactness
    int n_points = 0;
    std::vector<double> bary;     // n_points * (dim+1)
    std::vector<double> weights;  // n_points, sum = 1

    const double* point(int q) const { return bary.data() + (std::size_t)q * (dim + 1); }
};

/// dim in {1,2}, requested exactness degree in {3,5,7}.
const QuadratureRule& quadrature_rule(int dim, int degree);

}  // namespace geoflow
