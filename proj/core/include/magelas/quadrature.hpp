#pragma once

// Quadrature rules on the reference triangle {(x,y) : x,y >= 0, x+y <= 1}
// and the reference segment [0,1].
//
// Rules are built from Gauss-Legendre nodes computed to machine precision
// at first use (triangle rules through a collapsed-square construction), so
// all weights are strictly positive and every point lies inside the
// reference element. A request for polynomial degree d returns a cached
// rule exact for at least that degree. Triangles support degrees 0..20,
// segments 0..41.

#include <vector>

namespace magelas {

struct QuadraturePoint {
    double x, y;   // reference coordinates (y unused for line rules)
    double w;      // weight; triangle weights sum to 1/2, line weights to 1
};

struct QuadratureRule {
    int degree = 0;  // polynomial degree integrated exactly
    std::vector<QuadraturePoint> points;
};

// Throws std::invalid_argument when degree is out of the supported range.
const QuadratureRule& triangle_rule(int degree);
const QuadratureRule& line_rule(int degree);

}  // namespace magelas
