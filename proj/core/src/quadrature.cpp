#include "magelas/quadrature.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace magelas {

namespace {

// Gauss-Legendre nodes and weights on [0,1], computed by Newton iteration
// on the Legendre recurrence. Accurate to machine precision for the sizes
// used here.
void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 60; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15 && it > 1) break;
        }
        x[i] = 0.5 * (1.0 - t);  // descending t -> ascending x
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
}

QuadratureRule make_triangle_rule(int degree) {
    // Collapsed square: x = u, y = v (1 - u), dA = (1 - u) du dv. A monomial
    // x^p y^q with p + q <= d needs u-degree p + q + 1 <= d + 1 and
    // v-degree q <= d.
    const int nu = (degree + 3) / 2;  // ceil((degree + 2) / 2)
    const int nv = (degree + 2) / 2;  // ceil((degree + 1) / 2)
    std::vector<double> xu, wu, xv, wv;
    gauss_legendre_01(nu, xu, wu);
    gauss_legendre_01(nv, xv, wv);
    QuadratureRule rule;
    rule.degree = degree;
    rule.points.reserve(nu * nv);
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j)
            rule.points.push_back(
                {xu[i], xv[j] * (1.0 - xu[i]), wu[i] * wv[j] * (1.0 - xu[i])});
    return rule;
}

QuadratureRule make_line_rule(int degree) {
    const int n = degree / 2 + 1;  // 2n - 1 >= degree
    std::vector<double> x, w;
    gauss_legendre_01(n, x, w);
    QuadratureRule rule;
    rule.degree = degree;
    rule.points.reserve(n);
    for (int i = 0; i < n; ++i) rule.points.push_back({x[i], 0.0, w[i]});
    return rule;
}

}  // namespace

const QuadratureRule& triangle_rule(int degree) {
    if (degree < 0 || degree > 20)
        throw std::invalid_argument("triangle_rule: degree must be in [0, 20]");
    static std::map<int, QuadratureRule> cache;
    auto it = cache.find(degree);
    if (it == cache.end()) it = cache.emplace(degree, make_triangle_rule(degree)).first;
    return it->second;
}

const QuadratureRule& line_rule(int degree) {
    if (degree < 0 || degree > 41)
        throw std::invalid_argument("line_rule: degree must be in [0, 41]");
    static std::map<int, QuadratureRule> cache;
    auto it = cache.find(degree);
    if (it == cache.end()) it = cache.emplace(degree, make_line_rule(degree)).first;
    return it->second;
}

}  // namespace magelas
