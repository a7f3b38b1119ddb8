#pragma once

// Second-order forward-mode dual numbers in a fixed number of directions.
//
// Energy densities are written once against this scalar type; first
// derivatives give stresses / fluxes and second derivatives give consistent
// tangents, so discrete residuals and Jacobians can never drift apart from
// the density they were derived from.

#include <array>
#include <cmath>
#include <cstddef>

namespace magelas {

template <int N>
struct Dual2 {
    static constexpr int n_dirs = N;
    static constexpr int n_hess = N * (N + 1) / 2;

    double v = 0.0;                    // value
    std::array<double, N> g{};         // gradient
    std::array<double, n_hess> h{};    // Hessian, packed upper triangle

    Dual2() = default;
    explicit Dual2(double value) : v(value) {}

    // Packed index of Hessian entry (i,j), i <= j.
    static constexpr int hidx(int i, int j) {
        if (i > j) { const int t = i; i = j; j = t; }
        return i * N - i * (i - 1) / 2 + (j - i);
    }

    double hess(int i, int j) const { return h[hidx(i, j)]; }

    static Dual2 variable(double value, int dir) {
        Dual2 x(value);
        x.g[dir] = 1.0;
        return x;
    }

    Dual2& operator+=(const Dual2& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) g[i] += o.g[i];
        for (int i = 0; i < n_hess; ++i) h[i] += o.h[i];
        return *this;
    }
    Dual2& operator-=(const Dual2& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) g[i] -= o.g[i];
        for (int i = 0; i < n_hess; ++i) h[i] -= o.h[i];
        return *this;
    }
    Dual2& operator*=(const Dual2& o) { *this = *this * o; return *this; }
    Dual2& operator+=(double c) { v += c; return *this; }
    Dual2& operator-=(double c) { v -= c; return *this; }
    Dual2& operator*=(double c) {
        v *= c;
        for (int i = 0; i < N; ++i) g[i] *= c;
        for (int i = 0; i < n_hess; ++i) h[i] *= c;
        return *this;
    }
    Dual2& operator/=(double c) { return (*this) *= (1.0 / c); }

    friend Dual2 operator+(Dual2 a, const Dual2& b) { a += b; return a; }
    friend Dual2 operator-(Dual2 a, const Dual2& b) { a -= b; return a; }
    friend Dual2 operator+(Dual2 a, double c) { a.v += c; return a; }
    friend Dual2 operator+(double c, Dual2 a) { a.v += c; return a; }
    friend Dual2 operator-(Dual2 a, double c) { a.v -= c; return a; }
    friend Dual2 operator-(double c, const Dual2& a) { Dual2 r = -a; r.v += c; return r; }
    friend Dual2 operator*(Dual2 a, double c) { a *= c; return a; }
    friend Dual2 operator*(double c, Dual2 a) { a *= c; return a; }
    friend Dual2 operator/(Dual2 a, double c) { a *= 1.0 / c; return a; }

    friend Dual2 operator-(const Dual2& a) {
        Dual2 r;
        r.v = -a.v;
        for (int i = 0; i < N; ++i) r.g[i] = -a.g[i];
        for (int i = 0; i < n_hess; ++i) r.h[i] = -a.h[i];
        return r;
    }

    friend Dual2 operator*(const Dual2& a, const Dual2& b) {
        Dual2 r;
        r.v = a.v * b.v;
        for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
        int k = 0;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j, ++k)
                r.h[k] = a.h[k] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[k];
        return r;
    }

    friend Dual2 operator/(const Dual2& a, const Dual2& b) { return a * inverse(b); }
    friend Dual2 operator/(double c, const Dual2& b) { return inverse(b) * c; }

    // Composition with a scalar function: r = f(a), given f(a.v), f'(a.v), f''(a.v).
    static Dual2 compose(const Dual2& a, double f, double fp, double fpp) {
        Dual2 r;
        r.v = f;
        for (int i = 0; i < N; ++i) r.g[i] = fp * a.g[i];
        int k = 0;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j, ++k)
                r.h[k] = fp * a.h[k] + fpp * a.g[i] * a.g[j];
        return r;
    }

    friend Dual2 inverse(const Dual2& a) {
        const double iv = 1.0 / a.v;
        return compose(a, iv, -iv * iv, 2.0 * iv * iv * iv);
    }
    friend Dual2 log(const Dual2& a) {
        const double iv = 1.0 / a.v;
        return compose(a, std::log(a.v), iv, -iv * iv);
    }
    friend Dual2 sqrt(const Dual2& a) {
        const double s = std::sqrt(a.v);
        return compose(a, s, 0.5 / s, -0.25 / (s * a.v));
    }
    friend Dual2 square(const Dual2& a) { return compose(a, a.v * a.v, 2.0 * a.v, 2.0); }
};

// log(cosh(x)) evaluated overflow-safely.
inline double log_cosh(double x) {
    const double ax = std::abs(x);
    return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

// f(y) = log(cosh(sqrt(y))) for y >= 0, smooth through y = 0.
//
// Needed because saturating magnetization enters through |h| = sqrt(h.h);
// composing with y = |h|^2 keeps the density C^2 at zero field, where the
// naive sqrt form has an undefined derivative.
inline void log_cosh_sqrt(double y, double& f, double& fp, double& fpp) {
    if (y < 1e-8) {
        // log(cosh(sqrt(y))) = y/2 - y^2/12 + y^3/45 - ...
        f = 0.5 * y - y * y / 12.0;
        fp = 0.5 - y / 6.0 + y * y / 15.0;
        fpp = -1.0 / 6.0 + 2.0 * y / 15.0;
        return;
    }
    const double s = std::sqrt(y);
    const double t = std::tanh(s);
    f = log_cosh(s);
    fp = 0.5 * t / s;                                  // d/dy log cosh sqrt(y)
    const double sech2 = 1.0 - t * t;
    fpp = 0.25 * (sech2 / y - t / (y * s));
}

template <int N>
Dual2<N> log_cosh_sqrt(const Dual2<N>& y) {
    double f, fp, fpp;
    log_cosh_sqrt(y.v, f, fp, fpp);
    return Dual2<N>::compose(y, f, fp, fpp);
}

}  // namespace magelas
