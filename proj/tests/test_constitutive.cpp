#include <doctest.h>

#include <cmath>

#include "magelas/constitutive.hpp"

using namespace magelas;

namespace {

MaterialModel linear_mat() {
    MaterialModel m;
    m.G = 1.0e4;
    m.Gp = 5.0e5;
    m.chi = 4.0;
    return m;
}

MaterialModel saturating_mat() {
    MaterialModel m = linear_mat();
    m.ms = 1.0e5;
    m.saturating = true;
    return m;
}

Mat2 test_F() {
    Mat2 F;
    F << 1.08, 0.05, -0.03, 0.94;
    return F;
}

double value_at(DensityKind kind, const MaterialModel& mat, const Mat2& F,
                const Vec2& V) {
    return evaluate_density(kind, mat, seeded_state(F, V)).v;
}

// Finite-difference validation of all first and second seed derivatives.
void check_derivatives(DensityKind kind, const MaterialModel& mat, const Mat2& F0,
                       const Vec2& V0) {
    const Dual6 psi = evaluate_density(kind, mat, seeded_state(F0, V0));
    const double scale = std::abs(psi.v) + 1.0;

    auto bump = [&](int seed, double h) {
        Mat2 F = F0;
        Vec2 V = V0;
        if (seed < 4) F(seed / 2, seed % 2) += h;
        else V[seed - 4] += h;
        return value_at(kind, mat, F, V);
    };
    auto step = [&](int seed) {
        const double base = seed < 4 ? 1.0 : std::max(1.0, V0.norm());
        return base;
    };

    for (int i = 0; i < 6; ++i) {
        const double h = 1e-6 * step(i);
        const double fd = (bump(i, h) - bump(i, -h)) / (2.0 * h);
        CAPTURE(i);
        CHECK(psi.g[i] == doctest::Approx(fd).epsilon(5e-6).scale(scale));
    }
    auto bump2 = [&](int si, double hi, int sj, double hj) {
        Mat2 F = F0;
        Vec2 V = V0;
        auto apply = [&](int seed, double h) {
            if (seed < 4) F(seed / 2, seed % 2) += h;
            else V[seed - 4] += h;
        };
        apply(si, hi);
        apply(sj, hj);
        return value_at(kind, mat, F, V);
    };
    for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) {
            const double hi = 1e-4 * step(i), hj = 1e-4 * step(j);
            const double fd = (bump2(i, hi, j, hj) - bump2(i, hi, j, -hj) -
                               bump2(i, -hi, j, hj) + bump2(i, -hi, j, -hj)) /
                              (4.0 * hi * hj);
            CAPTURE(i);
            CAPTURE(j);
            // Tangent entries vary over ~10 orders; compare at the value scale.
            CHECK(psi.hess(i, j) ==
                  doctest::Approx(fd).epsilon(2e-4).scale(scale / step(i) / step(j)));
        }
}

}  // namespace

TEST_CASE("elastic energy and stress vanish at the identity") {
    const auto d =
        density_derivatives(DensityKind::Mechanical, linear_mat(), Mat2::Identity(), {0, 0});
    CHECK(d.value == doctest::Approx(0.0).scale(1.0));
    CHECK(d.P.norm() == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("elastic stress linearizes to G (eps + eps^T) + Gp tr(eps) I") {
    const auto m = linear_mat();
    Mat2 eps;
    eps << 3e-8, -5e-8, 7e-8, 2e-8;
    const Mat2 F = Mat2::Identity() + eps;
    const auto d = density_derivatives(DensityKind::Mechanical, m, F, {0, 0});
    const Mat2 expected =
        m.G * (eps + eps.transpose()) + m.Gp * eps.trace() * Mat2::Identity();
    CHECK((d.P - expected).norm() < 1e-6 * expected.norm());
}

TEST_CASE("elastic energy is rotation invariant") {
    const auto m = linear_mat();
    const Mat2 F = test_F();
    const double a = 0.37;
    Mat2 R;
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const double psi = value_at(DensityKind::Mechanical, m, F, {0, 0});
    const double psiR = value_at(DensityKind::Mechanical, m, R * F, {0, 0});
    CHECK(psiR == doctest::Approx(psi).epsilon(1e-12));
}

TEST_CASE("all densities match finite differences of their own value") {
    const Mat2 F = test_F();
    const Vec2 H(2.0e5, -1.2e5);
    check_derivatives(DensityKind::Mechanical, linear_mat(), F, H);
    check_derivatives(DensityKind::VacuumCoenergy, MaterialModel{}, F, H);
    check_derivatives(DensityKind::MagneticCoenergy, linear_mat(), F, H);
    check_derivatives(DensityKind::MagneticCoenergy, saturating_mat(), F, H);
    const Vec2 B(0.4, -0.2);  // flux-valued unknown, Tesla scale
    check_derivatives(DensityKind::MagneticEnergy, linear_mat(), F, B);
    check_derivatives(DensityKind::VacuumEnergy, MaterialModel{}, F, B);
}

TEST_CASE("free-space co-energy at the identity is -mu0 |H|^2 / 2") {
    const Vec2 H(3.0e5, 1.0e5);
    const double psi = value_at(DensityKind::VacuumCoenergy, MaterialModel{},
                                Mat2::Identity(), H);
    CHECK(psi == doctest::Approx(-0.5 * kMu0 * H.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("Maxwell stress: Piola and Cauchy forms agree through sigma = J^-1 P F^T") {
    const Mat2 F = test_F();
    const Vec2 H(2.5e5, -0.7e5);
    const Mat2 P = maxwell_piola(F, H);
    const Mat2 sigma = P * F.transpose() / F.determinant();
    const Mat2 expected = maxwell_cauchy(spatial_h(F, H));
    CHECK((sigma - expected).norm() < 1e-12 * expected.norm());
    // The free-space Maxwell stress is trace-free in 2D.
    CHECK(std::abs(expected.trace()) < 1e-12 * expected.norm());
}

TEST_CASE("potential and flux descriptions are Legendre duals at any state") {
    const Mat2 F = test_F();
    const Vec2 H(1.8e5, 0.9e5);
    const auto m = linear_mat();
    const auto co = density_derivatives(DensityKind::MagneticCoenergy, m, F, H);
    const Vec2 B = -co.Q;  // conjugate referential flux
    const auto en = density_derivatives(DensityKind::MagneticEnergy, m, F, B);
    CHECK((en.Q - H).norm() < 1e-11 * H.norm());
    CHECK(en.value == doctest::Approx(B.dot(H) + co.value).epsilon(1e-12));
    // The same holds for free space.
    const auto cov = density_derivatives(DensityKind::VacuumCoenergy, m, F, H);
    const Vec2 Bv = -cov.Q;
    const auto env = density_derivatives(DensityKind::VacuumEnergy, m, F, Bv);
    CHECK((env.Q - H).norm() < 1e-11 * H.norm());
    CHECK(env.value == doctest::Approx(Bv.dot(H) + cov.value).epsilon(1e-12));
}

TEST_CASE("conjugate flux reproduces b = mu0 (1+chi) h for the linear law") {
    const Mat2 F = test_F();
    const Vec2 H(1.5e5, -2.0e5);
    const auto m = linear_mat();
    const auto co = density_derivatives(DensityKind::MagneticCoenergy, m, F, H);
    const Vec2 b = spatial_b(F, -co.Q);
    const Vec2 h = spatial_h(F, H);
    CHECK((b - kMu0 * (1.0 + m.chi) * h).norm() < 1e-12 * b.norm());
}

TEST_CASE("saturating magnetization: linear at small fields, bounded by ms") {
    const auto m = saturating_mat();
    const Vec2 h_small(5.0, -3.0);
    CHECK((magnetization(m, h_small) - m.chi * h_small).norm() <
          1e-6 * (m.chi * h_small).norm());
    const Vec2 h_large(4.0e6, 1.0e6);
    const Vec2 mag = magnetization(m, h_large);
    CHECK(mag.norm() <= m.ms * (1.0 + 1e-12));
    CHECK(mag.norm() > 0.99 * m.ms);
    // Direction follows h.
    CHECK(mag.normalized().dot(h_large.normalized()) == doctest::Approx(1.0));

    // The saturating co-energy reduces to the linear one at small fields.
    const Mat2 F = test_F();
    const double lin = value_at(DensityKind::MagneticCoenergy, linear_mat(), F, h_small);
    const double sat = value_at(DensityKind::MagneticCoenergy, m, F, h_small);
    CHECK(sat == doctest::Approx(lin).epsilon(1e-6));
}

TEST_CASE("flux-potential densities reject the saturating law") {
    const PointState s = seeded_state(Mat2::Identity(), {0.1, 0.2});
    CHECK_THROWS_AS(evaluate_density(DensityKind::MagneticEnergy, saturating_mat(), s),
                    std::invalid_argument);
}
