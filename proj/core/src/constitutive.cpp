#include "magelas/constitutive.hpp"

#include <stdexcept>

namespace magelas {

PointState seeded_state(const Mat2& F, const Vec2& V) {
    PointState s;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) s.F[i][j] = Dual6::variable(F(i, j), 2 * i + j);
    s.V[0] = Dual6::variable(V[0], 4);
    s.V[1] = Dual6::variable(V[1], 5);
    return s;
}

namespace {

Dual6 det_f(const PointState& s) {
    return s.F[0][0] * s.F[1][1] - s.F[0][1] * s.F[1][0];
}

// Plane strain: tr C (in-plane block) = F : F; the out-of-plane stretch is 1.
Dual6 mechanical(const MaterialModel& m, const PointState& s) {
    const Dual6 J = det_f(s);
    const Dual6 trC = square(s.F[0][0]) + square(s.F[0][1]) + square(s.F[1][0]) +
                      square(s.F[1][1]);
    return 0.5 * m.G * (trC - 2.0 - 2.0 * log(J)) + 0.5 * m.Gp * square(J - 1.0);
}

// |h|^2 = H . C^{-1} H with h = F^{-T} H, as a function of the seeds.
Dual6 h_squared(const PointState& s, const Dual6& J) {
    const Dual6 Jinv = inverse(J);
    const Dual6 h0 = (s.F[1][1] * s.V[0] - s.F[1][0] * s.V[1]) * Jinv;
    const Dual6 h1 = (s.F[0][0] * s.V[1] - s.F[0][1] * s.V[0]) * Jinv;
    return square(h0) + square(h1);
}

Dual6 vacuum_coenergy(const PointState& s) {
    const Dual6 J = det_f(s);
    return -0.5 * kMu0 * J * h_squared(s, J);
}

Dual6 matter_coenergy(const MaterialModel& m, const PointState& s) {
    const Dual6 J = det_f(s);
    const Dual6 hh = h_squared(s, J);
    if (!m.saturating) return -0.5 * kMu0 * (1.0 + m.chi) * J * hh;
    // Vacuum part plus a matter part whose field derivative reproduces
    // mu0 ms tanh(chi |h| / ms) along h.
    const double r = m.chi / m.ms;
    return -0.5 * kMu0 * J * hh -
           (kMu0 * m.ms * m.ms / m.chi) * J * log_cosh_sqrt(hh * (r * r));
}

// Field energy per reference volume in terms of the referential flux B:
// J |b|^2 / (2 mu0 (1+chi)) with b = F B / J, i.e. |F B|^2 / (2 mu0 (1+chi) J).
Dual6 flux_energy(double chi, const PointState& s) {
    const Dual6 J = det_f(s);
    const Dual6 z0 = s.F[0][0] * s.V[0] + s.F[0][1] * s.V[1];
    const Dual6 z1 = s.F[1][0] * s.V[0] + s.F[1][1] * s.V[1];
    return (square(z0) + square(z1)) * inverse(J * (2.0 * kMu0 * (1.0 + chi)));
}

}  // namespace

Dual6 evaluate_density(DensityKind kind, const MaterialModel& mat, const PointState& s) {
    switch (kind) {
        case DensityKind::Mechanical: return mechanical(mat, s);
        case DensityKind::MagneticCoenergy: return matter_coenergy(mat, s);
        case DensityKind::VacuumCoenergy: return vacuum_coenergy(s);
        case DensityKind::MagneticEnergy:
            if (mat.saturating)
                throw std::invalid_argument(
                    "flux-potential form supports the linear magnetization law only");
            return flux_energy(mat.chi, s);
        case DensityKind::VacuumEnergy: return flux_energy(0.0, s);
    }
    throw std::invalid_argument("evaluate_density: unknown density kind");
}

DensityDerivatives density_derivatives(DensityKind kind, const MaterialModel& mat,
                                       const Mat2& F, const Vec2& V) {
    const Dual6 psi = evaluate_density(kind, mat, seeded_state(F, V));
    DensityDerivatives d;
    d.value = psi.v;
    d.P << psi.g[0], psi.g[1], psi.g[2], psi.g[3];
    d.Q << psi.g[4], psi.g[5];
    return d;
}

Vec2 spatial_h(const Mat2& F, const Vec2& H) {
    const double J = F.determinant();
    return Vec2((F(1, 1) * H[0] - F(1, 0) * H[1]) / J,
                (F(0, 0) * H[1] - F(0, 1) * H[0]) / J);
}

Vec2 spatial_b(const Mat2& F, const Vec2& B) {
    return (F * B) / F.determinant();
}

Vec2 magnetization(const MaterialModel& mat, const Vec2& h) {
    if (!mat.saturating) return mat.chi * h;
    const double hn = h.norm();
    if (hn == 0.0) return Vec2::Zero();
    return (mat.ms * std::tanh(mat.chi * hn / mat.ms) / hn) * h;
}

Mat2 maxwell_piola(const Mat2& F, const Vec2& H) {
    return density_derivatives(DensityKind::VacuumCoenergy, MaterialModel{}, F, H).P;
}

Mat2 maxwell_cauchy(const Vec2& h) {
    Mat2 s = kMu0 * h * h.transpose();
    s -= 0.5 * kMu0 * h.squaredNorm() * Mat2::Identity();
    return s;
}

}  // namespace magelas
