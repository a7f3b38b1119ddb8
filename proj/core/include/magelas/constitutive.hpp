#pragma once

// Material models and energy densities for plane-strain finite
// magneto-elasticity, written once against second-order dual numbers.
//
// Every density is an energy per unit *reference* volume, evaluated from the
// in-plane deformation gradient F (out-of-plane stretch 1) and one
// referential magnetic unknown V:
//   - scalar-potential form: V = H = -Grad(phi), spatial field h = F^{-T} H
//   - vector-potential form: V = B (components of the referential flux
//     derived from the out-of-plane potential), spatial flux b = F B / J
//
// Seed layout of the 6 dual directions: F00, F01, F10, F11, V0, V1. First
// derivatives give the first Piola-Kirchhoff stress (directions 0..3) and
// the conjugate flux (directions 4..5); second derivatives the consistent
// tangent. Residuals and Jacobians derived from these can never drift
// apart from the stored energy.

#include <cmath>

#include <Eigen/Dense>

#include "magelas/ad.hpp"

namespace magelas {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Vacuum permeability [T m / A].
inline constexpr double kMu0 = 4.0e-7 * M_PI;

// Per-region material description. chi is the magnetic susceptibility;
// ms > 0 with saturating=true selects the saturating magnetization law
// |m| = ms tanh(chi |h| / ms), otherwise the law is m = chi h.
struct MaterialModel {
    double G = 0.0;    // shear modulus [Pa]
    double Gp = 0.0;   // volumetric modulus [Pa]
    double chi = 0.0;  // susceptibility [-]
    double ms = 0.0;   // saturation magnetization [A/m]
    bool saturating = false;
    double rho0 = 0.0;  // reference mass density [kg/m^3]
};

enum class DensityKind {
    Mechanical,       // compressible neo-Hookean elastic energy
    MagneticCoenergy, // magnetizable matter, total field co-energy (vacuum + matter)
    VacuumCoenergy,   // pure free-space field co-energy
    MagneticEnergy,   // magnetizable matter, field energy in terms of B (linear law only)
    VacuumEnergy,     // free-space field energy in terms of B
};

using Dual6 = Dual2<6>;

// Unknown gradients at a quadrature point with unit seeds attached.
struct PointState {
    Dual6 F[2][2];
    Dual6 V[2];
};

PointState seeded_state(const Mat2& F, const Vec2& V);

Dual6 evaluate_density(DensityKind kind, const MaterialModel& mat, const PointState& s);

// Value and first derivatives of a density at a plain-double state:
// P = dPsi/dF, Q = dPsi/dV.
struct DensityDerivatives {
    double value;
    Mat2 P;
    Vec2 Q;
};
DensityDerivatives density_derivatives(DensityKind kind, const MaterialModel& mat,
                                       const Mat2& F, const Vec2& V);

// Pushforwards of the referential magnetic fields.
Vec2 spatial_h(const Mat2& F, const Vec2& H);  // h = F^{-T} H
Vec2 spatial_b(const Mat2& F, const Vec2& B);  // b = F B / J

// Magnetization as a function of the spatial field h.
Vec2 magnetization(const MaterialModel& mat, const Vec2& h);

// Free-space Maxwell stress: referential (first Piola-Kirchhoff) and
// spatial (Cauchy) forms. They satisfy sigma = J^{-1} P F^T.
Mat2 maxwell_piola(const Mat2& F, const Vec2& H);
Mat2 maxwell_cauchy(const Vec2& h);

}  // namespace magelas
