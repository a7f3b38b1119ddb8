#pragma once
// Scheme builders: translate a scheme + formulation selection into concrete
// kernel sets, dof row filters, surface tractions, and Dirichlet data over a
// tagged mesh. The resulting Problem is a passive description consumed by the
// solver; it owns no mutable state.

#include <array>
#include <string>
#include <vector>

#include "magelas/fem.hpp"

namespace magelas {

// How the non-magnetic field energy couples to the deformation:
//   Naive       - fully coupled volume kernels everywhere.
//   MwBoundary  - field-kernel displacement rows dropped, replaced by an
//                 explicit vacuum-stress traction on the non-magnetic union's
//                 boundary.
//   MwOmit      - field-kernel displacement rows dropped only at nodes
//                 interior to the non-magnetic union; interface rows keep the
//                 kernel and transmit the traction variationally.
//   TcBoundary  - auxiliary air elasticity kept, its boundary traction
//                 subtracted explicitly on the air boundary.
//   TcOmit      - auxiliary-kernel displacement rows dropped at air-boundary
//                 nodes (one-way coupling into the air).
//   Staggered   - alternation of a coupled solve with frozen interior air and
//                 an air-displacement smoothing step; reference scheme.
enum class Scheme { Naive, MwBoundary, MwOmit, TcBoundary, TcOmit, Staggered };

// Magnetic unknown: scalar potential (h-based saddle form) or out-of-plane
// flux potential (b-based minimization form).
enum class Formulation { Coenergy, Energy };

std::string to_string(Scheme s);
std::string to_string(Formulation f);
Scheme scheme_from_string(const std::string& s);
Formulation formulation_from_string(const std::string& s);

struct SchemeConfig {
    Formulation formulation = Formulation::Coenergy;
    Scheme scheme = Scheme::Naive;
    // Solid-domain compensation: adds the non-magnetic solid's own stress and
    // body-force kernels once more, scaled by c, with the rows at that
    // region's boundary nodes filtered out. The addition vanishes identically
    // at any solution of the unscaled problem with zero field.
    double compensation_factor_c = 0.0;
    // Pin every displacement dof to zero (pure field solve on the reference
    // geometry).
    bool mechanics_frozen = false;
    // Clamp u = 0 on vertical-symmetry facets whose cells are solid
    // (cantilever root); air keeps the plain roller condition there.
    bool clamp_solid_symmetry = false;
    // Staggered alternation: stop when the interface displacement changes by
    // less than staggered_tol times the domain extent between outer passes.
    double staggered_tol = 1e-8;
    int staggered_max_outer = 50;
};

// Data driving the alternating scheme. Step A solves the coupled system with
// the listed air nodes held at their current values (only a one-element air
// layer next to the solid stays free). Step B re-extends the interface
// displacement into the air by a small-strain elastic smoothing solve (unit
// shear modulus, no physics).
struct StaggeredPlan {
    std::vector<int> frozen_air_nodes;  // u pinned to current values in step A
    std::vector<int> extension_cells;   // air cells of the smoothing solve
    // Per displacement component: nodes held at their current value during
    // the smoothing solve (interface + outer data, symmetry rollers).
    std::array<std::vector<std::uint8_t>, 2> extension_fixed;
    std::vector<int> interface_nodes;  // monitored for outer convergence
    double tol = 1e-8;
    int max_outer = 50;
};

struct Problem {
    TermSet terms;
    std::vector<DirichletSpec> dirichlet;
    bool staggered = false;
    StaggeredPlan plan;  // meaningful only when staggered
};

// Builds kernels, filters, tractions, and boundary conditions for the given
// scheme on a tagged mesh. The material table is consulted only for
// validation (auxiliary stiffness requirements, magnetic-law support).
// Throws ConfigError on unsupported combinations:
//   - Energy formulation with any scheme other than Naive,
//   - Energy formulation with a saturating magnetic law,
//   - Tc schemes with zero auxiliary stiffness,
//   - negative compensation factor.
Problem build_problem(const Mesh& mesh, const SchemeConfig& config,
                      const MaterialTable& materials);

}  // namespace magelas
