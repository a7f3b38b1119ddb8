#pragma once

// Mixed quadratic finite-element space (vector displacement + one scalar
// magnetic potential on the same P2 nodes), region-set node classification,
// Dirichlet handling, and term-based assembly of residual and Jacobian.
//
// State vector layout for a mesh with N nodes (3N dofs total):
//   dof 2*n + c     displacement component c of node n
//   dof 2*N + n     scalar magnetic unknown at node n
// The scalar unknown is the magnetic potential phi (field form, H = -Grad)
// or the out-of-plane vector potential component a_z (flux form,
// B = (d a_z / dY, -d a_z / dX)), selected per term set.

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "magelas/constitutive.hpp"
#include "magelas/mesh.hpp"

namespace magelas {

struct MixedSpace {
    explicit MixedSpace(const Mesh& mesh) : n_nodes(mesh.n_nodes()) {}
    int n_nodes = 0;

    int n_dofs() const { return 3 * n_nodes; }
    int u_dof(int node, int comp) const { return 2 * node + comp; }
    int p_dof(int node) const { return 2 * n_nodes + node; }
    bool is_u_dof(int dof) const { return dof < 2 * n_nodes; }
    int dof_node(int dof) const { return dof < 2 * n_nodes ? dof / 2 : dof - 2 * n_nodes; }

    // 18 dofs of one cell: 12 displacement (node-major) then 6 scalar.
    std::array<int, 18> cell_dofs(const Mesh& mesh, int cell) const;
};

// Region-set membership and boundary classification of nodes. A node is
// "on the boundary" of the set when it lies on an edge between a set cell
// and either a cell outside the set or the mesh boundary. Symmetry-tagged
// boundary edges do not count: they are interior in the unfolded domain.
struct RegionSetPartition {
    std::vector<char> node_in_set;
    std::vector<char> node_on_boundary;
};
RegionSetPartition classify_nodes(const Mesh& mesh, const std::array<bool, 3>& regions);

// Facets bounding a region set: interface facets with exactly one side in
// the set plus outer-boundary facets of set cells; symmetry facets excluded.
// Facets must be anchored on the in-set side (throws MeshError otherwise) so
// surface kernels can evaluate traces there with outward normals.
std::vector<int> region_set_boundary_facets(const Mesh& mesh,
                                            const std::array<bool, 3>& regions);

// --- materials ---------------------------------------------------------------

struct MaterialTable {
    MaterialModel by_region[3];  // indexed by RegionTag
    MaterialModel aux_air;       // auxiliary mesh-motion stiffness for air

    const MaterialModel& material(RegionTag r) const {
        return by_region[static_cast<int>(r)];
    }
};

// --- loading -----------------------------------------------------------------

// Current values of the external loads (continuation state).
struct LoadState {
    Vec2 b_inf = Vec2::Zero();    // far-field flux density [T]
    Vec2 gravity = Vec2::Zero();  // gravitational acceleration [m/s^2]
};

// Dirichlet value = constant + coeff_bx * b_inf.x + coeff_by * b_inf.y, so
// flux-potential boundary data can follow the load ramp.
struct DirichletSpec {
    int dof = -1;
    double constant = 0.0;
    double coeff_bx = 0.0;
    double coeff_by = 0.0;

    double value(const LoadState& load) const {
        return constant + coeff_bx * load.b_inf.x() + coeff_by * load.b_inf.y();
    }
};

// --- terms -------------------------------------------------------------------

enum class MagneticUnknown { PotentialH, FluxB };

using RegionSet = std::array<bool, 3>;  // indexed by RegionTag

// Integral of an energy density over a set of regions. When zero_u_rows is
// non-empty (size n_nodes), displacement rows of flagged nodes receive no
// contribution from this term (residual and Jacobian alike); columns are
// unaffected. scale multiplies the density.
struct VolumeTerm {
    DensityKind density = DensityKind::Mechanical;
    RegionSet regions{};
    bool use_aux_material = false;
    double scale = 1.0;
    std::vector<char> zero_u_rows;
};

// Dead load rho0 * g . u over a set of regions, following the same row
// policy and scaling as a volume term so auxiliary copies of a region's
// mechanics can carry their loads along.
struct DeadLoadTerm {
    RegionSet regions{};
    double scale = 1.0;
    std::vector<char> zero_u_rows;
};

// Natural boundary condition of the field form on listed facets:
// flux continuity with the far field, Pi -= int (b_inf . N) phi dA.
struct FluxBoundaryTerm {
    std::vector<int> facets;  // indices into mesh.facets
};

// Non-variational surface traction on listed facets, evaluated from the
// anchor cell's trace: residual r[u] += sign * int (dPsi/dF . N) . du dA
// with N the outward referential normal of the anchor cell. MaxwellVacuum
// differentiates the free-space field co-energy; AuxMechanical the
// auxiliary elastic energy (for cancelling auxiliary tractions).
struct TractionBoundaryTerm {
    enum class Kind { MaxwellVacuum, AuxMechanical };
    Kind kind = Kind::MaxwellVacuum;
    double sign = 1.0;
    std::vector<int> facets;  // indices into mesh.facets
};

struct TermSet {
    MagneticUnknown unknown = MagneticUnknown::PotentialH;
    std::vector<VolumeTerm> volume;
    std::vector<DeadLoadTerm> loads;
    std::vector<FluxBoundaryTerm> flux_bcs;
    std::vector<TractionBoundaryTerm> tractions;
};

// --- assembly ----------------------------------------------------------------

// Assembles the residual, the Jacobian (as triplets, cleared first), and the
// total potential of the variational terms at the given state. Row-filtered
// and traction terms contribute consistently to residual and Jacobian but
// have no potential; `energy` sums only the variational contributions.
// Pass nullptr for outputs that are not needed.
void assemble_system(const Mesh& mesh, const MixedSpace& space,
                     const MaterialTable& materials, const TermSet& terms,
                     const LoadState& load, const Eigen::VectorXd& state,
                     Eigen::VectorXd* residual,
                     std::vector<Eigen::Triplet<double>>* jacobian,
                     double* energy = nullptr);

// Overwrites constrained entries of the state with their prescribed values.
void apply_dirichlet(const std::vector<DirichletSpec>& bcs, const LoadState& load,
                     Eigen::VectorXd& state);

}  // namespace magelas
