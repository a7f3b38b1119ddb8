#include "magelas/fem.hpp"

#include <cmath>
#include <limits>

#include "magelas/quadrature.hpp"
#include "magelas/shape.hpp"

namespace magelas {

namespace {

constexpr int kVolumeDegree = 6;
constexpr int kSurfaceDegree = 8;

}  // namespace

std::array<int, 18> MixedSpace::cell_dofs(const Mesh& mesh, int cell) const {
    std::array<int, 18> dofs;
    const auto& c = mesh.cells[cell];
    for (int n = 0; n < 6; ++n) {
        dofs[2 * n] = u_dof(c[n], 0);
        dofs[2 * n + 1] = u_dof(c[n], 1);
        dofs[12 + n] = p_dof(c[n]);
    }
    return dofs;
}

RegionSetPartition classify_nodes(const Mesh& mesh, const std::array<bool, 3>& regions) {
    RegionSetPartition part;
    part.node_in_set.assign(mesh.n_nodes(), 0);
    part.node_on_boundary.assign(mesh.n_nodes(), 0);

    auto in_set = [&](int cell) { return regions[static_cast<int>(mesh.region[cell])]; };

    // Facet tags by encoded (cell, local edge), both sides of interior facets.
    std::vector<FacetTag> tag(3 * mesh.n_cells(), FacetTag::Outer);
    std::vector<char> tagged(3 * mesh.n_cells(), 0);
    for (const auto& f : mesh.facets) {
        tag[3 * f.cell + f.local_edge] = f.tag;
        tagged[3 * f.cell + f.local_edge] = 1;
        const int nb = mesh.neighbor(f.cell, f.local_edge);
        if (nb >= 0) {
            for (int e = 0; e < 3; ++e) {
                if (mesh.cells[nb][3 + e] == mesh.facet_mid(f)) {
                    tag[3 * nb + e] = f.tag;
                    tagged[3 * nb + e] = 1;
                }
            }
        }
    }

    for (int c = 0; c < mesh.n_cells(); ++c) {
        if (!in_set(c)) continue;
        for (const int n : mesh.cells[c]) part.node_in_set[n] = 1;
        for (int e = 0; e < 3; ++e) {
            const int nb = mesh.neighbor(c, e);
            if (nb >= 0 && in_set(nb)) continue;  // interior to the set
            if (nb < 0) {
                // Mesh boundary: symmetry lines are interior in the unfolded
                // domain; everything else bounds the set.
                const FacetTag t = tagged[3 * c + e] ? tag[3 * c + e] : FacetTag::Outer;
                if (t == FacetTag::SymmetryX || t == FacetTag::SymmetryY) continue;
            }
            part.node_on_boundary[mesh.cells[c][e]] = 1;
            part.node_on_boundary[mesh.cells[c][(e + 1) % 3]] = 1;
            part.node_on_boundary[mesh.cells[c][3 + e]] = 1;
        }
    }
    return part;
}

std::vector<int> region_set_boundary_facets(const Mesh& mesh,
                                            const std::array<bool, 3>& regions) {
    auto in_set = [&](int cell) { return regions[static_cast<int>(mesh.region[cell])]; };
    std::vector<int> out;
    for (int fi = 0; fi < static_cast<int>(mesh.facets.size()); ++fi) {
        const Facet& f = mesh.facets[fi];
        if (f.tag == FacetTag::SymmetryX || f.tag == FacetTag::SymmetryY) continue;
        const int nb = mesh.neighbor(f.cell, f.local_edge);
        const bool anchor_in = in_set(f.cell);
        const bool other_in = nb >= 0 && in_set(nb);
        if (!anchor_in && !other_in) continue;
        if (anchor_in && other_in) continue;  // interior to the set
        if (!anchor_in)
            throw MeshError(
                "region-set boundary facet is anchored on the wrong side for "
                "surface kernels");
        out.push_back(fi);
    }
    return out;
}

void apply_dirichlet(const std::vector<DirichletSpec>& bcs, const LoadState& load,
                     Eigen::VectorXd& state) {
    for (const auto& bc : bcs) state[bc.dof] = bc.value(load);
}

namespace {

// Per-dof sparse linearization: each of the 18 cell dofs feeds exactly two
// of the six density seeds (F00,F01,F10,F11,V0,V1).
struct DofSeeds {
    int s0, s1;
    double c0, c1;
};

struct CellPointData {
    double w = 0.0;          // quadrature weight * detJ
    double N[6];             // shape values
    double dN[6][2];         // material gradients
    Mat2 F = Mat2::Identity();
    Vec2 V = Vec2::Zero();
    std::array<DofSeeds, 18> seeds;
};

// Evaluate shapes, state gradients, and per-dof seed coefficients at one
// reference point of a cell.
CellPointData cell_point(const Mesh& mesh, int cell, double xi, double eta,
                         MagneticUnknown unknown, const double* ue, const double* pe) {
    CellPointData d;
    double dNr[6][2];
    p2_shape(xi, eta, d.N, dNr);
    Mat2 Jg = Mat2::Zero();
    const auto& cn = mesh.cells[cell];
    for (int n = 0; n < 6; ++n) {
        const Vec2& x = mesh.nodes[cn[n]];
        Jg(0, 0) += x.x() * dNr[n][0];
        Jg(0, 1) += x.x() * dNr[n][1];
        Jg(1, 0) += x.y() * dNr[n][0];
        Jg(1, 1) += x.y() * dNr[n][1];
    }
    const double detJ = Jg.determinant();
    d.w = detJ;  // caller multiplies by the quadrature weight
    const Mat2 JinvT = Jg.inverse().transpose();
    for (int n = 0; n < 6; ++n) {
        d.dN[n][0] = JinvT(0, 0) * dNr[n][0] + JinvT(0, 1) * dNr[n][1];
        d.dN[n][1] = JinvT(1, 0) * dNr[n][0] + JinvT(1, 1) * dNr[n][1];
    }

    Mat2 gradu = Mat2::Zero();
    Vec2 gradp = Vec2::Zero();
    for (int n = 0; n < 6; ++n) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) gradu(i, j) += ue[2 * n + i] * d.dN[n][j];
        gradp[0] += pe[n] * d.dN[n][0];
        gradp[1] += pe[n] * d.dN[n][1];
    }
    d.F = Mat2::Identity() + gradu;
    d.V = unknown == MagneticUnknown::PotentialH ? Vec2(-gradp)
                                                 : Vec2(gradp[1], -gradp[0]);

    for (int n = 0; n < 6; ++n) {
        for (int c = 0; c < 2; ++c)  // F_{c0}, F_{c1} seeds
            d.seeds[2 * n + c] = {2 * c, 2 * c + 1, d.dN[n][0], d.dN[n][1]};
        if (unknown == MagneticUnknown::PotentialH)
            d.seeds[12 + n] = {4, 5, -d.dN[n][0], -d.dN[n][1]};
        else
            d.seeds[12 + n] = {4, 5, d.dN[n][1], -d.dN[n][0]};
    }
    return d;
}

// Reference point on local edge e at edge parameter t in [0,1].
void edge_ref_point(int local_edge, double t, double* xi, double* eta) {
    switch (local_edge) {
        case 0: *xi = t; *eta = 0.0; return;
        case 1: *xi = 1.0 - t; *eta = t; return;
        default: *xi = 0.0; *eta = 1.0 - t; return;
    }
}

struct Accumulator {
    const MixedSpace& space;
    Eigen::VectorXd* residual;
    std::vector<Eigen::Triplet<double>>* jacobian;
    double* energy;

    // Scatter one quadrature point of one term given the evaluated density.
    // `keep_row` masks rows (nullptr keeps all); columns are never masked.
    void scatter(const std::array<int, 18>& dofs, const CellPointData& pt, double w,
                 const Dual6& psi, const std::vector<char>* zero_mask,
                 bool variational) {
        if (energy && variational) *energy += w * psi.v;
        for (int a = 0; a < 18; ++a) {
            if (zero_mask && a < 12 && (*zero_mask)[space.dof_node(dofs[a])]) continue;
            const auto& sa = pt.seeds[a];
            if (residual)
                (*residual)[dofs[a]] +=
                    w * (sa.c0 * psi.g[sa.s0] + sa.c1 * psi.g[sa.s1]);
            if (jacobian) {
                for (int b = 0; b < 18; ++b) {
                    const auto& sb = pt.seeds[b];
                    const double k =
                        sa.c0 * (sb.c0 * psi.hess(sa.s0, sb.s0) +
                                 sb.c1 * psi.hess(sa.s0, sb.s1)) +
                        sa.c1 * (sb.c0 * psi.hess(sa.s1, sb.s0) +
                                 sb.c1 * psi.hess(sa.s1, sb.s1));
                    if (k != 0.0) jacobian->emplace_back(dofs[a], dofs[b], w * k);
                }
            }
        }
    }
};

}  // namespace

void assemble_system(const Mesh& mesh, const MixedSpace& space,
                     const MaterialTable& materials, const TermSet& terms,
                     const LoadState& load, const Eigen::VectorXd& state,
                     Eigen::VectorXd* residual,
                     std::vector<Eigen::Triplet<double>>* jacobian, double* energy) {
    if (residual) residual->setZero(space.n_dofs());
    if (jacobian) jacobian->clear();
    if (energy) *energy = 0.0;
    Accumulator acc{space, residual, jacobian, energy};

    const auto& vrule = triangle_rule(kVolumeDegree);
    const auto& srule = line_rule(kSurfaceDegree);

    // Gather buffers reused across cells.
    double ue[12], pe[6];
    auto gather = [&](int cell, std::array<int, 18>& dofs) {
        dofs = space.cell_dofs(mesh, cell);
        for (int i = 0; i < 12; ++i) ue[i] = state[dofs[i]];
        for (int i = 0; i < 6; ++i) pe[i] = state[dofs[12 + i]];
    };

    std::array<int, 18> dofs;
    bool admissible = true;
    for (const auto& term : terms.volume) {
        const auto* mask = term.zero_u_rows.empty() ? nullptr : &term.zero_u_rows;
        const bool variational = mask == nullptr;
        for (int c = 0; c < mesh.n_cells() && admissible; ++c) {
            if (!term.regions[static_cast<int>(mesh.region[c])]) continue;
            const MaterialModel& mat = term.use_aux_material
                                           ? materials.aux_air
                                           : materials.material(mesh.region[c]);
            gather(c, dofs);
            // Every density presumes an orientation-preserving deformation;
            // the smooth extension of log(det F) past zero has finite
            // derivatives, so without this guard Newton iterates can cross
            // the pole into inverted configurations undetected. The interior
            // quadrature points alone can all see det F > 0 on a cell whose
            // corners have folded over, so the nodal points are checked too.
            static constexpr double kNodalPts[6][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0},
                                                       {0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}};
            for (const auto& np : kNodalPts) {
                const CellPointData pt =
                    cell_point(mesh, c, np[0], np[1], terms.unknown, ue, pe);
                if (!(pt.F.determinant() > 0.0)) {
                    admissible = false;
                    break;
                }
            }
            if (!admissible) break;
            for (const auto& qp : vrule.points) {
                const CellPointData pt =
                    cell_point(mesh, c, qp.x, qp.y, terms.unknown, ue, pe);
                if (!(pt.F.determinant() > 0.0)) {
                    admissible = false;
                    break;
                }
                const Dual6 psi =
                    evaluate_density(term.density, mat, seeded_state(pt.F, pt.V));
                acc.scatter(dofs, pt, qp.w * pt.w * term.scale, psi, mask, variational);
            }
        }
        if (!admissible) break;
    }
    if (!admissible) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (residual) residual->setConstant(space.n_dofs(), nan);
        if (jacobian) jacobian->clear();
        if (energy) *energy = nan;
        return;
    }

    for (const auto& term : terms.loads) {
        const auto* mask = term.zero_u_rows.empty() ? nullptr : &term.zero_u_rows;
        for (int c = 0; c < mesh.n_cells(); ++c) {
            if (!term.regions[static_cast<int>(mesh.region[c])]) continue;
            const double rho = materials.material(mesh.region[c]).rho0;
            if (rho == 0.0) continue;
            gather(c, dofs);
            for (const auto& qp : vrule.points) {
                double N[6], dNr[6][2];
                p2_shape(qp.x, qp.y, N, dNr);
                const double detJ = mesh.geometry_at(c, qp.x, qp.y);
                const double w = qp.w * detJ * term.scale * rho;
                double ux = 0.0, uy = 0.0;
                for (int n = 0; n < 6; ++n) {
                    ux += ue[2 * n] * N[n];
                    uy += ue[2 * n + 1] * N[n];
                }
                if (energy) *energy -= w * (load.gravity.x() * ux + load.gravity.y() * uy);
                if (!residual) continue;
                for (int n = 0; n < 6; ++n) {
                    if (mask && (*mask)[mesh.cells[c][n]]) continue;
                    (*residual)[dofs[2 * n]] -= w * load.gravity.x() * N[n];
                    (*residual)[dofs[2 * n + 1]] -= w * load.gravity.y() * N[n];
                }
            }
        }
    }

    for (const auto& term : terms.flux_bcs) {
        for (const int fi : term.facets) {
            const Facet& f = mesh.facets[fi];
            const auto corners = mesh.facet_corners(f);
            const int edge_nodes[3] = {corners[0], mesh.facet_mid(f), corners[1]};
            for (const auto& qp : srule.points) {
                double N1[3], dN1[3];
                p2_line_shape(qp.x, N1, dN1);
                Vec2 T = Vec2::Zero();
                double pval = 0.0;
                for (int k = 0; k < 3; ++k) {
                    T += dN1[k] * mesh.nodes[edge_nodes[k]];
                    pval += N1[k] * state[space.p_dof(edge_nodes[k])];
                }
                const Vec2 nor(T.y(), -T.x());  // outward * |T|
                const double bn = load.b_inf.dot(nor);
                if (energy) *energy -= qp.w * bn * pval;
                if (!residual) continue;
                for (int k = 0; k < 3; ++k)
                    (*residual)[space.p_dof(edge_nodes[k])] -= qp.w * bn * N1[k];
            }
        }
    }

    for (const auto& term : terms.tractions) {
        const DensityKind kind = term.kind == TractionBoundaryTerm::Kind::MaxwellVacuum
                                     ? DensityKind::VacuumCoenergy
                                     : DensityKind::Mechanical;
        for (const int fi : term.facets) {
            const Facet& f = mesh.facets[fi];
            gather(f.cell, dofs);
            const MaterialModel& mat = term.kind == TractionBoundaryTerm::Kind::MaxwellVacuum
                                           ? materials.material(mesh.region[f.cell])
                                           : materials.aux_air;
            const auto corners = mesh.facet_corners(f);
            const int edge_nodes[3] = {corners[0], mesh.facet_mid(f), corners[1]};
            for (const auto& qp : srule.points) {
                double N1[3], dN1[3];
                p2_line_shape(qp.x, N1, dN1);
                Vec2 T = Vec2::Zero();
                for (int k = 0; k < 3; ++k) T += dN1[k] * mesh.nodes[edge_nodes[k]];
                const Vec2 nor(T.y(), -T.x());  // outward of the anchor cell, * |T|

                double xi, eta;
                edge_ref_point(f.local_edge, qp.x, &xi, &eta);
                const CellPointData pt =
                    cell_point(mesh, f.cell, xi, eta, terms.unknown, ue, pe);
                const Dual6 psi = evaluate_density(kind, mat, seeded_state(pt.F, pt.V));

                // r[u(n,c)] += sign w N_n (P . nor)_c, linearized in all dofs.
                const double w = qp.w * term.sign;
                for (int n = 0; n < 6; ++n) {
                    for (int c = 0; c < 2; ++c) {
                        const int row = dofs[2 * n + c];
                        const double tc =
                            psi.g[2 * c] * nor[0] + psi.g[2 * c + 1] * nor[1];
                        if (residual) (*residual)[row] += w * pt.N[n] * tc;
                        if (!jacobian) continue;
                        for (int b = 0; b < 18; ++b) {
                            const auto& sb = pt.seeds[b];
                            const double dtc =
                                nor[0] * (sb.c0 * psi.hess(2 * c, sb.s0) +
                                          sb.c1 * psi.hess(2 * c, sb.s1)) +
                                nor[1] * (sb.c0 * psi.hess(2 * c + 1, sb.s0) +
                                          sb.c1 * psi.hess(2 * c + 1, sb.s1));
                            if (dtc != 0.0)
                                jacobian->emplace_back(row, dofs[b], w * pt.N[n] * dtc);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace magelas
