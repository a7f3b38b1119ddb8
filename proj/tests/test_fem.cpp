#include <doctest.h>

#include <cmath>
#include <random>

#include "magelas/fem.hpp"

using namespace magelas;

namespace {

MaterialTable test_materials() {
    MaterialTable t;
    auto& mag = t.by_region[static_cast<int>(RegionTag::Magnetic)];
    mag.G = 1.0e4;
    mag.Gp = 1.0e5;
    mag.chi = 4.0;
    mag.rho0 = 2000.0;
    auto& sol = t.by_region[static_cast<int>(RegionTag::NonmagneticSolid)];
    sol.G = 500.0;
    sol.Gp = 5.0e4;
    sol.rho0 = 1000.0;
    t.aux_air.G = 1.0;
    t.aux_air.Gp = 10.0;
    return t;
}

constexpr RegionSet kAll = {true, true, true};
constexpr RegionSet kSolids = {true, true, false};
constexpr RegionSet kAirOnly = {false, false, true};
constexpr RegionSet kNonmagnetic = {false, true, true};
constexpr RegionSet kMagneticOnly = {true, false, false};

Eigen::VectorXd random_state(const MixedSpace& space, double u_amp, double p_amp) {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd x(space.n_dofs());
    for (int n = 0; n < space.n_nodes; ++n) {
        x[space.u_dof(n, 0)] = u_amp * dist(rng);
        x[space.u_dof(n, 1)] = u_amp * dist(rng);
        x[space.p_dof(n)] = p_amp * dist(rng);
    }
    return x;
}

Eigen::SparseMatrix<double> to_sparse(int n, std::vector<Eigen::Triplet<double>>& trips) {
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    return A;
}

// Directional finite-difference check of residual (against energy, when the
// term set is variational) and Jacobian (against residual).
void check_consistency(const Mesh& mesh, const TermSet& terms, const LoadState& load,
                       double p_amp, bool check_energy) {
    const MixedSpace space(mesh);
    const MaterialTable mats = test_materials();
    const Eigen::VectorXd x = random_state(space, 1e-3, p_amp);

    Eigen::VectorXd r;
    std::vector<Eigen::Triplet<double>> trips;
    double energy = 0.0;
    assemble_system(mesh, space, mats, terms, load, x, &r, &trips, &energy);
    const auto J = to_sparse(space.n_dofs(), trips);

    std::mt19937 rng(77);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd d(space.n_dofs());
    for (int i = 0; i < d.size(); ++i) d[i] = dist(rng);
    // Scale the scalar block like the state so the direction is balanced.
    for (int n = 0; n < space.n_nodes; ++n) d[space.p_dof(n)] *= p_amp / 1e-3;
    d.normalize();

    const double h = 1e-6;
    Eigen::VectorXd rp, rm;
    double ep = 0.0, em = 0.0;
    assemble_system(mesh, space, mats, terms, load, x + h * d, &rp, nullptr, &ep);
    assemble_system(mesh, space, mats, terms, load, x - h * d, &rm, nullptr, &em);

    if (check_energy) {
        const double fd = (ep - em) / (2.0 * h);
        const double rd = r.dot(d);
        CHECK(rd == doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1.0));
    }
    const Eigen::VectorXd jd = J * d;
    const Eigen::VectorXd fd = (rp - rm) / (2.0 * h);
    const double scale = jd.norm() + 1.0;
    CHECK((fd - jd).norm() < 1e-5 * scale);
}

TermSet naive_field_terms(const Mesh& mesh) {
    TermSet t;
    t.unknown = MagneticUnknown::PotentialH;
    t.volume.push_back({DensityKind::Mechanical, kSolids, false, 1.0, {}});
    t.volume.push_back({DensityKind::Mechanical, kAirOnly, true, 1.0, {}});
    t.volume.push_back({DensityKind::MagneticCoenergy, kMagneticOnly, false, 1.0, {}});
    t.volume.push_back({DensityKind::VacuumCoenergy, kNonmagnetic, false, 1.0, {}});
    t.loads.push_back({kSolids, 1.0, {}});
    FluxBoundaryTerm flux;
    for (int fi = 0; fi < static_cast<int>(mesh.facets.size()); ++fi)
        if (mesh.facets[fi].tag == FacetTag::Outer) flux.facets.push_back(fi);
    t.flux_bcs.push_back(flux);
    return t;
}

}  // namespace

TEST_CASE("node classification: air set on the quarter circle geometry") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    const auto part = classify_nodes(m, kAirOnly);

    int on_circle = 0, air_interior = 0, outer = 0;
    for (int n = 0; n < m.n_nodes(); ++n) {
        const double r = m.nodes[n].norm();
        const bool on_axis = m.nodes[n].x() < 1e-12 || m.nodes[n].y() < 1e-12;
        if (!part.node_in_set[n]) {
            CHECK(r < 1.0 + 1e-9);  // strictly inside the disk (or its boundary)
            continue;
        }
        if (std::abs(r - 1.0) < 1e-9) {
            CHECK(part.node_on_boundary[n]);
            ++on_circle;
        } else if (std::abs(m.nodes[n].x() - 10.0) < 1e-9 ||
                   std::abs(m.nodes[n].y() - 10.0) < 1e-9) {
            CHECK(part.node_on_boundary[n]);
            ++outer;
        } else if (r > 1.0 + 1e-9) {
            // Interior air nodes, including those on symmetry lines.
            CHECK(!part.node_on_boundary[n]);
            air_interior += on_axis ? 0 : 1;
        }
    }
    CHECK(on_circle == 13);  // 6 arc edges: 7 corners + 6 mids
    CHECK(outer == 13);
    CHECK(air_interior > 100);
}

TEST_CASE("node classification: every outer node of a rectangle is boundary") {
    const Mesh m = make_rectangle_mesh(0, 0, 2, 1, 4, 2);
    const auto part = classify_nodes(m, kAirOnly);
    for (int n = 0; n < m.n_nodes(); ++n) {
        CHECK(part.node_in_set[n]);
        const auto& p = m.nodes[n];
        const bool edge = p.x() < 1e-12 || p.x() > 2 - 1e-12 || p.y() < 1e-12 ||
                          p.y() > 1 - 1e-12;
        CHECK(static_cast<bool>(part.node_on_boundary[n]) == edge);
    }
}

TEST_CASE("region-set boundary facets: union boundary of the non-magnetic set") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    const auto facets = region_set_boundary_facets(m, kNonmagnetic);
    // 6 circle facets + 6 outer facets; symmetry lines excluded.
    CHECK(facets.size() == 12);
    for (const int fi : facets) {
        const auto& f = m.facets[fi];
        CHECK((f.tag == FacetTag::Outer || f.tag == FacetTag::SolidAirInterface));
        CHECK(m.region[f.cell] == RegionTag::Air);
    }
}

TEST_CASE("assembly: residual is the gradient of the energy, Jacobian of the residual") {
    const Mesh mesh = builtin_geometry(GeometryKind::CircleInSquare);
    LoadState load;
    load.b_inf = Vec2(0.0, 0.05);
    load.gravity = Vec2(0.0, -9.81);
    check_consistency(mesh, naive_field_terms(mesh), load, 1e2, true);
}

TEST_CASE("assembly: row-filtered terms stay consistent between residual and Jacobian") {
    const Mesh mesh = builtin_geometry(GeometryKind::CircleInSquare);
    TermSet t = naive_field_terms(mesh);
    // Filter the field-energy rows at nodes interior to the non-magnetic set
    // and the auxiliary air rows at the air-set boundary.
    const auto nm = classify_nodes(mesh, kNonmagnetic);
    auto& vac = t.volume[3];
    vac.zero_u_rows.assign(mesh.n_nodes(), 0);
    for (int n = 0; n < mesh.n_nodes(); ++n)
        vac.zero_u_rows[n] = nm.node_in_set[n] && !nm.node_on_boundary[n];
    const auto air = classify_nodes(mesh, kAirOnly);
    auto& aux = t.volume[1];
    aux.zero_u_rows.assign(air.node_on_boundary.begin(), air.node_on_boundary.end());

    LoadState load;
    load.b_inf = Vec2(0.0, 0.05);
    load.gravity = Vec2(0.0, -9.81);
    check_consistency(mesh, t, load, 1e2, false);
}

TEST_CASE("assembly: surface traction kernels linearize consistently") {
    const Mesh mesh = builtin_geometry(GeometryKind::CircleInSquare);
    TermSet t = naive_field_terms(mesh);
    TractionBoundaryTerm mw;
    mw.kind = TractionBoundaryTerm::Kind::MaxwellVacuum;
    mw.sign = 1.0;
    mw.facets = region_set_boundary_facets(mesh, kNonmagnetic);
    t.tractions.push_back(mw);
    TractionBoundaryTerm aux;
    aux.kind = TractionBoundaryTerm::Kind::AuxMechanical;
    aux.sign = -1.0;
    aux.facets = region_set_boundary_facets(mesh, kAirOnly);
    t.tractions.push_back(aux);

    LoadState load;
    load.b_inf = Vec2(0.0, 0.05);
    load.gravity = Vec2(0.0, -9.81);
    check_consistency(mesh, t, load, 1e2, false);
}

TEST_CASE("assembly: flux-potential form is variational and consistent") {
    const Mesh mesh = builtin_geometry(GeometryKind::CircleInSquare);
    TermSet t;
    t.unknown = MagneticUnknown::FluxB;
    t.volume.push_back({DensityKind::Mechanical, kSolids, false, 1.0, {}});
    t.volume.push_back({DensityKind::Mechanical, kAirOnly, true, 1.0, {}});
    t.volume.push_back({DensityKind::MagneticEnergy, kMagneticOnly, false, 1.0, {}});
    t.volume.push_back({DensityKind::VacuumEnergy, kNonmagnetic, false, 1.0, {}});
    t.loads.push_back({kSolids, 1.0, {}});
    LoadState load;
    load.gravity = Vec2(0.0, -9.81);
    check_consistency(mesh, t, load, 1e-3, true);
}

TEST_CASE("assembly: zeroed rows receive no contribution at all") {
    const Mesh mesh = builtin_geometry(GeometryKind::CircleInSquare);
    const MixedSpace space(mesh);
    TermSet t;
    t.unknown = MagneticUnknown::PotentialH;
    VolumeTerm vac{DensityKind::VacuumCoenergy, kNonmagnetic, false, 1.0, {}};
    vac.zero_u_rows.assign(mesh.n_nodes(), 1);  // drop every displacement row
    t.volume.push_back(vac);

    const Eigen::VectorXd x = random_state(space, 1e-3, 1e2);
    Eigen::VectorXd r;
    std::vector<Eigen::Triplet<double>> trips;
    assemble_system(mesh, space, test_materials(), t, LoadState{}, x, &r, &trips);
    for (int n = 0; n < space.n_nodes; ++n) {
        CHECK(r[space.u_dof(n, 0)] == 0.0);
        CHECK(r[space.u_dof(n, 1)] == 0.0);
    }
    for (const auto& tr : trips) CHECK(!space.is_u_dof(tr.row()));
    // The scalar equations still see the displacement through the columns.
    bool p_row_u_col = false;
    for (const auto& tr : trips)
        p_row_u_col |= !space.is_u_dof(tr.row()) && space.is_u_dof(tr.col());
    CHECK(p_row_u_col);
}

TEST_CASE("dirichlet specs follow the load state") {
    std::vector<DirichletSpec> bcs;
    bcs.push_back({3, 0.5, 0.0, 0.0});
    bcs.push_back({5, 0.0, 2.0, -1.0});
    LoadState load;
    load.b_inf = Vec2(0.25, 0.75);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
    apply_dirichlet(bcs, load, x);
    CHECK(x[3] == 0.5);
    CHECK(x[5] == doctest::Approx(2.0 * 0.25 - 0.75));
    CHECK(x[0] == 0.0);
}
