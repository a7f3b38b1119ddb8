#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "magelas/constitutive.hpp"
#include "magelas/error.hpp"
#include "magelas/formulations.hpp"

using namespace magelas;

namespace {

MaterialTable study_materials() {
    MaterialTable t;
    auto& mag = t.by_region[static_cast<int>(RegionTag::Magnetic)];
    mag.G = 1e3;
    mag.Gp = 50e3;
    mag.chi = 10.0;
    mag.rho0 = 2000.0;
    auto& sol = t.by_region[static_cast<int>(RegionTag::NonmagneticSolid)];
    sol.G = 500.0;
    sol.Gp = 25e3;
    sol.rho0 = 1000.0;
    t.aux_air.G = 1.0;
    t.aux_air.Gp = 50.0;
    return t;
}

int count_u_specs(const Problem& p, const MixedSpace& space) {
    return static_cast<int>(std::count_if(p.dirichlet.begin(), p.dirichlet.end(),
                                          [&](const DirichletSpec& s) {
                                              return space.is_u_dof(s.dof);
                                          }));
}

const VolumeTerm* find_term(const Problem& p, DensityKind kind, double scale = 1.0) {
    for (const auto& t : p.terms.volume)
        if (t.density == kind && t.scale == scale) return &t;
    return nullptr;
}

}  // namespace

TEST_CASE("scheme and formulation names round-trip") {
    for (Scheme s : {Scheme::Naive, Scheme::MwBoundary, Scheme::MwOmit, Scheme::TcBoundary,
                     Scheme::TcOmit, Scheme::Staggered})
        CHECK(scheme_from_string(to_string(s)) == s);
    for (Formulation f : {Formulation::Coenergy, Formulation::Energy})
        CHECK(formulation_from_string(to_string(f)) == f);
    CHECK_THROWS_AS(scheme_from_string("naive"), ConfigError);
    CHECK_THROWS_AS(formulation_from_string(""), ConfigError);
}

TEST_CASE("naive problem on the quarter geometry: kernels and boundary data") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    const MixedSpace space(m);
    SchemeConfig cfg;
    const Problem p = build_problem(m, cfg, study_materials());

    CHECK(p.terms.unknown == MagneticUnknown::PotentialH);
    REQUIRE(p.terms.volume.size() == 4);
    CHECK(find_term(p, DensityKind::Mechanical) != nullptr);
    CHECK(find_term(p, DensityKind::MagneticCoenergy) != nullptr);
    const VolumeTerm* field = find_term(p, DensityKind::VacuumCoenergy);
    REQUIRE(field != nullptr);
    CHECK(field->zero_u_rows.empty());
    CHECK(p.terms.tractions.empty());
    REQUIRE(p.terms.flux_bcs.size() == 1);
    CHECK(p.terms.flux_bcs[0].facets.size() == 6);
    CHECK(!p.staggered);

    // Outer clamp (13 nodes x 2 comps), rollers on both axes (41 nodes each,
    // one corner shared with the outer ring per axis).
    int n_u = 0, n_p = 0;
    std::set<int> fixed;
    for (const auto& s : p.dirichlet) {
        CHECK(fixed.insert(s.dof).second);  // no duplicate dofs
        space.is_u_dof(s.dof) ? ++n_u : ++n_p;
    }
    CHECK(n_u == 26 + 40 + 40);
    // Scalar potential: antisymmetry on the horizontal axis only.
    CHECK(n_p == 41);
    for (const auto& s : p.dirichlet) {
        if (!space.is_u_dof(s.dof)) {
            const int node = space.dof_node(s.dof);
            CHECK(m.nodes[node].y() == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(s.constant == 0.0);
        }
    }
}

TEST_CASE("full-domain problem pins the scalar potential at a single gauge node") {
    GeometryParams gp;
    gp.full_domain = true;
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare, gp);
    const MixedSpace space(m);
    const Problem p = build_problem(m, SchemeConfig{}, study_materials());

    std::vector<DirichletSpec> p_specs;
    for (const auto& s : p.dirichlet)
        if (!space.is_u_dof(s.dof)) p_specs.push_back(s);
    REQUIRE(p_specs.size() == 1);
    const Vec2& pin = m.nodes[space.dof_node(p_specs[0].dof)];
    CHECK(pin.x() == doctest::Approx(10.0));
    CHECK(pin.y() == doctest::Approx(-10.0));
}

TEST_CASE("flux-potential problem: outer values follow the applied field") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    const MixedSpace space(m);
    SchemeConfig cfg;
    cfg.formulation = Formulation::Energy;
    const Problem p = build_problem(m, cfg, study_materials());

    CHECK(p.terms.unknown == MagneticUnknown::FluxB);
    CHECK(p.terms.flux_bcs.empty());
    CHECK(find_term(p, DensityKind::VacuumEnergy) != nullptr);
    CHECK(find_term(p, DensityKind::MagneticEnergy) != nullptr);

    LoadState load;
    load.b_inf = Vec2(0.0, 0.4);
    int n_outer = 0, n_sym = 0;
    for (const auto& s : p.dirichlet) {
        if (space.is_u_dof(s.dof)) continue;
        const Vec2& x = m.nodes[space.dof_node(s.dof)];
        if (std::abs(x.x()) < 1e-12) {
            CHECK(s.value(load) == 0.0);  // antisymmetry on the vertical axis
            ++n_sym;
        } else {
            CHECK(s.value(load) == doctest::Approx(-0.4 * x.x()));
            ++n_outer;
        }
    }
    CHECK(n_sym == 41);
    CHECK(n_outer == 12);  // 13 outer nodes, corner (0,10) counted as symmetry
    // Nothing essential on the horizontal axis besides its endpoints.
    for (const auto& s : p.dirichlet) {
        if (space.is_u_dof(s.dof)) continue;
        const Vec2& x = m.nodes[space.dof_node(s.dof)];
        if (std::abs(x.y()) < 1e-12)
            CHECK((std::abs(x.x()) < 1e-12 || std::abs(x.x() - 10.0) < 1e-9));
    }
}

TEST_CASE("unsupported combinations are rejected") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    MaterialTable mats = study_materials();

    SchemeConfig cfg;
    cfg.formulation = Formulation::Energy;
    cfg.scheme = Scheme::MwOmit;
    CHECK_THROWS_AS(build_problem(m, cfg, mats), ConfigError);

    cfg.scheme = Scheme::Naive;
    mats.by_region[0].saturating = true;
    mats.by_region[0].ms = 1e5;
    CHECK_THROWS_AS(build_problem(m, cfg, mats), ConfigError);

    mats = study_materials();
    cfg = SchemeConfig{};
    cfg.scheme = Scheme::TcOmit;
    mats.aux_air.G = 0.0;
    CHECK_THROWS_AS(build_problem(m, cfg, mats), ConfigError);

    cfg = SchemeConfig{};
    cfg.compensation_factor_c = -1.0;
    CHECK_THROWS_AS(build_problem(m, cfg, study_materials()), ConfigError);
}

TEST_CASE("frozen mechanics pins every displacement dof") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    const MixedSpace space(m);
    SchemeConfig cfg;
    cfg.mechanics_frozen = true;
    const Problem p = build_problem(m, cfg, study_materials());
    CHECK(count_u_specs(p, space) == 2 * m.n_nodes());
}

TEST_CASE("row filters and tractions per scheme") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    const MaterialTable mats = study_materials();
    const auto nonmag = classify_nodes(m, {false, true, true});
    const auto air = classify_nodes(m, {false, false, true});

    SUBCASE("interior-omission variant filters strictly interior union rows") {
        SchemeConfig cfg;
        cfg.scheme = Scheme::MwOmit;
        const Problem p = build_problem(m, cfg, mats);
        const VolumeTerm* field = find_term(p, DensityKind::VacuumCoenergy);
        REQUIRE(field != nullptr);
        REQUIRE(field->zero_u_rows.size() == static_cast<size_t>(m.n_nodes()));
        for (int n = 0; n < m.n_nodes(); ++n) {
            const bool expect = nonmag.node_in_set[n] && !nonmag.node_on_boundary[n];
            CHECK(static_cast<bool>(field->zero_u_rows[n]) == expect);
        }
        CHECK(p.terms.tractions.empty());
    }

    SUBCASE("boundary variant drops all field rows and adds the vacuum traction") {
        SchemeConfig cfg;
        cfg.scheme = Scheme::MwBoundary;
        const Problem p = build_problem(m, cfg, mats);
        const VolumeTerm* field = find_term(p, DensityKind::VacuumCoenergy);
        REQUIRE(field != nullptr);
        CHECK(std::count(field->zero_u_rows.begin(), field->zero_u_rows.end(), 1) ==
              m.n_nodes());
        REQUIRE(p.terms.tractions.size() == 1);
        CHECK(p.terms.tractions[0].kind == TractionBoundaryTerm::Kind::MaxwellVacuum);
        CHECK(p.terms.tractions[0].sign == 1.0);
        CHECK(p.terms.tractions[0].facets.size() == 12);
    }

    SUBCASE("compensated variants touch the auxiliary kernel only") {
        SchemeConfig cfg;
        cfg.scheme = Scheme::TcOmit;
        const Problem p = build_problem(m, cfg, mats);
        const VolumeTerm* field = find_term(p, DensityKind::VacuumCoenergy);
        REQUIRE(field != nullptr);
        CHECK(field->zero_u_rows.empty());
        const VolumeTerm* aux = nullptr;
        for (const auto& vt : p.terms.volume)
            if (vt.use_aux_material) aux = &vt;
        REQUIRE(aux != nullptr);
        for (int n = 0; n < m.n_nodes(); ++n)
            CHECK(static_cast<bool>(aux->zero_u_rows[n]) ==
                  static_cast<bool>(air.node_on_boundary[n]));

        cfg.scheme = Scheme::TcBoundary;
        const Problem q = build_problem(m, cfg, mats);
        REQUIRE(q.terms.tractions.size() == 1);
        CHECK(q.terms.tractions[0].kind == TractionBoundaryTerm::Kind::AuxMechanical);
        CHECK(q.terms.tractions[0].sign == -1.0);
        CHECK(q.terms.tractions[0].facets.size() == 12);
    }

    SUBCASE("solid compensation adds scaled, boundary-filtered kernels") {
        SchemeConfig cfg;
        cfg.scheme = Scheme::TcOmit;
        cfg.compensation_factor_c = 2.0;
        const Problem p = build_problem(m, cfg, mats);
        const VolumeTerm* extra = find_term(p, DensityKind::Mechanical, 2.0);
        REQUIRE(extra != nullptr);
        CHECK((extra->regions == RegionSet{false, true, false}));
        REQUIRE(p.terms.loads.size() == 2);
        CHECK(p.terms.loads[1].scale == 2.0);
        CHECK(p.terms.loads[1].zero_u_rows == extra->zero_u_rows);
    }
}

TEST_CASE("staggered plan partitions the air nodes") {
    const Mesh m = builtin_geometry(GeometryKind::CircleInSquare);
    SchemeConfig cfg;
    cfg.scheme = Scheme::Staggered;
    const Problem p = build_problem(m, cfg, study_materials());
    REQUIRE(p.staggered);
    const StaggeredPlan& plan = p.plan;

    CHECK(plan.interface_nodes.size() == 13);
    for (int n : plan.interface_nodes)
        CHECK(m.nodes[n].norm() == doctest::Approx(1.0).epsilon(1e-9));

    // The coupled sub-step holds exactly the strictly interior air nodes;
    // interface nodes stay free so the solid boundary can move.
    const auto air = classify_nodes(m, {false, false, true});
    std::set<int> frozen(plan.frozen_air_nodes.begin(), plan.frozen_air_nodes.end());
    int expected_frozen = 0;
    for (int n = 0; n < m.n_nodes(); ++n)
        if (air.node_in_set[n] && !air.node_on_boundary[n]) ++expected_frozen;
    CHECK(static_cast<int>(frozen.size()) == expected_frozen);
    CHECK(frozen.size() > 200);
    for (int n : plan.frozen_air_nodes) {
        CHECK(air.node_in_set[n]);
        CHECK(!air.node_on_boundary[n]);
    }
    for (int n : plan.interface_nodes) CHECK(frozen.count(n) == 0);

    // The mesh-adaption sub-step covers the whole free-space region.
    int n_air_cells = 0;
    for (int c = 0; c < m.n_cells(); ++c)
        if (m.region[c] == RegionTag::Air) ++n_air_cells;
    CHECK(static_cast<int>(plan.extension_cells.size()) == n_air_cells);
    for (int c : plan.extension_cells) CHECK(m.region[c] == RegionTag::Air);

    // Extension data: both components held on the air boundary, rollers on
    // the symmetry lines.
    for (int n = 0; n < m.n_nodes(); ++n) {
        if (air.node_on_boundary[n]) {
            CHECK(plan.extension_fixed[0][n] == 1);
            CHECK(plan.extension_fixed[1][n] == 1);
        }
    }
    for (int n = 0; n < m.n_nodes(); ++n) {
        if (!air.node_in_set[n] || air.node_on_boundary[n]) continue;
        if (std::abs(m.nodes[n].y()) < 1e-12) CHECK(plan.extension_fixed[1][n] == 1);
        if (std::abs(m.nodes[n].x()) < 1e-12) CHECK(plan.extension_fixed[0][n] == 1);
    }
}

// With a constant auxiliary stress field, the volume kernel's displacement
// rows reduce to pure boundary integrals; subtracting the explicit boundary
// traction must cancel them to quadrature precision.
TEST_CASE("auxiliary compensation is an integral zero for affine deformation") {
    const Mesh m = make_rectangle_mesh(0.0, 0.0, 2.0, 1.0, 6, 3);
    const MixedSpace space(m);
    MaterialTable mats;
    mats.aux_air.G = 3.0;
    mats.aux_air.Gp = 150.0;

    TermSet t;
    t.unknown = MagneticUnknown::PotentialH;
    t.volume.push_back({DensityKind::Mechanical, {false, false, true}, true, 1.0, {}});
    TractionBoundaryTerm traction;
    traction.kind = TractionBoundaryTerm::Kind::AuxMechanical;
    traction.sign = -1.0;
    traction.facets = region_set_boundary_facets(m, {false, false, true});
    REQUIRE(traction.facets.size() == 18);
    t.tractions.push_back(traction);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(space.n_dofs());
    const Mat2 A = (Mat2() << 0.13, 0.06, -0.04, -0.09).finished();
    for (int n = 0; n < m.n_nodes(); ++n) {
        const Vec2 u = A * m.nodes[n];
        x[space.u_dof(n, 0)] = u.x();
        x[space.u_dof(n, 1)] = u.y();
    }

    Eigen::VectorXd r;
    std::vector<Eigen::Triplet<double>> trips;
    assemble_system(m, space, mats, t, LoadState{}, x, &r, &trips);
    CHECK(r.lpNorm<Eigen::Infinity>() < 1e-12 * mats.aux_air.Gp);
}

// A uniform vertical field pulls the top edge upward with the classical
// surface force density |b|^2 / (2 mu0).
TEST_CASE("vacuum traction kernel reproduces the uniform-field surface force") {
    const Mesh m = make_rectangle_mesh(0.0, 0.0, 2.0, 1.0, 4, 2);
    const MixedSpace space(m);

    TermSet t;
    t.unknown = MagneticUnknown::PotentialH;
    TractionBoundaryTerm traction;
    traction.kind = TractionBoundaryTerm::Kind::MaxwellVacuum;
    traction.sign = 1.0;
    for (int fi = 0; fi < static_cast<int>(m.facets.size()); ++fi) {
        const auto [a, b] = m.facet_corners(m.facets[fi]);
        if (m.nodes[a].y() > 1.0 - 1e-12 && m.nodes[b].y() > 1.0 - 1e-12)
            traction.facets.push_back(fi);
    }
    REQUIRE(traction.facets.size() == 4);
    t.tractions.push_back(traction);

    const double b_mag = 0.8;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(space.n_dofs());
    for (int n = 0; n < m.n_nodes(); ++n)
        x[space.p_dof(n)] = -(b_mag / kMu0) * m.nodes[n].y();

    Eigen::VectorXd r;
    assemble_system(m, space, MaterialTable{}, t, LoadState{}, x, &r, nullptr);

    double fx = 0.0, fy = 0.0;
    for (int n = 0; n < m.n_nodes(); ++n) {
        fx += r[space.u_dof(n, 0)];
        fy += r[space.u_dof(n, 1)];
    }
    const double expect = 2.0 * b_mag * b_mag / (2.0 * kMu0);  // edge length 2
    CHECK(fy == doctest::Approx(expect).epsilon(1e-12));
    CHECK(fx == doctest::Approx(0.0).epsilon(1e-12).scale(expect));
}
