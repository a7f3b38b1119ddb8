#include "magelas/formulations.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "magelas/error.hpp"

namespace magelas {

namespace {

constexpr RegionSet kSolidRegions = {true, true, false};
constexpr RegionSet kAirRegion = {false, false, true};
constexpr RegionSet kMagneticRegion = {true, false, false};
constexpr RegionSet kNonmagneticUnion = {false, true, true};
constexpr RegionSet kNonmagneticSolidRegion = {false, true, false};

std::vector<int> nodes_on_facets(const Mesh& mesh, FacetTag tag) {
    std::set<int> out;
    for (const auto& f : mesh.facets) {
        if (f.tag != tag) continue;
        const auto [a, b] = mesh.facet_corners(f);
        out.insert(a);
        out.insert(b);
        out.insert(mesh.facet_mid(f));
    }
    return {out.begin(), out.end()};
}

// Gauge node for the pure-Neumann scalar-potential problem: the node with the
// largest x coordinate (up to roundoff), ties broken by smallest y, then
// smallest index.
int gauge_pin_node(const Mesh& mesh) {
    double xmax = mesh.nodes[0].x();
    for (const Vec2& p : mesh.nodes) xmax = std::max(xmax, p.x());
    const double tol = 1e-9 * std::max(1.0, std::abs(xmax));
    int best = -1;
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        if (mesh.nodes[n].x() < xmax - tol) continue;
        if (best < 0 || mesh.nodes[n].y() < mesh.nodes[best].y()) best = n;
    }
    return best;
}

class DirichletBuilder {
  public:
    explicit DirichletBuilder(const MixedSpace& space) : space_(space) {}

    void fix_u(int node, int comp) { put({space_.u_dof(node, comp), 0.0, 0.0, 0.0}); }
    void fix_p(int node, double constant, double cbx, double cby) {
        put({space_.p_dof(node), constant, cbx, cby});
    }
    // Symmetry values take precedence over previously inserted outer data at
    // shared corner nodes.
    void override_p(int node, double constant) {
        specs_[space_.p_dof(node)] = {space_.p_dof(node), constant, 0.0, 0.0};
    }

    std::vector<DirichletSpec> take() {
        std::vector<DirichletSpec> out;
        out.reserve(specs_.size());
        for (auto& [dof, spec] : specs_) out.push_back(spec);
        return out;
    }

  private:
    void put(DirichletSpec spec) { specs_.emplace(spec.dof, spec); }

    const MixedSpace& space_;
    std::map<int, DirichletSpec> specs_;
};

std::vector<DirichletSpec> build_dirichlet(const Mesh& mesh, const MixedSpace& space,
                                           const SchemeConfig& cfg) {
    DirichletBuilder bc(space);

    const auto outer = nodes_on_facets(mesh, FacetTag::Outer);
    const auto sym_x = nodes_on_facets(mesh, FacetTag::SymmetryX);
    const auto sym_y = nodes_on_facets(mesh, FacetTag::SymmetryY);

    if (cfg.mechanics_frozen) {
        for (int n = 0; n < mesh.n_nodes(); ++n) {
            bc.fix_u(n, 0);
            bc.fix_u(n, 1);
        }
    } else {
        for (int n : outer) {
            bc.fix_u(n, 0);
            bc.fix_u(n, 1);
        }
        for (int n : sym_x) bc.fix_u(n, 1);  // roller on the horizontal axis
        for (int n : sym_y) bc.fix_u(n, 0);  // roller on the vertical axis
        if (cfg.clamp_solid_symmetry) {
            for (const auto& f : mesh.facets) {
                if (f.tag != FacetTag::SymmetryY) continue;
                if (mesh.region[f.cell] == RegionTag::Air) continue;
                const auto [a, b] = mesh.facet_corners(f);
                for (int n : {a, b, mesh.facet_mid(f)}) {
                    bc.fix_u(n, 0);
                    bc.fix_u(n, 1);
                }
            }
        }
    }

    if (cfg.formulation == Formulation::Coenergy) {
        // The applied flux enters through the outer Neumann term; the scalar
        // potential needs either the antisymmetry condition on the horizontal
        // axis or, failing that, a single gauge pin.
        if (!sym_x.empty()) {
            for (int n : sym_x) bc.fix_p(n, 0.0, 0.0, 0.0);
        } else {
            bc.fix_p(gauge_pin_node(mesh), 0.0, 0.0, 0.0);
        }
    } else {
        // Flux potential of the uniform far field on the outer boundary:
        // value = b_x * Y - b_y * X. The vertical symmetry line carries the
        // essential antisymmetry value; the horizontal one stays natural.
        for (int n : outer) bc.fix_p(n, 0.0, mesh.nodes[n].y(), -mesh.nodes[n].x());
        for (int n : sym_y) bc.override_p(n, 0.0);
    }

    return bc.take();
}

StaggeredPlan build_staggered_plan(const Mesh& mesh, const SchemeConfig& cfg) {
    StaggeredPlan plan;
    plan.tol = cfg.staggered_tol;
    plan.max_outer = cfg.staggered_max_outer;

    const RegionSetPartition air = classify_nodes(mesh, kAirRegion);

    std::vector<std::uint8_t> on_interface(mesh.n_nodes(), 0);
    for (const auto& f : mesh.facets) {
        if (f.tag != FacetTag::SolidAirInterface) continue;
        const auto [a, b] = mesh.facet_corners(f);
        on_interface[a] = on_interface[b] = on_interface[mesh.facet_mid(f)] = 1;
    }
    for (int n = 0; n < mesh.n_nodes(); ++n)
        if (on_interface[n]) plan.interface_nodes.push_back(n);

    // The coupled sub-step holds every interior free-space node at its
    // current position; the interface rows keep their air-side coupling, so
    // the solid still feels the consistent field traction. Leaving even one
    // element layer free would reintroduce the near-zero-stiffness layer this
    // scheme exists to avoid.
    for (int c = 0; c < mesh.n_cells(); ++c)
        if (mesh.region[c] == RegionTag::Air) plan.extension_cells.push_back(c);

    for (int n = 0; n < mesh.n_nodes(); ++n) {
        if (!air.node_in_set[n] || air.node_on_boundary[n]) continue;
        plan.frozen_air_nodes.push_back(n);
    }

    // Smoothing solve: interface and outer data are held fixed in both
    // components; symmetry lines keep their roller component.
    for (auto& fixed : plan.extension_fixed) fixed.assign(mesh.n_nodes(), 0);
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        if (air.node_on_boundary[n]) plan.extension_fixed[0][n] = plan.extension_fixed[1][n] = 1;
    }
    for (int n : nodes_on_facets(mesh, FacetTag::SymmetryX)) plan.extension_fixed[1][n] = 1;
    for (int n : nodes_on_facets(mesh, FacetTag::SymmetryY)) plan.extension_fixed[0][n] = 1;

    return plan;
}

}  // namespace

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::Naive: return "NAIVE";
        case Scheme::MwBoundary: return "MW_BOUNDARY";
        case Scheme::MwOmit: return "MW_OMIT";
        case Scheme::TcBoundary: return "TC_BOUNDARY";
        case Scheme::TcOmit: return "TC_OMIT";
        case Scheme::Staggered: return "STAGGERED";
    }
    return "?";
}

std::string to_string(Formulation f) {
    return f == Formulation::Coenergy ? "COENERGY" : "ENERGY";
}

Scheme scheme_from_string(const std::string& s) {
    for (Scheme v : {Scheme::Naive, Scheme::MwBoundary, Scheme::MwOmit, Scheme::TcBoundary,
                     Scheme::TcOmit, Scheme::Staggered})
        if (s == to_string(v)) return v;
    throw ConfigError("unknown scheme: '" + s + "'");
}

Formulation formulation_from_string(const std::string& s) {
    for (Formulation v : {Formulation::Coenergy, Formulation::Energy})
        if (s == to_string(v)) return v;
    throw ConfigError("unknown formulation: '" + s + "'");
}

Problem build_problem(const Mesh& mesh, const SchemeConfig& cfg,
                      const MaterialTable& materials) {
    const bool energy_form = cfg.formulation == Formulation::Energy;
    if (energy_form && cfg.scheme != Scheme::Naive)
        throw ConfigError("the flux-potential formulation supports the NAIVE scheme only; "
                          "requested " + to_string(cfg.scheme));
    if (energy_form && materials.by_region[static_cast<int>(RegionTag::Magnetic)].saturating)
        throw ConfigError("the saturating magnetic law has no closed flux-potential form; "
                          "use the COENERGY formulation");
    if ((cfg.scheme == Scheme::TcBoundary || cfg.scheme == Scheme::TcOmit) &&
        !(materials.aux_air.G > 0.0))
        throw ConfigError("traction-compensated schemes need G_aux > 0 "
                          "(there is nothing to compensate otherwise)");
    if (cfg.compensation_factor_c < 0.0)
        throw ConfigError("compensation_factor_c must be >= 0");

    const MixedSpace space(mesh);
    Problem prob;
    TermSet& t = prob.terms;
    t.unknown = energy_form ? MagneticUnknown::FluxB : MagneticUnknown::PotentialH;

    t.volume.push_back({DensityKind::Mechanical, kSolidRegions, false, 1.0, {}});
    VolumeTerm aux{DensityKind::Mechanical, kAirRegion, true, 1.0, {}};
    VolumeTerm field{energy_form ? DensityKind::VacuumEnergy : DensityKind::VacuumCoenergy,
                     kNonmagneticUnion, false, 1.0, {}};
    t.volume.push_back(
        {energy_form ? DensityKind::MagneticEnergy : DensityKind::MagneticCoenergy,
         kMagneticRegion, false, 1.0, {}});

    switch (cfg.scheme) {
        case Scheme::Naive:
        case Scheme::Staggered:
            break;
        case Scheme::MwOmit: {
            const auto part = classify_nodes(mesh, kNonmagneticUnion);
            field.zero_u_rows.assign(mesh.n_nodes(), 0);
            for (int n = 0; n < mesh.n_nodes(); ++n)
                field.zero_u_rows[n] = part.node_in_set[n] && !part.node_on_boundary[n];
            break;
        }
        case Scheme::MwBoundary: {
            field.zero_u_rows.assign(mesh.n_nodes(), 1);
            TractionBoundaryTerm traction;
            traction.kind = TractionBoundaryTerm::Kind::MaxwellVacuum;
            traction.sign = 1.0;
            traction.facets = region_set_boundary_facets(mesh, kNonmagneticUnion);
            t.tractions.push_back(traction);
            break;
        }
        case Scheme::TcOmit: {
            const auto part = classify_nodes(mesh, kAirRegion);
            aux.zero_u_rows.assign(part.node_on_boundary.begin(), part.node_on_boundary.end());
            break;
        }
        case Scheme::TcBoundary: {
            TractionBoundaryTerm traction;
            traction.kind = TractionBoundaryTerm::Kind::AuxMechanical;
            traction.sign = -1.0;
            traction.facets = region_set_boundary_facets(mesh, kAirRegion);
            t.tractions.push_back(traction);
            break;
        }
    }

    t.volume.push_back(aux);
    t.volume.push_back(field);
    t.loads.push_back({kSolidRegions, 1.0, {}});

    if (cfg.compensation_factor_c > 0.0) {
        const auto part = classify_nodes(mesh, kNonmagneticSolidRegion);
        std::vector<char> mask(part.node_on_boundary.begin(), part.node_on_boundary.end());
        t.volume.push_back({DensityKind::Mechanical, kNonmagneticSolidRegion, false,
                            cfg.compensation_factor_c, mask});
        t.loads.push_back({kNonmagneticSolidRegion, cfg.compensation_factor_c, mask});
    }

    if (!energy_form) {
        FluxBoundaryTerm flux;
        for (int fi = 0; fi < static_cast<int>(mesh.facets.size()); ++fi)
            if (mesh.facets[fi].tag == FacetTag::Outer) flux.facets.push_back(fi);
        t.flux_bcs.push_back(flux);
    }

    prob.dirichlet = build_dirichlet(mesh, space, cfg);

    // The plan's air-set description also serves the monolithic schemes: the
    // smoothing extension it defines is the mesh-maintenance step a severely
    // deforming solid needs between load increments. Only the alternating
    // scheme actually freezes the air nodes during its coupled sub-step.
    prob.plan = build_staggered_plan(mesh, cfg);
    prob.staggered = cfg.scheme == Scheme::Staggered;
    return prob;
}

}  // namespace magelas
