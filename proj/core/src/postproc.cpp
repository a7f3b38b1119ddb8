#include "magelas/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "magelas/quadrature.hpp"
#include "magelas/shape.hpp"

namespace magelas {

namespace {

// Displacement gradient, deformation gradient, and the referential magnetic
// unknown of one cell at a reference point, evaluated straight from the
// state vector.
struct PointFields {
    Vec2 x = Vec2::Zero();  // reference position
    Vec2 u = Vec2::Zero();
    Mat2 F = Mat2::Identity();
    Vec2 V = Vec2::Zero();  // referential H or B
    double p = 0.0;         // scalar unknown value
};

PointFields eval_point(const Mesh& mesh, const MixedSpace& space, const Eigen::VectorXd& state,
                       MagneticUnknown unknown, int cell, double xi, double eta) {
    PointFields out;
    double N[6], dNr[6][2];
    p2_shape(xi, eta, N, dNr);
    Mat2 Jg;
    mesh.geometry_at(cell, xi, eta, &out.x, &Jg);
    const Mat2 JinvT = Jg.inverse().transpose();
    Mat2 gradu = Mat2::Zero();
    Vec2 gradp = Vec2::Zero();
    for (int n = 0; n < 6; ++n) {
        const int node = mesh.cells[cell][n];
        const Vec2 g = JinvT * Vec2(dNr[n][0], dNr[n][1]);
        const Vec2 un(state[space.u_dof(node, 0)], state[space.u_dof(node, 1)]);
        out.u += N[n] * un;
        out.p += N[n] * state[space.p_dof(node)];
        gradu += un * g.transpose();
        gradp += state[space.p_dof(node)] * g;
    }
    out.F = Mat2::Identity() + gradu;
    out.V = unknown == MagneticUnknown::PotentialH ? Vec2(-gradp)
                                                   : Vec2(gradp.y(), -gradp.x());
    return out;
}

// Spatial field intensity h from the referential unknown.
Vec2 spatial_h(const PointFields& pt, MagneticUnknown unknown, const MaterialModel& mat) {
    if (unknown == MagneticUnknown::PotentialH)
        return pt.F.inverse().transpose() * pt.V;
    const Vec2 b = pt.F * pt.V / pt.F.determinant();
    return b / (kMu0 * (1.0 + mat.chi));
}

double magnetization_magnitude(double h_norm, const MaterialModel& mat) {
    if (mat.chi == 0.0) return 0.0;
    if (mat.saturating && mat.ms > 0.0)
        return mat.ms * std::tanh(mat.chi * h_norm / mat.ms);
    return mat.chi * h_norm;
}

// Reference coordinates of edge-local parameter t on local edge e, matching
// the facet corner order (corner e at t=0, corner (e+1)%3 at t=1).
void edge_point(int local_edge, double t, double* xi, double* eta) {
    switch (local_edge) {
        case 0: *xi = t; *eta = 0.0; break;
        case 1: *xi = 1.0 - t; *eta = t; break;
        default: *xi = 0.0; *eta = 1.0 - t; break;
    }
}

std::vector<int> outer_facets(const Mesh& mesh) {
    std::vector<int> out;
    for (int fi = 0; fi < static_cast<int>(mesh.facets.size()); ++fi)
        if (mesh.facets[fi].tag == FacetTag::Outer) out.push_back(fi);
    return out;
}

}  // namespace

// --- displacement probes -----------------------------------------------------

ProbeResult probe_displacement(const Mesh& mesh, const MixedSpace& space,
                               const Eigen::VectorXd& state, const Vec2& point,
                               double scale_length, const LoadState& load,
                               const std::string& label) {
    constexpr double kInsideTol = 1e-9;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        // Cheap bounding-box rejection with a margin for edge curvature.
        double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
        for (int n = 0; n < 6; ++n) {
            const Vec2& v = mesh.nodes[mesh.cells[c][n]];
            lo_x = std::min(lo_x, v.x()); hi_x = std::max(hi_x, v.x());
            lo_y = std::min(lo_y, v.y()); hi_y = std::max(hi_y, v.y());
        }
        const double margin = 0.1 * std::max(hi_x - lo_x, hi_y - lo_y) + 1e-12;
        if (point.x() < lo_x - margin || point.x() > hi_x + margin ||
            point.y() < lo_y - margin || point.y() > hi_y + margin)
            continue;

        // Invert the quadratic geometry map by Newton iteration.
        double xi = 1.0 / 3.0, eta = 1.0 / 3.0;
        bool converged = false;
        for (int it = 0; it < 20; ++it) {
            Vec2 x;
            Mat2 J;
            mesh.geometry_at(c, xi, eta, &x, &J);
            const Vec2 r = x - point;
            if (r.norm() < 1e-13 * (1.0 + point.norm())) {
                converged = true;
                break;
            }
            const Vec2 d = J.partialPivLu().solve(r);
            xi -= d.x();
            eta -= d.y();
            if (!(std::isfinite(xi) && std::isfinite(eta))) break;
            // Keep the iterate near the element; far excursions mean the
            // point belongs to some other cell.
            if (xi < -1.0 || eta < -1.0 || xi + eta > 3.0) break;
        }
        if (!converged) continue;
        if (xi < -kInsideTol || eta < -kInsideTol || xi + eta > 1.0 + kInsideTol) continue;

        const PointFields pt =
            eval_point(mesh, space, state, MagneticUnknown::PotentialH, c, xi, eta);
        ProbeResult res;
        res.label = label;
        res.point = point;
        res.displacement = pt.u;
        res.scaled = scale_length != 0.0 ? pt.u.y() / scale_length : pt.u.y();
        res.load = load;
        return res;
    }
    std::ostringstream msg;
    msg << "probe point (" << point.x() << ", " << point.y() << ") lies in no cell";
    throw PostprocError(msg.str());
}

// --- energetic diagnostics ---------------------------------------------------

double magnetostatic_potential(const Mesh& mesh, const MixedSpace& space,
                               const MaterialTable& materials, Formulation form,
                               const LoadState& load, const Eigen::VectorXd& state) {
    RegionSet magnetic{};
    magnetic[static_cast<int>(RegionTag::Magnetic)] = true;
    RegionSet nonmagnetic{};
    nonmagnetic[static_cast<int>(RegionTag::NonmagneticSolid)] = true;
    nonmagnetic[static_cast<int>(RegionTag::Air)] = true;

    TermSet terms;
    double energy = 0.0;
    if (form == Formulation::Coenergy) {
        terms.unknown = MagneticUnknown::PotentialH;
        terms.volume.push_back({DensityKind::MagneticCoenergy, magnetic, false, 1.0, {}});
        terms.volume.push_back({DensityKind::VacuumCoenergy, nonmagnetic, false, 1.0, {}});
        terms.flux_bcs.push_back({outer_facets(mesh)});
        assemble_system(mesh, space, materials, terms, load, state, nullptr, nullptr,
                        &energy);
        return energy;
    }

    terms.unknown = MagneticUnknown::FluxB;
    terms.volume.push_back({DensityKind::MagneticEnergy, magnetic, false, 1.0, {}});
    terms.volume.push_back({DensityKind::VacuumEnergy, nonmagnetic, false, 1.0, {}});
    assemble_system(mesh, space, materials, terms, load, state, nullptr, nullptr, &energy);

    // Far-field loading term of the flux form: minus the boundary integral of
    // a_z times the tangential far-field intensity h_inf x n, evaluated on
    // the (fixed) outer boundary.
    const Vec2 h_inf = load.b_inf / kMu0;
    const auto& rule = line_rule(8);
    for (const int fi : outer_facets(mesh)) {
        const Facet& f = mesh.facets[fi];
        const auto corners = mesh.facet_corners(f);
        const int edge_nodes[3] = {corners[0], mesh.facet_mid(f), corners[1]};
        for (const auto& qp : rule.points) {
            double N1[3], dN1[3];
            p2_line_shape(qp.x, N1, dN1);
            Vec2 T = Vec2::Zero();
            double az = 0.0;
            for (int k = 0; k < 3; ++k) {
                T += dN1[k] * mesh.nodes[edge_nodes[k]];
                az += N1[k] * state[space.p_dof(edge_nodes[k])];
            }
            const Vec2 nor(T.y(), -T.x());  // outward * |T|
            energy -= qp.w * az * (h_inf.x() * nor.y() - h_inf.y() * nor.x());
        }
    }
    return energy;
}

double max_interior_displacement(const Mesh& mesh, const MixedSpace& space,
                                 const Eigen::VectorXd& state, const RegionSet& regions) {
    const RegionSetPartition part = classify_nodes(mesh, regions);
    double worst = 0.0;
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        if (!part.node_in_set[n] || part.node_on_boundary[n]) continue;
        const Vec2 u(state[space.u_dof(n, 0)], state[space.u_dof(n, 1)]);
        worst = std::max(worst, u.norm());
    }
    return worst;
}

// --- net force -----------------------------------------------------------------

Vec2 net_force(const Mesh& mesh, const MixedSpace& space, const MaterialTable& materials,
               MagneticUnknown unknown, const Eigen::VectorXd& state,
               const std::vector<char>& enclosed_cells) {
    if (static_cast<int>(enclosed_cells.size()) != mesh.n_cells())
        throw PostprocError("cell mask size does not match the mesh");

    // Symmetry edges are interior in the unfolded domain: the mirror image of
    // the mask closes the surface across them.
    std::vector<char> on_symmetry(mesh.n_cells() * 3, 0);
    for (const Facet& f : mesh.facets)
        if (f.tag == FacetTag::SymmetryX || f.tag == FacetTag::SymmetryY)
            on_symmetry[3 * f.cell + f.local_edge] = 1;

    const auto& rule = line_rule(8);
    Vec2 force = Vec2::Zero();
    int n_edges = 0;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        if (!enclosed_cells[c]) continue;
        for (int e = 0; e < 3; ++e) {
            const int outside = mesh.neighbor(c, e);
            if (outside >= 0 && enclosed_cells[outside]) continue;
            if (outside < 0) {
                if (on_symmetry[3 * c + e]) continue;
                throw PostprocError(
                    "net-force surface touches the outer boundary; shrink the mask");
            }
            if (mesh.region[outside] == RegionTag::Magnetic)
                throw PostprocError(
                    "net-force surface borders a magnetic cell; grow the mask to "
                    "enclose the whole body");
            ++n_edges;
            const MaterialModel& mat = materials.material(mesh.region[outside]);

            // Locate the shared edge inside the outside cell (conforming
            // meshes share the mid-edge node) to evaluate its field trace.
            const int mid = mesh.cells[c][3 + e];
            int e_out = -1;
            for (int k = 0; k < 3; ++k)
                if (mesh.cells[outside][3 + k] == mid) e_out = k;
            if (e_out < 0) throw PostprocError("non-conforming edge in net-force surface");

            const int edge_nodes[3] = {mesh.cells[c][e], mid, mesh.cells[c][(e + 1) % 3]};
            for (const auto& qp : rule.points) {
                double N1[3], dN1[3];
                p2_line_shape(qp.x, N1, dN1);
                // Referential tangent of the edge traversed with the inside
                // cell's orientation, so (T.y, -T.x) points outward of the
                // mask; the length measure rides along.
                Vec2 T = Vec2::Zero();
                for (int k = 0; k < 3; ++k) T += dN1[k] * mesh.nodes[edge_nodes[k]];

                // Neighboring cells traverse the shared edge in opposite
                // directions, so the outside-cell parameter runs backwards.
                double xi, eta;
                edge_point(e_out, 1.0 - qp.x, &xi, &eta);
                const PointFields pt =
                    eval_point(mesh, space, state, unknown, outside, xi, eta);

                // Deformed tangent carries the length transport; rotating it
                // gives the deformed outward normal times the line measure.
                const Vec2 t_def = pt.F * T;
                const Vec2 nor(t_def.y(), -t_def.x());
                const Vec2 h = spatial_h(pt, unknown, mat);
                // Free-space Maxwell stress sigma = mu0 (h h - 1/2 |h|^2 I).
                force += qp.w * kMu0 * (h * h.dot(nor) - 0.5 * h.squaredNorm() * nor);
            }
        }
    }
    if (n_edges == 0) throw PostprocError("net-force surface is empty");
    return force;
}

std::vector<char> dilate_region(const Mesh& mesh, const RegionSet& seed, int layers) {
    std::vector<char> in_set(mesh.n_cells(), 0);
    std::vector<int> frontier;
    for (int c = 0; c < mesh.n_cells(); ++c)
        if (seed[static_cast<int>(mesh.region[c])]) {
            in_set[c] = 1;
            frontier.push_back(c);
        }
    for (int l = 0; l < layers; ++l) {
        std::vector<int> next;
        for (const int c : frontier) {
            for (int e = 0; e < 3; ++e) {
                const int other = mesh.neighbor(c, e);
                if (other < 0 || in_set[other]) continue;
                in_set[other] = 1;
                next.push_back(other);
            }
        }
        frontier = std::move(next);
    }
    return in_set;
}

// --- field export --------------------------------------------------------------

void export_fields(const Mesh& mesh, const MixedSpace& space, const MaterialTable& materials,
                   MagneticUnknown unknown, const Eigen::VectorXd& state,
                   const std::string& path) {
    // Node-averaged magnitudes of the spatial flux and magnetization. The
    // gradient fields are discontinuous across cells, so average the per-cell
    // nodal traces.
    const int nn = mesh.n_nodes();
    std::vector<double> b_mag(nn, 0.0), m_mag(nn, 0.0);
    std::vector<int> hits(nn, 0);
    static constexpr double kNodal[6][2] = {{0, 0}, {1, 0}, {0, 1},
                                            {0.5, 0}, {0.5, 0.5}, {0, 0.5}};
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const MaterialModel& mat = materials.material(mesh.region[c]);
        for (int k = 0; k < 6; ++k) {
            const PointFields pt =
                eval_point(mesh, space, state, unknown, c, kNodal[k][0], kNodal[k][1]);
            const Vec2 h = spatial_h(pt, unknown, mat);
            const double m = magnetization_magnitude(h.norm(), mat);
            const int n = mesh.cells[c][k];
            b_mag[n] += kMu0 * (h.norm() + m);
            m_mag[n] += m;
            ++hits[n];
        }
    }
    for (int n = 0; n < nn; ++n) {
        if (hits[n] == 0) continue;
        b_mag[n] /= hits[n];
        m_mag[n] /= hits[n];
    }

    std::ofstream out(path);
    if (!out) throw PostprocError("cannot open '" + path + "' for writing");
    out << "# vtk DataFile Version 3.0\n";
    out << "magelas field export\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    char buf[256];
    out << "POINTS " << nn << " double\n";
    for (int n = 0; n < nn; ++n) {
        const double x = mesh.nodes[n].x() + state[space.u_dof(n, 0)];
        const double y = mesh.nodes[n].y() + state[space.u_dof(n, 1)];
        std::snprintf(buf, sizeof buf, "%.9g %.9g 0\n", x, y);
        out << buf;
    }
    const int nc = mesh.n_cells();
    static constexpr int kSub[4][3] = {{0, 3, 5}, {3, 1, 4}, {5, 4, 2}, {3, 4, 5}};
    out << "CELLS " << 4 * nc << " " << 16 * nc << "\n";
    for (int c = 0; c < nc; ++c)
        for (const auto& s : kSub)
            out << "3 " << mesh.cells[c][s[0]] << " " << mesh.cells[c][s[1]] << " "
                << mesh.cells[c][s[2]] << "\n";
    out << "CELL_TYPES " << 4 * nc << "\n";
    for (int i = 0; i < 4 * nc; ++i) out << "5\n";

    out << "POINT_DATA " << nn << "\n";
    out << "VECTORS displacement double\n";
    for (int n = 0; n < nn; ++n) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g 0\n", state[space.u_dof(n, 0)],
                      state[space.u_dof(n, 1)]);
        out << buf;
    }
    const char* pot_name =
        unknown == MagneticUnknown::PotentialH ? "potential" : "flux_potential";
    out << "SCALARS " << pot_name << " double 1\nLOOKUP_TABLE default\n";
    for (int n = 0; n < nn; ++n) {
        std::snprintf(buf, sizeof buf, "%.9g\n", state[space.p_dof(n)]);
        out << buf;
    }
    out << "SCALARS b_magnitude double 1\nLOOKUP_TABLE default\n";
    for (int n = 0; n < nn; ++n) {
        std::snprintf(buf, sizeof buf, "%.9g\n", b_mag[n]);
        out << buf;
    }
    out << "SCALARS m_magnitude double 1\nLOOKUP_TABLE default\n";
    for (int n = 0; n < nn; ++n) {
        std::snprintf(buf, sizeof buf, "%.9g\n", m_mag[n]);
        out << buf;
    }
    out << "CELL_DATA " << 4 * nc << "\n";
    out << "SCALARS region int 1\nLOOKUP_TABLE default\n";
    for (int c = 0; c < nc; ++c)
        for (int i = 0; i < 4; ++i) out << static_cast<int>(mesh.region[c]) << "\n";
    if (!out) throw PostprocError("writing '" + path + "' failed");
}

// --- CSV tables ------------------------------------------------------------------

void write_csv(const CsvTable& table, const std::string& path) {
    for (const auto& row : table.rows)
        if (row.size() != table.columns.size())
            throw PostprocError("CSV row width differs from the header");
    std::ofstream out(path);
    if (!out) throw PostprocError("cannot open '" + path + "' for writing");
    for (const auto& meta : table.metadata) out << "# " << meta << "\n";
    for (size_t i = 0; i < table.columns.size(); ++i)
        out << table.columns[i] << (i + 1 < table.columns.size() ? "," : "");
    out << "\n";
    char buf[64];
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out << buf << (i + 1 < row.size() ? "," : "");
        }
        out << "\n";
    }
    if (!out) throw PostprocError("writing '" + path + "' failed");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PostprocError("cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            size_t start = 1;
            if (start < line.size() && line[start] == ' ') ++start;
            table.metadata.push_back(line.substr(start));
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        if (!header_seen) {
            table.columns = fields;
            header_seen = true;
            continue;
        }
        if (fields.size() != table.columns.size())
            throw PostprocError("CSV row width differs from the header in '" + path + "'");
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            try {
                size_t used = 0;
                row.push_back(std::stod(f, &used));
                if (used != f.size()) throw std::invalid_argument(f);
            } catch (const std::exception&) {
                throw PostprocError("CSV field '" + f + "' is not a number in '" + path +
                                    "'");
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// --- convergence rates -----------------------------------------------------------

ConvergenceSeries convergence_rates(const std::vector<std::pair<int, double>>& series,
                                    double reference, double floor) {
    ConvergenceSeries out;
    const double floor_abs =
        reference != 0.0 ? std::abs(reference) * floor : floor;
    int prev_dofs = 0;
    for (const auto& [dofs, value] : series) {
        if (dofs <= prev_dofs)
            throw PostprocError("refinement series must have strictly increasing dofs");
        prev_dofs = dofs;
        ConvergenceLevel lvl;
        lvl.dofs = dofs;
        lvl.value = value;
        lvl.error = std::abs(value - reference);
        lvl.saturated = lvl.error <= floor_abs;
        out.levels.push_back(lvl);
    }
    // Pointwise orders: error ~ h^p with h ~ dofs^(-1/2).
    for (size_t k = 1; k < out.levels.size(); ++k) {
        auto& cur = out.levels[k];
        const auto& prv = out.levels[k - 1];
        if (cur.saturated || prv.saturated || cur.error == 0.0 || prv.error == 0.0) continue;
        const double log_h_ratio =
            -0.5 * std::log(static_cast<double>(cur.dofs) / prv.dofs);
        cur.order = std::log(cur.error / prv.error) / log_h_ratio;
    }
    // Least-squares slope over the non-saturated levels.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& lvl : out.levels) {
        if (lvl.saturated || lvl.error == 0.0) continue;
        const double lx = -0.5 * std::log(static_cast<double>(lvl.dofs));
        const double ly = std::log(lvl.error);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++m;
    }
    if (m >= 2 && m * sxx - sx * sx > 0.0) out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return out;
}

}  // namespace magelas
