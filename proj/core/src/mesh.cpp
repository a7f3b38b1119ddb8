#include "magelas/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "magelas/quadrature.hpp"
#include "magelas/shape.hpp"

namespace magelas {

// --- tags --------------------------------------------------------------------

const char* to_string(RegionTag t) {
    switch (t) {
        case RegionTag::Magnetic: return "MAGNETIC";
        case RegionTag::NonmagneticSolid: return "NONMAGNETIC_SOLID";
        case RegionTag::Air: return "AIR";
    }
    return "?";
}

const char* to_string(FacetTag t) {
    switch (t) {
        case FacetTag::Outer: return "OUTER";
        case FacetTag::SymmetryX: return "SYMMETRY_X";
        case FacetTag::SymmetryY: return "SYMMETRY_Y";
        case FacetTag::SolidAirInterface: return "SOLID_AIR_INTERFACE";
        case FacetTag::MagneticNonmagneticInterface: return "MAGNETIC_NONMAGNETIC_INTERFACE";
    }
    return "?";
}

RegionTag region_tag_from_string(const std::string& s) {
    if (s == "MAGNETIC") return RegionTag::Magnetic;
    if (s == "NONMAGNETIC_SOLID") return RegionTag::NonmagneticSolid;
    if (s == "AIR") return RegionTag::Air;
    throw MeshError("unknown region tag '" + s + "'");
}

FacetTag facet_tag_from_string(const std::string& s) {
    if (s == "OUTER") return FacetTag::Outer;
    if (s == "SYMMETRY_X") return FacetTag::SymmetryX;
    if (s == "SYMMETRY_Y") return FacetTag::SymmetryY;
    if (s == "SOLID_AIR_INTERFACE") return FacetTag::SolidAirInterface;
    if (s == "MAGNETIC_NONMAGNETIC_INTERFACE") return FacetTag::MagneticNonmagneticInterface;
    throw MeshError("unknown facet tag '" + s + "'");
}

// --- curve descriptors ---------------------------------------------------------

CurveDescriptor CurveDescriptor::segment(const Vec2& a, const Vec2& b) {
    CurveDescriptor c;
    c.kind = Kind::Segment;
    c.a = a;
    c.b = b;
    return c;
}

CurveDescriptor CurveDescriptor::circle(const Vec2& center, double radius) {
    CurveDescriptor c;
    c.kind = Kind::CircleArc;
    c.center = center;
    c.radius = radius;
    return c;
}

Vec2 CurveDescriptor::project(const Vec2& p) const {
    if (kind == Kind::CircleArc) {
        const Vec2 d = p - center;
        const double n = d.norm();
        if (n == 0.0) return center + Vec2(radius, 0.0);
        return center + d * (radius / n);
    }
    const Vec2 t = b - a;
    const double len2 = t.squaredNorm();
    if (len2 == 0.0) return a;
    const double s = (p - a).dot(t) / len2;
    return a + s * t;
}

// --- connectivity ----------------------------------------------------------------

void Mesh::rebuild_connectivity() {
    edge_use_.clear();
    edge_use_.reserve(cells.size() * 2);
    for (int c = 0; c < n_cells(); ++c) {
        for (int e = 0; e < 3; ++e) {
            const int mid = cells[c][3 + e];
            auto [it, inserted] = edge_use_.try_emplace(mid, std::array<int, 2>{-1, -1});
            auto& slots = it->second;
            if (slots[0] < 0) slots[0] = 3 * c + e;
            else if (slots[1] < 0) slots[1] = 3 * c + e;
            else
                throw MeshError("edge with mid node " + std::to_string(mid) +
                                " shared by more than two cells");
        }
    }
}

int Mesh::neighbor(int cell, int local_edge) const {
    const int mid = cells[cell][3 + local_edge];
    const auto it = edge_use_.find(mid);
    if (it == edge_use_.end()) throw MeshError("neighbor(): connectivity not built");
    for (const int enc : it->second) {
        if (enc >= 0 && enc / 3 != cell) return enc / 3;
    }
    return -1;
}

double Mesh::geometry_at(int cell, double xi, double eta, Vec2* x, Mat2* jac) const {
    double N[6], dN[6][2];
    p2_shape(xi, eta, N, dN);
    Vec2 pos = Vec2::Zero();
    Mat2 J = Mat2::Zero();
    const auto& cn = cells[cell];
    for (int i = 0; i < 6; ++i) {
        const Vec2& p = nodes[cn[i]];
        pos += N[i] * p;
        J(0, 0) += p.x() * dN[i][0];
        J(0, 1) += p.x() * dN[i][1];
        J(1, 0) += p.y() * dN[i][0];
        J(1, 1) += p.y() * dN[i][1];
    }
    if (x) *x = pos;
    if (jac) *jac = J;
    return J.determinant();
}

double Mesh::max_cell_extent() const {
    double ext = 0.0;
    for (const auto& cn : cells) {
        Vec2 lo = nodes[cn[0]], hi = nodes[cn[0]];
        for (int i = 1; i < 6; ++i) {
            lo = lo.cwiseMin(nodes[cn[i]]);
            hi = hi.cwiseMax(nodes[cn[i]]);
        }
        ext = std::max(ext, (hi - lo).norm());
    }
    return ext;
}

// --- native format ---------------------------------------------------------------

namespace {

[[noreturn]] void bad_line(int lineno, const std::string& what) {
    throw MeshError("mesh file line " + std::to_string(lineno) + ": " + what);
}

struct LineReader {
    std::istream& in;
    int lineno = 0;
    bool next(std::string& out) {
        while (std::getline(in, out)) {
            ++lineno;
            const auto pos = out.find('#');
            if (pos != std::string::npos) out.erase(pos);
            // trim
            const auto b = out.find_first_not_of(" \t\r");
            if (b == std::string::npos) continue;
            const auto e = out.find_last_not_of(" \t\r");
            out = out.substr(b, e - b + 1);
            return true;
        }
        return false;
    }
};

}  // namespace

Mesh read_native_mesh(std::istream& in) {
    LineReader rd{in};
    std::string line;
    if (!rd.next(line)) throw MeshError("empty mesh file");
    {
        std::istringstream ss(line);
        std::string magic;
        int version = 0;
        ss >> magic >> version;
        if (magic != "magelas-mesh" || version != 1)
            bad_line(rd.lineno, "expected header 'magelas-mesh 1'");
    }

    Mesh m;
    bool have_nodes = false, have_cells = false;
    while (rd.next(line)) {
        std::istringstream ss(line);
        std::string section;
        long count = 0;
        ss >> section >> count;
        if (ss.fail() || count < 0) bad_line(rd.lineno, "expected '<SECTION> <count>'");

        if (section == "NODES") {
            m.nodes.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!rd.next(line)) bad_line(rd.lineno, "unexpected end of NODES");
                std::istringstream ns(line);
                double x, y;
                ns >> x >> y;
                if (ns.fail()) bad_line(rd.lineno, "bad node coordinates");
                m.nodes.emplace_back(x, y);
            }
            have_nodes = true;
        } else if (section == "CELLS") {
            m.cells.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!rd.next(line)) bad_line(rd.lineno, "unexpected end of CELLS");
                std::istringstream cs(line);
                std::array<int, 6> c;
                for (int k = 0; k < 6; ++k) cs >> c[k];
                if (cs.fail()) bad_line(rd.lineno, "bad cell connectivity");
                m.cells.push_back(c);
            }
            have_cells = true;
        } else if (section == "REGIONS") {
            if (count != m.n_cells())
                bad_line(rd.lineno, "REGIONS count does not match CELLS");
            m.region.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!rd.next(line)) bad_line(rd.lineno, "unexpected end of REGIONS");
                try {
                    m.region.push_back(region_tag_from_string(line));
                } catch (const MeshError& e) {
                    bad_line(rd.lineno, e.what());
                }
            }
        } else if (section == "FACETS") {
            m.facets.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!rd.next(line)) bad_line(rd.lineno, "unexpected end of FACETS");
                std::istringstream fs(line);
                Facet f;
                std::string tag;
                fs >> f.cell >> f.local_edge >> tag >> f.curve;
                if (fs.fail()) bad_line(rd.lineno, "bad facet record");
                try {
                    f.tag = facet_tag_from_string(tag);
                } catch (const MeshError& e) {
                    bad_line(rd.lineno, e.what());
                }
                m.facets.push_back(f);
            }
        } else if (section == "GEOMETRY") {
            m.curves.reserve(count);
            for (long i = 0; i < count; ++i) {
                if (!rd.next(line)) bad_line(rd.lineno, "unexpected end of GEOMETRY");
                std::istringstream gs(line);
                std::string kind;
                gs >> kind;
                if (kind == "CIRCLE") {
                    double cx, cy, r;
                    gs >> cx >> cy >> r;
                    if (gs.fail() || r <= 0) bad_line(rd.lineno, "bad CIRCLE record");
                    m.curves.push_back(CurveDescriptor::circle({cx, cy}, r));
                } else if (kind == "SEGMENT") {
                    double ax, ay, bx, by;
                    gs >> ax >> ay >> bx >> by;
                    if (gs.fail()) bad_line(rd.lineno, "bad SEGMENT record");
                    m.curves.push_back(CurveDescriptor::segment({ax, ay}, {bx, by}));
                } else {
                    bad_line(rd.lineno, "unknown geometry kind '" + kind + "'");
                }
            }
        } else {
            bad_line(rd.lineno, "unknown section '" + section + "'");
        }
    }
    if (!have_nodes || !have_cells) throw MeshError("mesh file missing NODES or CELLS");
    if (m.region.empty()) m.region.assign(m.n_cells(), RegionTag::Air);
    m.rebuild_connectivity();
    validate_mesh(m);
    return m;
}

void write_native_mesh(const Mesh& m, std::ostream& out) {
    out << "magelas-mesh 1\n";
    out << std::setprecision(17);
    out << "NODES " << m.n_nodes() << "\n";
    for (const auto& p : m.nodes) out << p.x() << " " << p.y() << "\n";
    out << "CELLS " << m.n_cells() << "\n";
    for (const auto& c : m.cells) {
        for (int k = 0; k < 6; ++k) out << c[k] << (k == 5 ? '\n' : ' ');
    }
    out << "REGIONS " << m.n_cells() << "\n";
    for (const auto r : m.region) out << to_string(r) << "\n";
    out << "FACETS " << m.facets.size() << "\n";
    for (const auto& f : m.facets)
        out << f.cell << " " << f.local_edge << " " << to_string(f.tag) << " " << f.curve
            << "\n";
    out << "GEOMETRY " << m.curves.size() << "\n";
    for (const auto& c : m.curves) {
        if (c.kind == CurveDescriptor::Kind::CircleArc)
            out << "CIRCLE " << c.center.x() << " " << c.center.y() << " " << c.radius
                << "\n";
        else
            out << "SEGMENT " << c.a.x() << " " << c.a.y() << " " << c.b.x() << " "
                << c.b.y() << "\n";
    }
}

// --- MSH v2.2 import ------------------------------------------------------------

Mesh read_msh2_mesh(std::istream& in, const MshTagMap& tags) {
    std::string line;
    auto expect = [&](const std::string& want) {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line == want) return;
            if (!line.empty() && line[0] == '$')
                throw MeshError("msh: expected " + want + ", found " + line);
        }
        throw MeshError("msh: missing " + want);
    };

    expect("$MeshFormat");
    std::getline(in, line);
    {
        std::istringstream ss(line);
        double version = 0;
        int file_type = -1, data_size = 0;
        ss >> version >> file_type >> data_size;
        if (ss.fail() || version < 2.0 || version >= 3.0 || file_type != 0)
            throw MeshError("msh: unsupported format (need ASCII v2.x), got '" + line + "'");
    }
    expect("$EndMeshFormat");

    expect("$Nodes");
    long n_nodes = 0;
    in >> n_nodes;
    if (!in || n_nodes <= 0) throw MeshError("msh: bad node count");
    std::unordered_map<long, int> node_id;
    Mesh m;
    m.nodes.reserve(n_nodes);
    for (long i = 0; i < n_nodes; ++i) {
        long id;
        double x, y, z;
        in >> id >> x >> y >> z;
        if (!in) throw MeshError("msh: bad node record");
        node_id[id] = m.n_nodes();
        m.nodes.emplace_back(x, y);
    }
    std::getline(in, line);
    expect("$EndNodes");

    expect("$Elements");
    long n_elems = 0;
    in >> n_elems;
    if (!in || n_elems < 0) throw MeshError("msh: bad element count");
    struct BoundaryLine {
        int physical;
        std::array<int, 3> n;  // end, end, mid
    };
    std::vector<BoundaryLine> blines;
    for (long i = 0; i < n_elems; ++i) {
        long id;
        int type, ntags;
        in >> id >> type >> ntags;
        if (!in) throw MeshError("msh: bad element header");
        std::vector<int> etags(ntags);
        for (int& t : etags) in >> t;
        const int physical = ntags > 0 ? etags[0] : 0;
        auto mapped = [&](long raw) {
            const auto it = node_id.find(raw);
            if (it == node_id.end())
                throw MeshError("msh: element references unknown node " + std::to_string(raw));
            return it->second;
        };
        if (type == 9) {  // 6-node triangle; gmsh order matches ours
            std::array<int, 6> c;
            for (int k = 0; k < 6; ++k) {
                long raw;
                in >> raw;
                c[k] = mapped(raw);
            }
            const auto rit = tags.surfaces.find(physical);
            if (rit == tags.surfaces.end())
                throw MeshError("msh: surface physical tag " + std::to_string(physical) +
                                " missing from the tag map");
            m.cells.push_back(c);
            m.region.push_back(rit->second);
        } else if (type == 8) {  // 3-node second-order line
            BoundaryLine bl;
            bl.physical = physical;
            for (int k = 0; k < 3; ++k) {
                long raw;
                in >> raw;
                bl.n[k] = mapped(raw);
            }
            blines.push_back(bl);
        } else if (type == 15 || type == 1 || type == 2) {
            // points, linear lines/triangles: skip payload
            const int nn = (type == 15) ? 1 : (type == 1 ? 2 : 3);
            long raw;
            for (int k = 0; k < nn; ++k) in >> raw;
        } else {
            throw MeshError("msh: unsupported element type " + std::to_string(type) +
                            " (only 6-node triangles and 3-node lines)");
        }
        if (!in) throw MeshError("msh: truncated element record");
    }
    std::getline(in, line);
    expect("$EndElements");
    if (m.cells.empty()) throw MeshError("msh: no 6-node triangles found");

    m.rebuild_connectivity();

    // Attach boundary lines as facets; anchor interface facets at the cell
    // with the "outermost" region so scheme kernels have a deterministic side.
    std::unordered_map<int, std::array<int, 2>> edge_of;  // mid node -> encoded uses
    for (int c = 0; c < m.n_cells(); ++c)
        for (int e = 0; e < 3; ++e) {
            auto [it, inserted] =
                edge_of.try_emplace(m.cells[c][3 + e], std::array<int, 2>{-1, -1});
            auto& u = it->second;
            (u[0] < 0 ? u[0] : u[1]) = 3 * c + e;
        }
    for (const auto& bl : blines) {
        const auto fit = tags.lines.find(bl.physical);
        if (fit == tags.lines.end())
            throw MeshError("msh: line physical tag " + std::to_string(bl.physical) +
                            " missing from the tag map");
        const auto eit = edge_of.find(bl.n[2]);
        if (eit == edge_of.end())
            throw MeshError("msh: boundary line does not match any cell edge");
        int use = eit->second[0];
        if (eit->second[1] >= 0) {
            const int r0 = static_cast<int>(m.region[eit->second[0] / 3]);
            const int r1 = static_cast<int>(m.region[eit->second[1] / 3]);
            use = (r1 > r0) ? eit->second[1] : eit->second[0];
        }
        Facet f;
        f.cell = use / 3;
        f.local_edge = use % 3;
        f.tag = fit->second;
        f.curve = -1;
        const auto corners = m.facet_corners(f);
        if (!((corners[0] == bl.n[0] && corners[1] == bl.n[1]) ||
              (corners[0] == bl.n[1] && corners[1] == bl.n[0])))
            throw MeshError("msh: boundary line nodes disagree with the matched cell edge");
        m.facets.push_back(f);
    }
    validate_mesh(m);
    return m;
}

Mesh load_mesh(const std::string& path, MeshFormat format, const MshTagMap* msh_tags) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file '" + path + "'");
    if (format == MeshFormat::Auto) {
        format = path.size() > 4 && path.substr(path.size() - 4) == ".msh"
                     ? MeshFormat::Msh2
                     : MeshFormat::Native;
    }
    if (format == MeshFormat::Msh2) {
        static const MshTagMap default_tags = {
            {{1, RegionTag::Magnetic}, {2, RegionTag::NonmagneticSolid}, {3, RegionTag::Air}},
            {{10, FacetTag::Outer},
             {11, FacetTag::SymmetryX},
             {12, FacetTag::SymmetryY},
             {13, FacetTag::SolidAirInterface},
             {14, FacetTag::MagneticNonmagneticInterface}},
        };
        return read_msh2_mesh(in, msh_tags ? *msh_tags : default_tags);
    }
    return read_native_mesh(in);
}

// --- validation / measures --------------------------------------------------------

void validate_mesh(const Mesh& m) {
    const int nn = m.n_nodes();
    if (m.region.size() != m.cells.size())
        throw MeshError("region list size does not match cell count");
    std::map<std::pair<int, int>, int> edge_mid;
    for (int c = 0; c < m.n_cells(); ++c) {
        for (int k = 0; k < 6; ++k) {
            const int v = m.cells[c][k];
            if (v < 0 || v >= nn)
                throw MeshError("cell " + std::to_string(c) + ": node index out of range");
        }
        for (int e = 0; e < 3; ++e) {
            const int a = m.cells[c][e], b = m.cells[c][(e + 1) % 3];
            const int mid = m.cells[c][3 + e];
            const auto key = std::minmax(a, b);
            auto [it, inserted] = edge_mid.emplace(key, mid);
            if (!inserted && it->second != mid)
                throw MeshError("cell " + std::to_string(c) +
                                ": mid-edge node disagrees with neighbor (non-conforming)");
        }
    }
    const auto& rule = triangle_rule(6);
    for (int c = 0; c < m.n_cells(); ++c) {
        for (const auto& qp : rule.points) {
            if (m.geometry_at(c, qp.x, qp.y) <= 0.0)
                throw MeshError("cell " + std::to_string(c) +
                                ": nonpositive geometric Jacobian");
        }
    }
    // facet sanity + curve snap
    double scale = 0.0;
    for (const auto& p : m.nodes) scale = std::max(scale, p.norm());
    const double tol = 1e-10 * std::max(scale, 1e-30);
    for (const auto& f : m.facets) {
        if (f.cell < 0 || f.cell >= m.n_cells() || f.local_edge < 0 || f.local_edge > 2)
            throw MeshError("facet references invalid cell/edge");
        if (f.curve >= static_cast<int>(m.curves.size()))
            throw MeshError("facet references unknown curve descriptor");
        if (f.curve >= 0) {
            const Vec2& p = m.nodes[m.facet_mid(f)];
            if ((p - m.curves[f.curve].project(p)).norm() > tol)
                throw MeshError("facet mid node off its geometry curve (cell " +
                                std::to_string(f.cell) + ")");
        }
    }
}

double region_area(const Mesh& m, std::optional<RegionTag> region) {
    const auto& rule = triangle_rule(6);
    double area = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) {
        if (region && m.region[c] != *region) continue;
        for (const auto& qp : rule.points) area += qp.w * m.geometry_at(c, qp.x, qp.y);
    }
    return area;
}

// --- refinement -------------------------------------------------------------------

Mesh refine_uniform(const Mesh& in) {
    Mesh out;
    out.curves = in.curves;
    out.nodes = in.nodes;
    out.cells.reserve(in.n_cells() * 4);
    out.region.reserve(in.n_cells() * 4);

    // Quarter-point node on a parent edge, keyed by (edge mid node, adjacent
    // corner). Positions come from the parent edge's own quadratic geometry,
    // so both neighbors derive the identical node.
    std::unordered_map<long long, int> quarter;
    auto quarter_node = [&](int corner, int mid, int far) {
        const long long key = static_cast<long long>(mid) * in.n_nodes() + corner;
        auto it = quarter.find(key);
        if (it != quarter.end()) return it->second;
        double N[3], dN[3];
        p2_line_shape(0.25, N, dN);  // parameter measured from `corner`
        const Vec2 p = N[0] * in.nodes[corner] + N[1] * in.nodes[mid] + N[2] * in.nodes[far];
        const int id = out.n_nodes();
        out.nodes.push_back(p);
        quarter.emplace(key, id);
        return id;
    };

    std::vector<std::array<int, 3>> interior(in.n_cells());  // A,B,C per parent
    auto cell_point = [&](int c, double xi, double eta) {
        Vec2 x;
        in.geometry_at(c, xi, eta, &x);
        const int id = out.n_nodes();
        out.nodes.push_back(x);
        return id;
    };

    for (int c = 0; c < in.n_cells(); ++c) {
        const auto& p = in.cells[c];
        const int v0 = p[0], v1 = p[1], v2 = p[2];
        const int m01 = p[3], m12 = p[4], m20 = p[5];
        const int q0a = quarter_node(v0, m01, v1), q0b = quarter_node(v1, m01, v0);
        const int q1a = quarter_node(v1, m12, v2), q1b = quarter_node(v2, m12, v1);
        const int q2a = quarter_node(v2, m20, v0), q2b = quarter_node(v0, m20, v2);
        const int iA = cell_point(c, 0.25, 0.25);
        const int iB = cell_point(c, 0.50, 0.25);
        const int iC = cell_point(c, 0.25, 0.50);
        interior[c] = {iA, iB, iC};

        out.cells.push_back({v0, m01, m20, q0a, iA, q2b});
        out.cells.push_back({m01, v1, m12, q0b, q1a, iB});
        out.cells.push_back({m20, m12, v2, iC, q1b, q2a});
        out.cells.push_back({m01, m12, m20, iB, iC, iA});
        for (int k = 0; k < 4; ++k) out.region.push_back(in.region[c]);
    }

    // Child facets: parent local edge e -> (child index, child local edge) x2.
    static const int child_facets[3][2][2] = {
        {{0, 0}, {1, 0}},
        {{1, 1}, {2, 1}},
        {{2, 2}, {0, 2}},
    };
    out.facets.reserve(in.facets.size() * 2);
    for (const auto& f : in.facets) {
        for (const auto& cf : child_facets[f.local_edge]) {
            Facet g;
            g.cell = 4 * f.cell + cf[0];
            g.local_edge = cf[1];
            g.tag = f.tag;
            g.curve = f.curve;
            if (g.curve >= 0) {
                const int mid = out.cells[g.cell][3 + g.local_edge];
                out.nodes[mid] = out.curves[g.curve].project(out.nodes[mid]);
            }
            out.facets.push_back(g);
        }
    }

    out.rebuild_connectivity();
    return out;
}

// --- facet derivation for generators -----------------------------------------------

namespace {

FacetTag interface_tag(RegionTag a, RegionTag b) {
    const bool has_air = a == RegionTag::Air || b == RegionTag::Air;
    return has_air ? FacetTag::SolidAirInterface : FacetTag::MagneticNonmagneticInterface;
}

// Classifier: given edge endpoints and mid point plus adjacent regions,
// return tag + curve id, or nothing to leave the edge untagged.
using FacetClassifier = std::function<std::optional<std::pair<FacetTag, int>>(
    const Vec2&, const Vec2&, const Vec2&, RegionTag, std::optional<RegionTag>)>;

void derive_facets(Mesh& m, const FacetClassifier& classify) {
    m.facets.clear();
    m.rebuild_connectivity();
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edges;
    for (int c = 0; c < m.n_cells(); ++c)
        for (int e = 0; e < 3; ++e) {
            const auto key = std::minmax(m.cells[c][e], m.cells[c][(e + 1) % 3]);
            edges[key].push_back({c, e});
        }
    for (const auto& [key, uses] : edges) {
        std::optional<RegionTag> other;
        int use_c = uses[0].first, use_e = uses[0].second;
        if (uses.size() == 2) {
            const RegionTag r0 = m.region[uses[0].first], r1 = m.region[uses[1].first];
            if (r0 == r1) continue;  // interior, same material: not a facet
            // anchor at the outermost region (air over solid over magnetic)
            if (static_cast<int>(r1) > static_cast<int>(r0)) {
                use_c = uses[1].first;
                use_e = uses[1].second;
                other = r0;
            } else {
                other = r1;
            }
        }
        const int a = m.cells[use_c][use_e], b = m.cells[use_c][(use_e + 1) % 3];
        const int mid = m.cells[use_c][3 + use_e];
        const auto res =
            classify(m.nodes[a], m.nodes[mid], m.nodes[b], m.region[use_c], other);
        if (!res) continue;
        Facet f;
        f.cell = use_c;
        f.local_edge = use_e;
        f.tag = res->first;
        f.curve = res->second;
        m.facets.push_back(f);
    }
}

}  // namespace

// --- circle-in-square generator -----------------------------------------------------

namespace {

// Ring/sector layout of the quarter geometry. 20 concentric rings: 8 through
// the disk (radius R at ring 8), 12 geometrically graded rings blending from
// the circle to the outer square. Sector counts 3,3,6,...,6 with one 1-to-2
// transition band; this yields 222 cells and 46 boundary edges at level 0.
struct RingLayout {
    double R, half;
    static constexpr int n_disk = 8, n_air = 12;

    int sectors(int ring) const { return ring <= 2 ? 3 : 6; }

    Vec2 point(int ring, double theta) const {
        double r, blend = 1.0;
        if (ring <= n_disk) {
            r = R * ring / n_disk;
        } else {
            const int k = ring - n_disk;
            const double rho = std::pow(half / R, 1.0 / n_air);
            const double w = std::pow(static_cast<double>(k) / n_air, 2.0);
            const double c = std::cos(theta), s = std::sin(theta);
            const double rsq = 1.0 / std::max(c, s);
            r = R * std::pow(rho, k);
            blend = (1.0 - w) + w * rsq;
        }
        Vec2 p(r * blend * std::cos(theta), r * blend * std::sin(theta));
        if (theta == 0.0) p.y() = 0.0;
        if (theta == M_PI / 2) p.x() = 0.0;
        return p;
    }
};

Mesh circle_quarter(double R, double half, RegionTag outside) {
    const RingLayout lay{R, half};
    constexpr int n_rings = RingLayout::n_disk + RingLayout::n_air;

    Mesh m;
    std::vector<std::vector<int>> ring_nodes(n_rings + 1);
    std::vector<std::vector<double>> ring_theta(n_rings + 1);
    // ring 0: the center
    m.nodes.emplace_back(0.0, 0.0);
    ring_nodes[0] = {0};
    ring_theta[0] = {0.0};
    for (int ring = 1; ring <= n_rings; ++ring) {
        const int s = lay.sectors(ring);
        for (int j = 0; j <= s; ++j) {
            const double theta = j == s ? M_PI / 2 : (M_PI / 2) * j / s;
            ring_nodes[ring].push_back(m.n_nodes());
            ring_theta[ring].push_back(theta);
            m.nodes.push_back(lay.point(ring, theta));
        }
    }

    // Node metadata so edge midpoints on a ring follow the ring curve.
    std::vector<int> node_ring(m.n_nodes(), -1);
    std::vector<double> node_theta(m.n_nodes(), 0.0);
    for (int ring = 0; ring <= n_rings; ++ring)
        for (size_t j = 0; j < ring_nodes[ring].size(); ++j) {
            node_ring[ring_nodes[ring][j]] = ring;
            node_theta[ring_nodes[ring][j]] = ring_theta[ring][j];
        }

    std::map<std::pair<int, int>, int> edge_mid;
    auto mid_node = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = edge_mid.find(key);
        if (it != edge_mid.end()) return it->second;
        Vec2 p;
        if (node_ring[a] == node_ring[b] && node_ring[a] > 0) {
            p = lay.point(node_ring[a], 0.5 * (node_theta[a] + node_theta[b]));
        } else {
            p = 0.5 * (m.nodes[a] + m.nodes[b]);
        }
        const int id = m.n_nodes();
        m.nodes.push_back(p);
        edge_mid.emplace(key, id);
        return id;
    };
    auto add_cell = [&](int a, int b, int c, RegionTag r) {
        m.cells.push_back({a, b, c, mid_node(a, b), mid_node(b, c), mid_node(c, a)});
        m.region.push_back(r);
    };

    for (int ring = 1; ring <= n_rings; ++ring) {
        const RegionTag r = ring <= RingLayout::n_disk ? RegionTag::Magnetic : outside;
        const auto& outer = ring_nodes[ring];
        const auto& inner = ring_nodes[ring - 1];
        if (ring == 1) {
            for (int j = 0; j < lay.sectors(1); ++j)
                add_cell(inner[0], outer[j], outer[j + 1], r);
        } else if (lay.sectors(ring) == lay.sectors(ring - 1)) {
            for (int j = 0; j < lay.sectors(ring); ++j) {
                add_cell(inner[j], outer[j], outer[j + 1], r);
                add_cell(inner[j], outer[j + 1], inner[j + 1], r);
            }
        } else {  // 1-to-2 sector transition
            for (int j = 0; j < lay.sectors(ring - 1); ++j) {
                add_cell(inner[j], outer[2 * j], outer[2 * j + 1], r);
                add_cell(inner[j], outer[2 * j + 1], inner[j + 1], r);
                add_cell(inner[j + 1], outer[2 * j + 1], outer[2 * j + 2], r);
            }
        }
    }
    return m;
}

void classify_circle_square(Mesh& m, double R, double half, bool full) {
    m.curves.clear();
    m.curves.push_back(CurveDescriptor::circle({0, 0}, R));  // 0
    const int circle = 0;
    std::vector<int> outer_segs;
    auto add_seg = [&](Vec2 a, Vec2 b) {
        m.curves.push_back(CurveDescriptor::segment(a, b));
        return static_cast<int>(m.curves.size()) - 1;
    };
    const int right = add_seg({half, full ? -half : 0.0}, {half, half});
    const int top = add_seg({full ? -half : 0.0, half}, {half, half});
    int left = -1, bottom = -1, sym_x = -1, sym_y = -1;
    if (full) {
        left = add_seg({-half, -half}, {-half, half});
        bottom = add_seg({-half, -half}, {half, -half});
    } else {
        sym_x = add_seg({0, 0}, {half, 0});
        sym_y = add_seg({0, 0}, {0, half});
    }

    const double tol = 1e-9 * half;
    derive_facets(m, [&](const Vec2& a, const Vec2& mid, const Vec2& b, RegionTag anchored,
                         std::optional<RegionTag> other)
                         -> std::optional<std::pair<FacetTag, int>> {
        if (other) return std::make_pair(interface_tag(anchored, *other), circle);
        auto on_line = [&](int axis, double v) {
            return std::abs(a[axis] - v) < tol && std::abs(b[axis] - v) < tol &&
                   std::abs(mid[axis] - v) < tol;
        };
        if (on_line(0, half)) return std::make_pair(FacetTag::Outer, right);
        if (on_line(1, half)) return std::make_pair(FacetTag::Outer, top);
        if (full) {
            if (on_line(0, -half)) return std::make_pair(FacetTag::Outer, left);
            if (on_line(1, -half)) return std::make_pair(FacetTag::Outer, bottom);
        } else {
            if (on_line(1, 0.0)) return std::make_pair(FacetTag::SymmetryX, sym_x);
            if (on_line(0, 0.0)) return std::make_pair(FacetTag::SymmetryY, sym_y);
        }
        throw MeshError("circle-in-square generator: unclassifiable boundary edge");
    });
}

// Mirror a mesh across coordinate plane `axis` = 0 (x -> -x) or 1 (y -> -y),
// gluing nodes on the plane. Facets are dropped; re-derive afterwards.
Mesh mirror_merge(const Mesh& in, int axis) {
    Mesh out;
    out.nodes = in.nodes;
    out.cells = in.cells;
    out.region = in.region;
    double scale = 0.0;
    for (const auto& p : in.nodes) scale = std::max(scale, p.norm());
    const double tol = 1e-12 * std::max(scale, 1e-30);

    std::vector<int> mirrored(in.n_nodes());
    for (int i = 0; i < in.n_nodes(); ++i) {
        if (std::abs(in.nodes[i][axis]) <= tol) {
            mirrored[i] = i;
        } else {
            Vec2 p = in.nodes[i];
            p[axis] = -p[axis];
            mirrored[i] = out.n_nodes();
            out.nodes.push_back(p);
        }
    }
    for (int c = 0; c < in.n_cells(); ++c) {
        const auto& p = in.cells[c];
        // swap corners 1 and 2 to restore counterclockwise orientation
        out.cells.push_back({mirrored[p[0]], mirrored[p[2]], mirrored[p[1]], mirrored[p[5]],
                             mirrored[p[4]], mirrored[p[3]]});
        out.region.push_back(in.region[c]);
    }
    return out;
}

Mesh circle_in_square(const GeometryParams& g) {
    const double half = g.R * g.L_over_R / 2.0;
    Mesh m = circle_quarter(g.R, half, g.outside);
    if (g.full_domain) {
        m = mirror_merge(m, 0);
        m = mirror_merge(m, 1);
    }
    classify_circle_square(m, g.R, half, g.full_domain);
    m.rebuild_connectivity();
    validate_mesh(m);
    return m;
}

// --- structured rectangles (tests, bilayer) ------------------------------------------

std::vector<double> graded_breaks(double from, double to, double h0, double ratio) {
    // Geometric step sequence from `from` toward `to`, rescaled to land exactly.
    std::vector<double> steps;
    double h = h0, cum = 0.0;
    const double span = std::abs(to - from);
    while (cum < span) {
        steps.push_back(h);
        cum += h;
        h *= ratio;
    }
    const double s = span / cum;
    std::vector<double> breaks{from};
    const double dir = to > from ? 1.0 : -1.0;
    for (const double st : steps) breaks.push_back(breaks.back() + dir * st * s);
    breaks.back() = to;
    return breaks;
}

Mesh from_grid(const std::vector<double>& xs, const std::vector<double>& ys,
               const std::function<RegionTag(const Vec2&)>& region_of) {
    Mesh m;
    const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size());
    auto vid = [&](int i, int j) { return j * nx + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) m.nodes.emplace_back(xs[i], ys[j]);

    std::map<std::pair<int, int>, int> edge_mid;
    auto mid_node = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = edge_mid.find(key);
        if (it != edge_mid.end()) return it->second;
        const int id = m.n_nodes();
        m.nodes.push_back(0.5 * (m.nodes[a] + m.nodes[b]));
        edge_mid.emplace(key, id);
        return id;
    };
    auto add_cell = [&](int a, int b, int c, RegionTag r) {
        m.cells.push_back({a, b, c, mid_node(a, b), mid_node(b, c), mid_node(c, a)});
        m.region.push_back(r);
    };
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const Vec2 center(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
            const RegionTag r = region_of(center);
            add_cell(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), r);
            add_cell(vid(i, j), vid(i + 1, j + 1), vid(i, j + 1), r);
        }
    return m;
}

Mesh bilayer_beam(const GeometryParams& g) {
    const double half = g.L / 2.0;
    const double l = g.L * g.beam_len_frac;
    const double t_mag = l * g.mag_thick_frac;
    const double t_non = l * g.nonmag_thick_frac;

    // x: uniform through the beam, geometrically graded to the outer box.
    std::vector<double> xs;
    const int nx_beam = 8;
    for (int i = 0; i <= nx_beam; ++i) xs.push_back(l * i / nx_beam);
    {
        const auto right = graded_breaks(l, half, l / nx_beam, 1.6);
        xs.insert(xs.end(), right.begin() + 1, right.end());
    }
    // y: one cell through the lower layer, two through the upper, graded air.
    std::vector<double> ys;
    {
        const auto below = graded_breaks(-t_non, -half, t_mag / 2.0, 1.6);
        ys.assign(below.rbegin(), below.rend());
    }
    ys.push_back(0.0);
    ys.push_back(t_mag / 2.0);
    ys.push_back(t_mag);
    {
        const auto above = graded_breaks(t_mag, half, t_mag / 2.0, 1.6);
        ys.insert(ys.end(), above.begin() + 1, above.end());
    }

    Mesh m = from_grid(xs, ys, [&](const Vec2& c) {
        if (c.x() < l && c.y() > 0.0 && c.y() < t_mag) return RegionTag::Magnetic;
        if (c.x() < l && c.y() > -t_non && c.y() < 0.0) return RegionTag::NonmagneticSolid;
        return RegionTag::Air;
    });

    m.curves.clear();
    auto seg = [&](Vec2 a, Vec2 b) {
        m.curves.push_back(CurveDescriptor::segment(a, b));
        return static_cast<int>(m.curves.size()) - 1;
    };
    const int s_outer_r = seg({half, -half}, {half, half});
    const int s_outer_t = seg({0, half}, {half, half});
    const int s_outer_b = seg({0, -half}, {half, -half});
    const int s_sym = seg({0, -half}, {0, half});
    const int s_top = seg({0, t_mag}, {l, t_mag});
    const int s_bot = seg({0, -t_non}, {l, -t_non});
    const int s_tip = seg({l, -t_non}, {l, t_mag});
    const int s_mid = seg({0, 0}, {l, 0});

    const double tol = 1e-9 * half;
    derive_facets(m, [&](const Vec2& a, const Vec2& mid, const Vec2& b, RegionTag anchored,
                         std::optional<RegionTag> other)
                         -> std::optional<std::pair<FacetTag, int>> {
        auto on_v = [&](double x) { return std::abs(a.x() - x) < tol && std::abs(b.x() - x) < tol; };
        auto on_h = [&](double y) { return std::abs(a.y() - y) < tol && std::abs(b.y() - y) < tol; };
        (void)mid;
        if (other) {
            // Pick the geometric curve so refinement keeps the interface exact.
            int curve = -1;
            if (on_h(t_mag)) curve = s_top;
            else if (on_h(-t_non)) curve = s_bot;
            else if (on_h(0.0)) curve = s_mid;
            else if (on_v(l)) curve = s_tip;
            return std::make_pair(interface_tag(anchored, *other), curve);
        }
        if (on_v(0.0)) return std::make_pair(FacetTag::SymmetryY, s_sym);
        if (on_v(half)) return std::make_pair(FacetTag::Outer, s_outer_r);
        if (on_h(half)) return std::make_pair(FacetTag::Outer, s_outer_t);
        if (on_h(-half)) return std::make_pair(FacetTag::Outer, s_outer_b);
        throw MeshError("bilayer generator: unclassifiable boundary edge");
    });

    m.rebuild_connectivity();
    validate_mesh(m);
    return m;
}

}  // namespace

Mesh make_rectangle_mesh(double x0, double y0, double x1, double y1, int nx, int ny,
                         RegionTag region) {
    std::vector<double> xs, ys;
    for (int i = 0; i <= nx; ++i) xs.push_back(x0 + (x1 - x0) * i / nx);
    for (int j = 0; j <= ny; ++j) ys.push_back(y0 + (y1 - y0) * j / ny);
    Mesh m = from_grid(xs, ys, [&](const Vec2&) { return region; });
    m.curves.clear();
    m.curves.push_back(CurveDescriptor::segment({x0, y0}, {x1, y0}));
    m.curves.push_back(CurveDescriptor::segment({x1, y0}, {x1, y1}));
    m.curves.push_back(CurveDescriptor::segment({x0, y1}, {x1, y1}));
    m.curves.push_back(CurveDescriptor::segment({x0, y0}, {x0, y1}));
    const double tol = 1e-9 * std::max({std::abs(x1 - x0), std::abs(y1 - y0)});
    derive_facets(m, [&](const Vec2& a, const Vec2& mid, const Vec2& b, RegionTag,
                         std::optional<RegionTag> other)
                         -> std::optional<std::pair<FacetTag, int>> {
        (void)mid;
        if (other) return std::nullopt;
        if (std::abs(a.y() - y0) < tol && std::abs(b.y() - y0) < tol)
            return std::make_pair(FacetTag::Outer, 0);
        if (std::abs(a.x() - x1) < tol && std::abs(b.x() - x1) < tol)
            return std::make_pair(FacetTag::Outer, 1);
        if (std::abs(a.y() - y1) < tol && std::abs(b.y() - y1) < tol)
            return std::make_pair(FacetTag::Outer, 2);
        if (std::abs(a.x() - x0) < tol && std::abs(b.x() - x0) < tol)
            return std::make_pair(FacetTag::Outer, 3);
        throw MeshError("rectangle generator: unclassifiable boundary edge");
    });
    m.rebuild_connectivity();
    validate_mesh(m);
    return m;
}

Mesh builtin_geometry(GeometryKind kind, const GeometryParams& params) {
    switch (kind) {
        case GeometryKind::CircleInSquare: return circle_in_square(params);
        case GeometryKind::BilayerBeam: return bilayer_beam(params);
    }
    throw std::invalid_argument("builtin_geometry: unknown kind");
}

}  // namespace magelas
