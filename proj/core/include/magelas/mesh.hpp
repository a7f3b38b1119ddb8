#pragma once

// Conforming 6-node (curved quadratic) triangle meshes in 2D, with region
// and facet tags, attached exact boundary geometry, uniform refinement that
// snaps new boundary/interface nodes back onto that geometry, a native
// ASCII format, and a Gmsh MSH v2.2 importer.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "magelas/error.hpp"

namespace magelas {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class RegionTag : std::uint8_t { Magnetic, NonmagneticSolid, Air };
enum class FacetTag : std::uint8_t {
    Outer,
    SymmetryX,  // on the horizontal symmetry line y = 0
    SymmetryY,  // on the vertical symmetry line x = 0
    SolidAirInterface,
    MagneticNonmagneticInterface,
};

const char* to_string(RegionTag t);
const char* to_string(FacetTag t);
RegionTag region_tag_from_string(const std::string& s);
FacetTag facet_tag_from_string(const std::string& s);

// Exact curve a tagged facet lies on; refinement projects new mid-edge
// nodes onto it so curved interfaces stay curved under refinement.
struct CurveDescriptor {
    enum class Kind : std::uint8_t { Segment, CircleArc };
    Kind kind = Kind::Segment;
    Vec2 a = Vec2::Zero(), b = Vec2::Zero();  // segment endpoints
    Vec2 center = Vec2::Zero();               // circle center
    double radius = 0.0;

    static CurveDescriptor segment(const Vec2& a, const Vec2& b);
    static CurveDescriptor circle(const Vec2& center, double radius);
    Vec2 project(const Vec2& p) const;
};

// A tagged cell edge. local_edge e spans cell corners (e, (e+1)%3) and owns
// mid-edge node cells[cell][3+e]. Interior interface facets are stored once,
// anchored at one adjacent cell; use Mesh::neighbor to reach the other side.
struct Facet {
    int cell = -1;
    int local_edge = -1;
    FacetTag tag = FacetTag::Outer;
    int curve = -1;
};

struct Mesh {
    // All quadratic nodes: corner and mid-edge alike.
    std::vector<Vec2> nodes;
    // Corner nodes v0,v1,v2 (counterclockwise) then mid-edge nodes m01,m12,m20.
    std::vector<std::array<int, 6>> cells;
    std::vector<RegionTag> region;
    std::vector<Facet> facets;
    std::vector<CurveDescriptor> curves;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_cells() const { return static_cast<int>(cells.size()); }

    std::array<int, 2> facet_corners(const Facet& f) const {
        const auto& c = cells[f.cell];
        return {c[f.local_edge], c[(f.local_edge + 1) % 3]};
    }
    int facet_mid(const Facet& f) const { return cells[f.cell][3 + f.local_edge]; }

    // Cell across local edge e, or -1 on the boundary. Requires
    // rebuild_connectivity() after any topology change (loaders/builders do).
    int neighbor(int cell, int local_edge) const;
    void rebuild_connectivity();

    // Isoparametric geometry of one cell at a reference point: position,
    // Jacobian dx/dxi. Returns det(J).
    double geometry_at(int cell, double xi, double eta, Vec2* x = nullptr,
                       Mat2* jac = nullptr) const;

    // Characteristic length: diameter of the largest cell bounding box.
    double max_cell_extent() const;

  private:
    // edge (identified by its mid node) -> up to two (cell, local_edge) uses
    std::unordered_map<int, std::array<int, 2>> edge_use_;  // encoded 3*cell+ledge
};

// --- I/O -------------------------------------------------------------------

enum class MeshFormat { Auto, Native, Msh2 };

// Physical-tag translation for MSH import (surface tag -> region,
// line tag -> facet tag). Unlisted tags are an error.
struct MshTagMap {
    std::map<int, RegionTag> surfaces;
    std::map<int, FacetTag> lines;
};

Mesh load_mesh(const std::string& path, MeshFormat format = MeshFormat::Auto,
               const MshTagMap* msh_tags = nullptr);
Mesh read_native_mesh(std::istream& in);
void write_native_mesh(const Mesh& mesh, std::ostream& out);
Mesh read_msh2_mesh(std::istream& in, const MshTagMap& tags);

// --- Operations ------------------------------------------------------------

// One uniform red refinement (4 children per cell). Children reproduce the
// parent's quadratic geometry exactly except where a curve descriptor allows
// snapping new facet mid nodes onto the true boundary/interface curve.
Mesh refine_uniform(const Mesh& mesh);

// Structural checks: index ranges, conformity of shared edges, positive
// geometric Jacobian at the quadrature points of the default volume rule,
// facet mid nodes on their attached curves. Throws MeshError.
void validate_mesh(const Mesh& mesh);

// Integral of 1 over a region (or everything) using degree-6 quadrature.
double region_area(const Mesh& mesh, std::optional<RegionTag> region = std::nullopt);

// --- Built-in geometries -----------------------------------------------------

enum class GeometryKind { CircleInSquare, BilayerBeam };

struct GeometryParams {
    // CIRCLE_IN_SQUARE: circle of radius R centered at the origin inside a
    // square of side L = L_over_R * R. Default is the symmetry-reduced
    // quarter [0, L/2]^2; full_domain mirrors it into the whole square.
    double R = 1.0;
    double L_over_R = 20.0;
    bool full_domain = false;
    RegionTag outside = RegionTag::Air;  // matrix material around the circle

    // BILAYER_BEAM: air box [0, L/2] x [-L/2, L/2]; beam along y = 0 from the
    // clamped symmetry plane x = 0, half-length l = beam_len_frac * L, with a
    // magnetic layer of thickness l * mag_thick_frac on top of a non-magnetic
    // layer of thickness l * nonmag_thick_frac.
    double L = 1.0;
    double beam_len_frac = 0.1;
    double mag_thick_frac = 0.1;
    double nonmag_thick_frac = 0.05;
};

Mesh builtin_geometry(GeometryKind kind, const GeometryParams& params = {});

// Structured rectangle of straight P2 triangles, entire boundary tagged
// OUTER. Used by tests and simple verification problems.
Mesh make_rectangle_mesh(double x0, double y0, double x1, double y1, int nx, int ny,
                         RegionTag region = RegionTag::Air);

}  // namespace magelas
