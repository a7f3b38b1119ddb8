#pragma once

// Post-processing over converged states: material-point displacement probes,
// magnetostatic potential evaluation, Maxwell-stress net force over closed
// surfaces, legacy-VTK field export, CSV tables, and convergence-rate
// estimation across refinement levels.

#include <string>
#include <vector>

#include "magelas/fem.hpp"
#include "magelas/formulations.hpp"

namespace magelas {

// --- displacement probes -----------------------------------------------------

struct ProbeResult {
    std::string label;
    Vec2 point = Vec2::Zero();         // material (reference) coordinates
    Vec2 displacement = Vec2::Zero();  // interpolated displacement [m]
    double scaled = 0.0;               // displacement.y / scale_length
    LoadState load;
};

// Locates the material point in the reference mesh (quadratic isoparametric
// inversion) and interpolates the displacement there. scale_length divides
// the vertical component into `scaled` (pass the body radius to report u_y/R).
// Throws PostprocError when the point lies in no cell.
ProbeResult probe_displacement(const Mesh& mesh, const MixedSpace& space,
                               const Eigen::VectorXd& state, const Vec2& point,
                               double scale_length = 1.0, const LoadState& load = {},
                               const std::string& label = {});

// --- energetic diagnostics ---------------------------------------------------

// Value of the magnetostatic potential functional at `state`: the field
// (co-)energy volume terms of the chosen formulation plus the far-field
// loading term on the outer boundary. Mechanical, auxiliary, and gravity
// contributions are excluded. `state`'s scalar unknown must match the
// formulation (potential for COENERGY, out-of-plane flux for ENERGY).
// For matching discrete solutions of the two formulations the values mirror
// each other: their sum vanishes up to discretization error.
double magnetostatic_potential(const Mesh& mesh, const MixedSpace& space,
                               const MaterialTable& materials, Formulation form,
                               const LoadState& load, const Eigen::VectorXd& state);

// Largest displacement magnitude over the nodes strictly interior to a region
// set (set-boundary nodes excluded). The canonical spurious-motion metric for
// nominally force-free regions.
double max_interior_displacement(const Mesh& mesh, const MixedSpace& space,
                                 const Eigen::VectorXd& state, const RegionSet& regions);

// --- net force -----------------------------------------------------------------

// Resultant of the free-space Maxwell stress over the boundary of a cell
// mask enclosing a body: the integral of sigma^MW . n over the deformed
// boundary curve of the mask, with n the deformed outward normal of the mask
// and the field evaluated on the outside cell of every boundary edge. The
// surface is closed by construction; edges on the symmetry lines are closed
// by the mirror image and skipped. Throws PostprocError when the mask
// touches the outer boundary (no outside cell to evaluate on) or when an
// outside cell is magnetic (the stress formula only holds in free space).
Vec2 net_force(const Mesh& mesh, const MixedSpace& space, const MaterialTable& materials,
               MagneticUnknown unknown, const Eigen::VectorXd& state,
               const std::vector<char>& enclosed_cells);

// Cell mask of a region set plus `layers` breadth-first rings of surrounding
// cells; the natural input to net_force at increasing distance from a body
// (layers=0 gives the region set itself).
std::vector<char> dilate_region(const Mesh& mesh, const RegionSet& seed, int layers);

// --- field export --------------------------------------------------------------

// Writes the state as a legacy-VTK ASCII unstructured grid on the deformed
// configuration. Quadratic triangles are linearized into four sub-triangles
// (export-only; solution accuracy is unaffected). Point data: displacement,
// the scalar magnetic unknown, |b|, and |m| (node-averaged from cell fields);
// cell data: region tag. Throws PostprocError on I/O failure.
void export_fields(const Mesh& mesh, const MixedSpace& space, const MaterialTable& materials,
                   MagneticUnknown unknown, const Eigen::VectorXd& state,
                   const std::string& path);

// --- CSV tables ------------------------------------------------------------------

// Numeric table with '#'-prefixed metadata lines and one header row. Values
// are written with enough digits to reparse bit-exactly.
struct CsvTable {
    std::vector<std::string> metadata;  // written as "# key: value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // each row sized like columns
};

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

// --- convergence rates -----------------------------------------------------------

struct ConvergenceLevel {
    int dofs = 0;
    double value = 0.0;
    double error = 0.0;     // |value - reference|
    double order = 0.0;     // pointwise order vs previous level, 0 on the first
    bool saturated = false; // error at the reference's noise floor
};

struct ConvergenceSeries {
    std::vector<ConvergenceLevel> levels;
    double slope = 0.0;  // least-squares order of log error vs log h, h ~ dofs^(-1/2)
};

// Errors and orders of a refinement series against a scalar reference value.
// Levels must come with strictly increasing dof counts (throws
// PostprocError otherwise). Levels whose error is below `floor` (relative to
// |reference|, or absolute when the reference is zero) are flagged saturated
// and excluded from the least-squares slope.
ConvergenceSeries convergence_rates(const std::vector<std::pair<int, double>>& series,
                                    double reference, double floor = 1e-12);

}  // namespace magelas
