#pragma once

#include <stdexcept>
#include <string>

namespace magelas {

// Base class for all failures this library reports deliberately.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed mesh files, non-positive geometric Jacobians, broken conformity.
struct MeshError : Error {
    using Error::Error;
};

// Study/config file problems: unknown keys, bad units, inconsistent setup.
struct ConfigError : Error {
    using Error::Error;
};

// Linear or nonlinear solve failures after all recovery options ran out.
struct SolveError : Error {
    using Error::Error;
};

// Post-processing failures: probe points outside the mesh, malformed force
// surfaces, export I/O errors, unusable convergence series.
struct PostprocError : Error {
    using Error::Error;
};

}  // namespace magelas
