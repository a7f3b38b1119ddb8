#pragma once
// Newton solver with load continuation, a checked direct linear-solve
// contract, and the alternating (staggered) fixed-point driver.

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <memory>
#include <vector>

#include "magelas/formulations.hpp"

namespace magelas {

struct NewtonConfig {
    double rel_tol = 1e-10;   // residual norm vs the step's reference residual
    double abs_tol = 0.0;     // optional absolute floor
    double step_tol = 1e-13;  // increment norm vs max(domain scale, state norm)
    int max_iter = 25;
    // Affine-invariant backtracking: a trial state is accepted when the
    // simplified Newton correction ||J^-1 r_trial|| shrinks against the step
    // norm. A plain residual-decrease test would wrongly reject exact Newton
    // steps whose raw residual norm is transiently non-monotone (it mixes
    // displacement and potential rows of very different physical scales).
    bool line_search = true;
    int max_line_search = 8;
};

struct StepReport {
    Vec2 b_inf = Vec2::Zero();
    Vec2 gravity = Vec2::Zero();
    int newton_iterations = 0;
    double initial_residual_norm = 0.0;
    double residual_norm = 0.0;
    std::vector<double> residual_history;  // per-iteration norms, incl. initial
    double convergence_order = 0.0;        // 0 when not estimable
    int halvings = 0;                      // increment halvings spent on this step
    int staggered_outer = 0;               // outer alternations (0 = monolithic)
};

struct SolveReport {
    std::vector<StepReport> steps;
    int total_newton_iterations() const;
};

struct LoadSchedule {
    Vec2 b_inf = Vec2::Zero();    // target applied flux
    Vec2 gravity = Vec2::Zero();  // target gravity, applied in one pre-step
    double b_step = 0.05;         // flux ramp increment [T]
    int max_halvings = 5;
};

// Estimates the convergence order of a residual-norm history as the best
// pointwise order over consecutive triples that contract by at least a factor
// of two per step; returns 0 when no such triple exists.
double estimate_convergence_order(const std::vector<double>& history);

// Splits dofs into fixed and free and maps reduced systems back and forth.
class DofPartition {
  public:
    DofPartition(int n_dofs, const std::vector<int>& fixed_dofs);
    int n_free() const { return n_free_; }
    bool is_fixed(int dof) const { return free_index_[dof] < 0; }
    Eigen::VectorXd gather(const Eigen::VectorXd& full) const;
    void scatter_add(const Eigen::VectorXd& reduced, double alpha,
                     Eigen::VectorXd& full) const;
    Eigen::SparseMatrix<double> reduce(
        const std::vector<Eigen::Triplet<double>>& triplets) const;

  private:
    std::vector<int> free_index_;  // -1 for fixed dofs
    int n_free_ = 0;
};

// Direct sparse LU for general nonsymmetric systems. The sparsity pattern is
// analyzed once and reused; every solve is verified against a backward-error
// bound (relative residual <= 1e-10) and throws SolveError otherwise.
class LinearSolver {
  public:
    Eigen::VectorXd solve(Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& rhs);

    // Re-solves against the factorization of the most recent solve() without
    // refactorizing or checking the backward error. Used as an inexpensive
    // predictor (e.g. line-search acceptance); requires a prior solve().
    Eigen::VectorXd resolve(const Eigen::VectorXd& rhs) const;

  private:
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    bool analyzed_ = false;
    bool factorized_ = false;
};

// Drives one Problem over a load schedule: gravity in a single pre-step, then
// the applied flux ramped in b_step increments. A failed step (divergence,
// non-finite residual, exhausted line search, failed alternation) halves the
// increment and retries from the last converged state, up to max_halvings;
// running out of retries throws SolveError.
class SolveDriver {
  public:
    SolveDriver(const Mesh& mesh, const MaterialTable& materials, const Problem& problem,
                NewtonConfig config = {});

    // Ramps from the zero-load state currently in `state`. Appends one report
    // entry per converged step.
    SolveReport run(const LoadSchedule& schedule, Eigen::VectorXd& state);

    // Solves at a single fixed load from the current state (no continuation,
    // no halving). Throws SolveError on failure.
    StepReport solve_at(const LoadState& load, Eigen::VectorXd& state);

    // Replaces the interior air displacement with a smooth elastic extension
    // of the current interface motion. The free-space nodes only carry the
    // mesh, so this changes the initial guess, not the physics; it undoes the
    // tangling that accumulates in the air when the solid deforms severely,
    // and a subsequent solve re-establishes equilibrium from the clean mesh.
    void extension_step(Eigen::VectorXd& state);

    // One bounded Newton attempt at a fixed load from the current state.
    // Unlike solve_at, partial progress stays in `state` when the attempt
    // runs out of iterations; combined with extension_step this walks
    // through strongly nonlinear transitions that a single Newton path
    // cannot cross on a progressively tangling mesh.
    bool newton_burst(const LoadState& load, Eigen::VectorXd& state, StepReport& report);

    // Harmonic relaxation sweeps for the deformed positions of the free-space
    // nodes, assembled on the current configuration (cells the state has
    // inverted fall back to their reference geometry, which pulls them open
    // again). Where extension_step extends the interface motion linearly from
    // the reference mesh — accurate only for mild deformation — this follows
    // the configuration itself and stays usable when the carried mesh is
    // strongly compressed or locally tangled.
    void relax_air(Eigen::VectorXd& state, int sweeps = 1);

    const MixedSpace& space() const { return space_; }

  private:
    bool newton(const LoadState& load, double residual_reference, Eigen::VectorXd& state,
                StepReport& report);
    bool solve_load(const LoadState& load, Eigen::VectorXd& state, StepReport& report);
    bool staggered(const LoadState& load, Eigen::VectorXd& state, StepReport& report);
    void prepare_extension();

    const Mesh& mesh_;
    const MaterialTable& materials_;
    const Problem& problem_;
    NewtonConfig config_;
    MixedSpace space_;
    DofPartition partition_;
    LinearSolver linear_;
    std::vector<Eigen::Triplet<double>> triplets_;
    double domain_scale_ = 1.0;

    // Smoothing solve for the alternating scheme (built on first use): a
    // small-strain elastic stiffness over the air cells with unit shear
    // modulus, factored once.
    bool extension_ready_ = false;
    Eigen::SparseMatrix<double> ext_matrix_;
    std::unique_ptr<DofPartition> ext_partition_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ext_factor_;
};

}  // namespace magelas
