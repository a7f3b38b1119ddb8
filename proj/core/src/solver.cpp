#include "magelas/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "magelas/error.hpp"
#include "magelas/quadrature.hpp"
#include "magelas/shape.hpp"

namespace magelas {

int SolveReport::total_newton_iterations() const {
    int n = 0;
    for (const auto& s : steps) n += s.newton_iterations;
    return n;
}

double estimate_convergence_order(const std::vector<double>& history) {
    // Best pointwise order over triples that make real progress (at least a
    // factor of two per step). Damped opening iterations and the roundoff
    // plateau a converged residual settles on would otherwise mask the
    // contraction burst this diagnostic is meant to expose.
    double best = 0.0;
    for (int k = 2; k < static_cast<int>(history.size()); ++k) {
        const double r0 = history[k - 2], r1 = history[k - 1], r2 = history[k];
        if (!(r0 > 0.0 && r1 > 0.0 && r2 > 0.0)) continue;
        if (!(r1 <= 0.5 * r0 && r2 <= 0.5 * r1)) continue;
        best = std::max(best, std::log(r2 / r1) / std::log(r1 / r0));
    }
    return best;
}

DofPartition::DofPartition(int n_dofs, const std::vector<int>& fixed_dofs)
    : free_index_(n_dofs, 0) {
    for (int dof : fixed_dofs) free_index_[dof] = -1;
    for (int i = 0; i < n_dofs; ++i)
        if (free_index_[i] >= 0) free_index_[i] = n_free_++;
}

Eigen::VectorXd DofPartition::gather(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(n_free_);
    for (int i = 0; i < static_cast<int>(free_index_.size()); ++i)
        if (free_index_[i] >= 0) out[free_index_[i]] = full[i];
    return out;
}

void DofPartition::scatter_add(const Eigen::VectorXd& reduced, double alpha,
                               Eigen::VectorXd& full) const {
    for (int i = 0; i < static_cast<int>(free_index_.size()); ++i)
        if (free_index_[i] >= 0) full[i] += alpha * reduced[free_index_[i]];
}

Eigen::SparseMatrix<double> DofPartition::reduce(
    const std::vector<Eigen::Triplet<double>>& triplets) const {
    std::vector<Eigen::Triplet<double>> reduced;
    reduced.reserve(triplets.size());
    for (const auto& t : triplets) {
        const int r = free_index_[t.row()], c = free_index_[t.col()];
        if (r >= 0 && c >= 0) reduced.emplace_back(r, c, t.value());
    }
    Eigen::SparseMatrix<double> A(n_free_, n_free_);
    A.setFromTriplets(reduced.begin(), reduced.end());
    return A;
}

Eigen::VectorXd LinearSolver::solve(Eigen::SparseMatrix<double>& A,
                                    const Eigen::VectorXd& rhs) {
    A.makeCompressed();
    if (!analyzed_) {
        lu_.analyzePattern(A);
        analyzed_ = true;
    }
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success)
        throw SolveError("sparse LU factorization failed: singular or numerically "
                         "degenerate system matrix");
    factorized_ = true;
    Eigen::VectorXd x = lu_.solve(rhs);
    if (A.rows() == 0) return x;
    // Normwise backward error: ||Ax-b||_inf / (||A||_inf ||x||_inf + ||b||_inf).
    // Normalizing by ||b|| alone would spuriously reject well-solved systems
    // whose blocks differ in scale by many orders of magnitude.
    Eigen::VectorXd abs_row_sums = Eigen::VectorXd::Zero(A.rows());
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            abs_row_sums[it.row()] += std::abs(it.value());
    const double norm_a = abs_row_sums.maxCoeff();
    const double residual = (A * x - rhs).lpNorm<Eigen::Infinity>();
    const double scale =
        std::max(norm_a * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>(), 1e-300);
    const double rel = residual / scale;
    if (!(rel <= 1e-10)) {
        std::ostringstream msg;
        msg << "linear solve backward error " << rel << " exceeds 1e-10";
        throw SolveError(msg.str());
    }
    return x;
}

Eigen::VectorXd LinearSolver::resolve(const Eigen::VectorXd& rhs) const {
    if (!factorized_) throw SolveError("resolve() called before a successful solve()");
    return lu_.solve(rhs);
}

namespace {

std::vector<int> fixed_dofs_of(const Problem& problem, const MixedSpace& space) {
    std::vector<int> fixed;
    for (const auto& s : problem.dirichlet) fixed.push_back(s.dof);
    if (problem.staggered) {
        for (int n : problem.plan.frozen_air_nodes) {
            fixed.push_back(space.u_dof(n, 0));
            fixed.push_back(space.u_dof(n, 1));
        }
    }
    return fixed;
}

}  // namespace

SolveDriver::SolveDriver(const Mesh& mesh, const MaterialTable& materials,
                         const Problem& problem, NewtonConfig config)
    : mesh_(mesh),
      materials_(materials),
      problem_(problem),
      config_(config),
      space_(mesh),
      partition_(space_.n_dofs(), fixed_dofs_of(problem, space_)) {
    Vec2 lo = mesh.nodes[0], hi = mesh.nodes[0];
    for (const Vec2& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    domain_scale_ = (hi - lo).norm();
}

bool SolveDriver::newton(const LoadState& load, double residual_reference,
                         Eigen::VectorXd& state, StepReport& report) {
    apply_dirichlet(problem_.dirichlet, load, state);

    Eigen::VectorXd r;
    assemble_system(mesh_, space_, materials_, problem_.terms, load, state, &r, &triplets_);
    double rnorm = partition_.gather(r).norm();
    if (!std::isfinite(rnorm)) return false;

    report.initial_residual_norm = rnorm;
    report.residual_history.assign(1, rnorm);
    const double reference = std::max(residual_reference, rnorm);
    const double tol = std::max(config_.rel_tol * reference, config_.abs_tol);

    bool converged = rnorm <= tol;
    Eigen::VectorXd trial(state.size()), r_trial;
    for (int it = 1; it <= config_.max_iter && !converged; ++it) {
        Eigen::SparseMatrix<double> K = partition_.reduce(triplets_);
        const Eigen::VectorXd delta = linear_.solve(K, -partition_.gather(r));
        const double step_norm = delta.lpNorm<Eigen::Infinity>();
        const double state_scale =
            std::max(domain_scale_, partition_.gather(state).lpNorm<Eigen::Infinity>());

        if (step_norm <= config_.step_tol * state_scale) {
            // Negligible correction: the iterate is converged to working
            // precision even if the raw residual norm sits on its roundoff
            // floor above the relative tolerance.
            partition_.scatter_add(delta, 1.0, state);
            assemble_system(mesh_, space_, materials_, problem_.terms, load, state, &r,
                            nullptr);
            rnorm = partition_.gather(r).norm();
            report.newton_iterations = it;
            report.residual_history.push_back(rnorm);
            converged = std::isfinite(rnorm);
            break;
        }

        double alpha = 1.0;
        bool accepted = false;
        const int trials = config_.line_search ? config_.max_line_search : 1;
        for (int ls = 0; ls < trials; ++ls, alpha *= 0.5) {
            trial = state;
            partition_.scatter_add(delta, alpha, trial);
            assemble_system(mesh_, space_, materials_, problem_.terms, load, trial, &r_trial,
                            nullptr);
            const Eigen::VectorXd r_free = partition_.gather(r_trial);
            bool ok = std::isfinite(r_free.norm());
            if (ok && config_.line_search) {
                const double contraction = linear_.resolve(r_free).lpNorm<Eigen::Infinity>();
                ok = std::isfinite(contraction) &&
                     contraction <= (1.0 - 0.5 * alpha) * step_norm;
            }
            if (ok) {
                state = trial;
                rnorm = r_free.norm();
                accepted = true;
                break;
            }
        }
        if (!accepted) return false;

        report.newton_iterations = it;
        report.residual_history.push_back(rnorm);
        if (rnorm <= tol) {
            converged = true;
            break;
        }
        // Re-assemble with the Jacobian for the next iteration.
        assemble_system(mesh_, space_, materials_, problem_.terms, load, state, &r,
                        &triplets_);
    }

    report.residual_norm = rnorm;
    report.convergence_order = estimate_convergence_order(report.residual_history);
    report.b_inf = load.b_inf;
    report.gravity = load.gravity;
    return converged;
}

void SolveDriver::prepare_extension() {
    if (extension_ready_) return;
    extension_ready_ = true;

    const StaggeredPlan& plan = problem_.plan;
    const int n_udofs = 2 * mesh_.n_nodes();

    // Small-strain elastic stiffness with unit shear modulus over the air
    // cells: K[(n,c),(m,d)] = int grad Nn . grad Nm delta_cd + dNn_d dNm_c.
    std::vector<Eigen::Triplet<double>> trips;
    const QuadratureRule& rule = triangle_rule(4);
    std::vector<char> in_ext(mesh_.n_nodes(), 0);
    for (int cell : plan.extension_cells) {
        for (int n : mesh_.cells[cell]) in_ext[n] = 1;
        for (const auto& qp : rule.points) {
            Vec2 pos;
            Mat2 J;
            const double detJ = mesh_.geometry_at(cell, qp.x, qp.y, &pos, &J);
            const Mat2 JinvT = J.inverse().transpose();
            double N[6], dNr[6][2];
            p2_shape(qp.x, qp.y, N, dNr);
            Vec2 g[6];
            for (int a = 0; a < 6; ++a) g[a] = JinvT * Vec2(dNr[a][0], dNr[a][1]);
            const double w = qp.w * detJ;
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) {
                    const int na = mesh_.cells[cell][a], nb = mesh_.cells[cell][b];
                    const double lap = w * g[a].dot(g[b]);
                    for (int c = 0; c < 2; ++c) {
                        for (int d = 0; d < 2; ++d) {
                            double v = w * g[a][d] * g[b][c];
                            if (c == d) v += lap;
                            trips.emplace_back(2 * na + c, 2 * nb + d, v);
                        }
                    }
                }
        }
    }
    ext_matrix_.resize(n_udofs, n_udofs);
    ext_matrix_.setFromTriplets(trips.begin(), trips.end());

    std::vector<int> fixed;
    for (int n = 0; n < mesh_.n_nodes(); ++n)
        for (int c = 0; c < 2; ++c)
            if (!in_ext[n] || plan.extension_fixed[c][n]) fixed.push_back(2 * n + c);
    ext_partition_ = std::make_unique<DofPartition>(n_udofs, fixed);

    Eigen::SparseMatrix<double> K = ext_partition_->reduce(trips);
    ext_factor_.compute(K);
    if (ext_factor_.info() != Eigen::Success)
        throw SolveError("smoothing-extension factorization failed");
}

void SolveDriver::extension_step(Eigen::VectorXd& state) {
    prepare_extension();
    if (ext_partition_->n_free() == 0) return;
    const int n_udofs = 2 * mesh_.n_nodes();
    const Eigen::VectorXd residual = ext_matrix_ * state.head(n_udofs);
    const Eigen::VectorXd delta = ext_factor_.solve(-ext_partition_->gather(residual));
    Eigen::VectorXd u = state.head(n_udofs);
    ext_partition_->scatter_add(delta, 1.0, u);
    state.head(n_udofs) = u;
}

void SolveDriver::relax_air(Eigen::VectorXd& state, int sweeps) {
    prepare_extension();
    if (ext_partition_->n_free() == 0) return;
    const StaggeredPlan& plan = problem_.plan;
    const QuadratureRule& rule = triangle_rule(4);

    for (int sweep = 0; sweep < sweeps; ++sweep) {
        // Deformed nodal positions; the relaxation treats them as the unknown.
        Eigen::VectorXd pos(2 * mesh_.n_nodes());
        for (int n = 0; n < mesh_.n_nodes(); ++n)
            for (int c = 0; c < 2; ++c)
                pos[2 * n + c] = mesh_.nodes[n][c] + state[space_.u_dof(n, c)];

        std::vector<Eigen::Triplet<double>> trips;
        for (int cell : plan.extension_cells) {
            // Geometry check first: an inverted cell has no usable deformed
            // metric, so its contribution is assembled on the reference shape.
            bool inverted = false;
            std::array<Vec2, 6> xe;
            for (int a = 0; a < 6; ++a) {
                const int n = mesh_.cells[cell][a];
                xe[a] = Vec2(pos[2 * n], pos[2 * n + 1]);
            }
            for (const auto& qp : rule.points) {
                double N[6], dNr[6][2];
                p2_shape(qp.x, qp.y, N, dNr);
                Mat2 J = Mat2::Zero();
                for (int a = 0; a < 6; ++a) J += xe[a] * Vec2(dNr[a][0], dNr[a][1]).transpose();
                if (!(J.determinant() > 1e-12)) { inverted = true; break; }
            }
            for (const auto& qp : rule.points) {
                double N[6], dNr[6][2];
                p2_shape(qp.x, qp.y, N, dNr);
                Mat2 J = Mat2::Zero();
                if (inverted) {
                    Vec2 dummy;
                    mesh_.geometry_at(cell, qp.x, qp.y, &dummy, &J);
                } else {
                    for (int a = 0; a < 6; ++a)
                        J += xe[a] * Vec2(dNr[a][0], dNr[a][1]).transpose();
                }
                const double detJ = J.determinant();
                const Mat2 JinvT = J.inverse().transpose();
                Vec2 g[6];
                for (int a = 0; a < 6; ++a) g[a] = JinvT * Vec2(dNr[a][0], dNr[a][1]);
                const double w = qp.w * detJ;
                for (int a = 0; a < 6; ++a)
                    for (int b = 0; b < 6; ++b) {
                        const int na = mesh_.cells[cell][a], nb = mesh_.cells[cell][b];
                        const double lap = w * g[a].dot(g[b]);
                        for (int c = 0; c < 2; ++c)
                            for (int d = 0; d < 2; ++d) {
                                double v = w * g[a][d] * g[b][c];
                                if (c == d) v += lap;
                                trips.emplace_back(2 * na + c, 2 * nb + d, v);
                            }
                    }
            }
        }
        Eigen::SparseMatrix<double> full(2 * mesh_.n_nodes(), 2 * mesh_.n_nodes());
        full.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(
            ext_partition_->reduce(trips));
        if (factor.info() != Eigen::Success) return;
        const Eigen::VectorXd delta = factor.solve(-ext_partition_->gather(full * pos));
        Eigen::VectorXd u = state.head(2 * mesh_.n_nodes());
        ext_partition_->scatter_add(delta, 1.0, u);
        state.head(2 * mesh_.n_nodes()) = u;
    }
}

bool SolveDriver::staggered(const LoadState& load, Eigen::VectorXd& state,
                            StepReport& report) {
    prepare_extension();
    const StaggeredPlan& plan = problem_.plan;

    auto gather_interface = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(2 * plan.interface_nodes.size());
        for (size_t i = 0; i < plan.interface_nodes.size(); ++i) {
            v[2 * i] = x[space_.u_dof(plan.interface_nodes[i], 0)];
            v[2 * i + 1] = x[space_.u_dof(plan.interface_nodes[i], 1)];
        }
        return v;
    };

    Eigen::VectorXd prev = gather_interface(state);
    double reference = 0.0;
    for (int outer = 1; outer <= plan.max_outer; ++outer) {
        StepReport inner;
        if (!newton(load, reference, state, inner)) return false;
        reference = std::max(reference, inner.initial_residual_norm);
        report.newton_iterations += inner.newton_iterations;
        report.residual_norm = inner.residual_norm;
        report.residual_history = inner.residual_history;
        report.convergence_order = inner.convergence_order;
        if (report.initial_residual_norm == 0.0)
            report.initial_residual_norm = inner.initial_residual_norm;
        report.staggered_outer = outer;

        extension_step(state);

        const Eigen::VectorXd iface = gather_interface(state);
        const double delta = plan.interface_nodes.empty()
                                 ? 0.0
                                 : (iface - prev).lpNorm<Eigen::Infinity>();
        prev = iface;
        if (delta < plan.tol * domain_scale_) {
            report.b_inf = load.b_inf;
            report.gravity = load.gravity;
            return true;
        }
    }
    return false;
}

bool SolveDriver::solve_load(const LoadState& load, Eigen::VectorXd& state,
                             StepReport& report) {
    return problem_.staggered ? staggered(load, state, report)
                              : newton(load, 0.0, state, report);
}

bool SolveDriver::newton_burst(const LoadState& load, Eigen::VectorXd& state,
                               StepReport& report) {
    return newton(load, 0.0, state, report);
}

StepReport SolveDriver::solve_at(const LoadState& load, Eigen::VectorXd& state) {
    StepReport report;
    Eigen::VectorXd backup = state;
    bool ok = false;
    try {
        ok = solve_load(load, state, report);
    } catch (const SolveError&) {
        state = backup;
        throw;
    }
    if (!ok) {
        state = backup;
        throw SolveError("solve did not converge at b=(" + std::to_string(load.b_inf.x()) +
                         "," + std::to_string(load.b_inf.y()) + "), g=(" +
                         std::to_string(load.gravity.x()) + "," +
                         std::to_string(load.gravity.y()) + ")");
    }
    return report;
}

SolveReport SolveDriver::run(const LoadSchedule& schedule, Eigen::VectorXd& state) {
    SolveReport out;

    // One continuation phase: advance `lambda` from 0 to 1, halving the
    // increment on failure, restarting each attempt from the last good state.
    auto phase = [&](double initial_dl, auto load_of, const char* label) {
        double lambda = 0.0;
        double dl = std::min(initial_dl, 1.0);
        Eigen::VectorXd good = state;
        while (lambda < 1.0 - 1e-12) {
            const double target = std::min(lambda + dl, 1.0);
            StepReport report;
            bool ok = false;
            std::string why;
            try {
                ok = solve_load(load_of(target), state, report);
            } catch (const SolveError& e) {
                why = e.what();
            }
            if (ok) {
                lambda = target;
                good = state;
                out.steps.push_back(report);
                continue;
            }
            state = good;
            bool retried = false;
            int halvings = 0;
            while (halvings < schedule.max_halvings) {
                ++halvings;
                dl *= 0.5;
                const double retry_target = std::min(lambda + dl, 1.0);
                StepReport retry_report;
                retry_report.halvings = halvings;
                bool retry_ok = false;
                try {
                    retry_ok = solve_load(load_of(retry_target), state, retry_report);
                } catch (const SolveError& e) {
                    why = e.what();
                }
                if (retry_ok) {
                    lambda = retry_target;
                    good = state;
                    out.steps.push_back(retry_report);
                    retried = true;
                    break;
                }
                state = good;
            }
            if (!retried) {
                std::ostringstream msg;
                msg << label << " continuation failed at lambda=" << lambda
                    << " after " << schedule.max_halvings << " increment halvings";
                if (!why.empty()) msg << ": " << why;
                throw SolveError(msg.str());
            }
        }
    };

    if (schedule.gravity.norm() > 0.0) {
        phase(1.0,
              [&](double l) {
                  LoadState load;
                  load.gravity = l * schedule.gravity;
                  return load;
              },
              "gravity");
    }
    if (schedule.b_inf.norm() > 0.0) {
        const double b_mag = schedule.b_inf.norm();
        phase(schedule.b_step / b_mag,
              [&](double l) {
                  LoadState load;
                  load.gravity = schedule.gravity;
                  load.b_inf = l * schedule.b_inf;
                  return load;
              },
              "field");
    }
    if (out.steps.empty()) {
        // No loading at all: verify the zero-load state is consistent.
        StepReport report;
        if (!solve_load(LoadState{}, state, report))
            throw SolveError("zero-load solve failed");
        out.steps.push_back(report);
    }
    return out;
}

}  // namespace magelas
