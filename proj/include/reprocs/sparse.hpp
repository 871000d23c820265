#pragma once

#include "reprocs/linalg.hpp"

namespace reprocs {

// The measurement operator Phi = I - P P', applied implicitly. Idempotent
// and symmetric, so Phi' v = Phi v and matrix-vector products are the only
// access the solver needs.
struct ProjectedOperator {
    BasisMatrix basis;

    explicit ProjectedOperator(BasisMatrix b) : basis(std::move(b)) {}
    static ProjectedOperator identity(int n) { return ProjectedOperator(BasisMatrix::empty(n)); }

    int n() const { return basis.n(); }
    Vector apply(const Vector& v) const { return basis.project_out(v); }
};

struct BpdnOptions {
    int max_iters = 40000;   // total inner iterations over all penalty updates
    double feas_tol = 1e-6;  // accepted relative overshoot of the residual bound
    double opt_tol = 1e-6;   // relative l1 suboptimality certified by the dual bound
    const Vector* warm_start = nullptr;  // previous solution, if any
    double penalty_hint = 0.0;           // previous frame's final penalty, if any
};

struct L1SolveReport {
    Vector solution;            // x_cs
    double residual_norm = 0.0; // ||y - Phi x||_2
    double l1_value = 0.0;
    int iterations = 0;
    bool converged = false;
    double duality_gap = 0.0;   // certified upper bound on l1 suboptimality
    double penalty = 0.0;       // final penalty of the equivalent Lagrangian form
};

// Solves min ||x||_1 subject to ||y - Phi x||_2 <= xi.
//
// Implementation: FISTA (with gradient restarts) on the penalized form
// 0.5 ||Phi x - y||^2 + penalty * ||x||_1, with an outer secant/bisection
// loop driving the penalty until the residual meets the constraint.
// Convergence is certified by a feasible primal together with a dual point
// built from the residual; non-convergence within max_iters is reported,
// never masked.
L1SolveReport bpdn_solve(const ProjectedOperator& op, const Vector& y, double xi,
                         const BpdnOptions& opts = {});

// {i : |x_i| > omega}, ascending. The inequality is strict.
IndexSet threshold_support(const Vector& x_cs, double omega);

struct FrameRecovery {
    Vector x_hat;       // debiased sparse estimate
    Vector l_hat;       // m - x_hat
    IndexSet support;   // thresholded support
    L1SolveReport report;
};

// Algorithm steps for one frame: project, l1-recover, threshold, debias by
// least squares on the estimated support.
FrameRecovery recover_frame(const ProjectedOperator& op, const Vector& m_t, double xi,
                            double omega, const BpdnOptions& opts = {});

// Known-support path: least squares only.
FrameRecovery recover_frame_mc(const ProjectedOperator& op, const Vector& m_t,
                               const IndexSet& known_support);

}  // namespace reprocs
