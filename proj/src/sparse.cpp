#include "reprocs/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reprocs {

namespace {

inline void soft_threshold(const Vector& v, double lam, Vector& out) {
    out.resize(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = v(i);
        if (a > lam)
            out(i) = a - lam;
        else if (a < -lam)
            out(i) = a + lam;
        else
            out(i) = 0.0;
    }
}

struct LassoState {
    Vector x;       // current iterate
    Vector r_proj;  // ytil - Phi x, kept in sync with x
    bool fixed_point = false;
};

// FISTA on 0.5||Phi x - ytil||^2 + lam ||x||_1. The Lipschitz constant of
// the smooth part is 1 because Phi is an orthogonal projector. One operator
// apply per iteration. Stops on the prox-gradient fixed-point residual.
int run_fista(const ProjectedOperator& op, const Vector& ytil, double lam,
              double tol, int iter_budget, LassoState& st) {
    const Eigen::Index n = ytil.size();
    Vector z = st.x;
    Vector x_prev = st.x;
    Vector grad(n), x_new(n);
    double theta = 1.0;
    int used = 0;
    st.fixed_point = false;
    while (used < iter_budget) {
        grad = op.apply(z) - ytil;  // = Phi z - ytil
        ++used;
        soft_threshold(z - grad, lam, x_new);

        const double step_inf = (z - x_new).cwiseAbs().maxCoeff();
        // Gradient-based restart keeps the momentum from overshooting.
        const double osc = (z - x_new).dot(x_new - x_prev);
        if (osc > 0) {
            theta = 1.0;
            z = x_new;
        } else {
            const double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            z = x_new + ((theta - 1.0) / theta_new) * (x_new - x_prev);
            theta = theta_new;
        }
        x_prev = x_new;
        if (step_inf <= tol) {
            st.fixed_point = true;
            break;
        }
    }
    st.x = x_prev;
    st.r_proj = ytil - op.apply(st.x);
    ++used;
    return used;
}

}  // namespace

L1SolveReport bpdn_solve(const ProjectedOperator& op, const Vector& y, double xi,
                         const BpdnOptions& opts) {
    if (xi < 0) throw std::invalid_argument("xi must be nonnegative");
    if (y.size() != op.n()) throw std::invalid_argument("measurement length mismatch");

    L1SolveReport rep;
    const double ny = y.norm();

    // Zero is feasible and l1-minimal.
    if (ny <= xi) {
        rep.solution = Vector::Zero(op.n());
        rep.residual_norm = ny;
        rep.converged = true;
        return rep;
    }

    const Vector ytil = op.apply(y);
    const double c2 = (y - ytil).squaredNorm();
    const double c = std::sqrt(c2);
    const double abs_slack = 1e-13 * std::max(1.0, ny);

    // No x can bring the residual below the out-of-range component.
    if (c > xi * (1.0 + opts.feas_tol) + abs_slack) {
        rep.solution = Vector::Zero(op.n());
        rep.residual_norm = ny;
        rep.converged = false;
        return rep;
    }

    const double xi_proj = std::sqrt(std::max(xi * xi - c2, 0.0));
    const double lam_max = ytil.cwiseAbs().maxCoeff();
    const double accept_hi = xi * (1.0 + opts.feas_tol) + abs_slack;
    const double ytil_l1 = ytil.lpNorm<1>();
    const double eps = std::numeric_limits<double>::epsilon();

    LassoState st;
    if (opts.warm_start && opts.warm_start->size() == op.n())
        st.x = *opts.warm_start;
    else
        st.x = Vector::Zero(op.n());

    double lam;
    if (opts.penalty_hint > 0 && opts.penalty_hint < lam_max)
        lam = opts.penalty_hint;
    else
        lam = std::max(lam_max * xi_proj / std::max(ytil.norm(), 1e-300), 1e-300);
    // Near the equality-constrained regime the root is at penalty ~ 0; jump
    // straight to a floor value instead of bisecting toward it.
    const bool equality_like = xi_proj <= 1e-10 * ny;
    if (equality_like) lam = std::max(1e-14 * lam_max, 1e-300);

    double lam_lo = 0.0, lam_hi = lam_max;
    double prev_lam = -1.0, prev_full = -1.0;
    double tol_inner = 1e-2 * std::max(lam, abs_slack);
    int used_total = 0;
    const int outer_max = 80;

    for (int outer = 0; outer < outer_max && used_total < opts.max_iters; ++outer) {
        used_total += run_fista(op, ytil, lam, tol_inner, opts.max_iters - used_total, st);

        const double r2 = st.r_proj.squaredNorm();
        const double full = std::sqrt(r2 + c2);
        const double l1 = st.x.lpNorm<1>();
        const double r_inf = st.r_proj.cwiseAbs().maxCoeff();
        const double dual =
            (ytil.dot(st.r_proj) + c2 - xi * full) / std::max(r_inf, 1e-300);
        const double gap = l1 - dual;
        // Resolution limit of the residual-built dual point: the dot product
        // and the residual itself carry rounding that divides by r_inf.
        const double gap_noise =
            32.0 * eps * ytil_l1 * (1.0 + lam_max / std::max(r_inf, 1e-300));

        rep.solution = st.x;
        rep.residual_norm = full;
        rep.l1_value = l1;
        rep.iterations = used_total;
        rep.duality_gap = std::max(gap, 0.0);
        rep.penalty = lam;

        if (full <= accept_hi &&
            gap <= opts.opt_tol * std::max(1.0, l1) + gap_noise) {
            rep.converged = true;
            return rep;
        }
        if (equality_like && full <= accept_hi && st.fixed_point) {
            // At penalty ~ eps the residual-based dual point is all rounding
            // noise, but the penalized fixed point itself certifies: any z
            // with Phi z = ytil has ||z||_1 >= ||x||_1, so the l1 value can
            // only undershoot the equality optimum. n*lam bounds the slack.
            rep.duality_gap = lam * double(op.n());
            rep.converged = true;
            return rep;
        }

        // Update the bracket on the monotone residual(penalty) curve.
        if (full > xi)
            lam_hi = lam;
        else
            lam_lo = lam;

        double next;
        if (full > 0 && std::abs(full - xi) <= 1e-2 * xi) {
            // Near the constraint the residual responds about proportionally
            // to the penalty; a multiplicative nudge is far more stable than
            // a secant fed with noise-level differences. Tighten the inner
            // tolerance alongside, but never below the rounding floor.
            next = lam * (xi / full);
            tol_inner = std::min(tol_inner * 0.5, 0.1 * opts.feas_tol * xi);
            tol_inner = std::max(tol_inner, 4.0 * eps * std::max(lam_max, 1.0));
        } else {
            if (prev_full >= 0 && std::abs(full - prev_full) > 1e-300) {
                next = lam + (xi - full) * (prev_lam - lam) / (prev_full - full);
            } else {
                next = -1.0;
            }
            if (!(next > lam_lo && next < lam_hi)) {
                next = lam_lo > 0 ? std::sqrt(lam_lo * lam_hi) : 0.1 * lam_hi;
            }
            prev_lam = lam;
            prev_full = full;
            tol_inner = std::max(tol_inner * 0.5, 1e-9 * std::max(lam_max, abs_slack));
            tol_inner = std::min(tol_inner, 1e-2 * std::max(lam, abs_slack));
        }
        lam = std::max(std::min(next, lam_max), 1e-300);
    }

    rep.converged = false;
    return rep;
}

IndexSet threshold_support(const Vector& x_cs, double omega) {
    if (omega <= 0) throw std::invalid_argument("omega must be positive");
    IndexSet t;
    for (Eigen::Index i = 0; i < x_cs.size(); ++i)
        if (std::abs(x_cs(i)) > omega) t.push_back(static_cast<int>(i));
    return t;
}

FrameRecovery recover_frame(const ProjectedOperator& op, const Vector& m_t, double xi,
                            double omega, const BpdnOptions& opts) {
    FrameRecovery out;
    const Vector y = op.apply(m_t);
    out.report = bpdn_solve(op, y, xi, opts);
    out.support = threshold_support(out.report.solution, omega);
    out.x_hat = projected_ls(op.basis, out.support, y);
    out.l_hat = m_t - out.x_hat;
    return out;
}

FrameRecovery recover_frame_mc(const ProjectedOperator& op, const Vector& m_t,
                               const IndexSet& known_support) {
    FrameRecovery out;
    const Vector y = op.apply(m_t);
    out.support = known_support;
    out.x_hat = projected_ls(op.basis, known_support, y);
    out.l_hat = m_t - out.x_hat;
    out.report.converged = true;
    out.report.solution = out.x_hat;
    return out;
}

}  // namespace reprocs
