#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reprocs/engine.hpp"
#include "reprocs/models.hpp"

namespace reprocs {

// One measured precondition. `bound` is the admissible limit and `detail`
// states the condition in measurable terms, including its direction.
struct CheckEntry {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    std::string detail;
};

struct AssumptionReport {
    std::vector<CheckEntry> entries;

    bool overall_pass() const;
    void add(CheckEntry e) { entries.push_back(std::move(e)); }
    void add(std::vector<CheckEntry> es);

    // CSV: check,measured,bound,ratio,pass
    void write_csv(const std::string& path) const;
    void write_keyvalues(const std::string& path) const;
    std::string to_text() const;
};

// Incoherence of the subspace blocks. Computes the smallest mu satisfying
// the per-column energy bounds, then evaluates both product bounds and the
// kappa_{2s} targets (exact enumeration on small instances, sqrt(2s)*kappa_1
// bound otherwise).
std::vector<CheckEntry> check_denseness(const BasisMatrix& p0,
                                        const std::vector<BasisMatrix>& p_new,
                                        int s, int n);

// Slow-change conditions on the new-direction variances over [t_j, t_j + d]:
// the lambda sandwich, the growth cap q v^d <= 3, and the change spacing.
std::vector<CheckEntry> check_slow_change(const ScenarioTruth& truth);

// d >= (K + 2) alpha, stated against concrete engine parameters.
CheckEntry check_spacing_window(const ScenarioTruth& truth, const EngineParams& params);

// Support-model conditions: support size, dwell, rho-step disjointness, the
// window sum of set differences, pairwise disjointness of differences within
// a window, and the rho^2 beta <= 0.01 alpha budget.
std::vector<CheckEntry> check_support_model(const std::vector<IndexSet>& supports,
                                            int n, int s, int rho, int beta,
                                            int alpha);

// Constructive per-window upper bound on the window occupancy h_u*(alpha):
// builds the difference partition from the change points and returns
// max_i |J_(i),u| per full window. Reports windows where the construction's
// preconditions fail instead of inventing a bound.
struct WindowBound {
    int window = 0;      // 0-based window index
    bool valid = false;  // construction applicable
    int bound = 0;       // upper bound on h_u*(alpha) when valid
    std::string message;
};

std::vector<WindowBound> h_star_upper(const std::vector<IndexSet>& supports,
                                      int alpha, int rho);

// Spectral-norm bound for sums of support-embedded PSD blocks over one
// window: ||sum_t I_T A_t I_T'||_2 <= rho^2 h+ alpha sigma+.
struct BlockBandedCheck {
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
};

BlockBandedCheck blockbanded_bound_check(const std::vector<Matrix>& a_seq,
                                         const std::vector<IndexSet>& supports,
                                         int n, int rho, double h_plus, int alpha,
                                         double sigma_plus);

// Outlier magnitude margin x_min > 14 xi (rpca only).
CheckEntry check_xmin(const ScenarioTruth& truth, double xi);

// Initial subspace accuracy dif(P_hat_train, P_0) <= r0 zeta.
CheckEntry check_init(const BasisMatrix& p_hat_train, const BasisMatrix& p_true0,
                      int r0, double zeta);

CheckEntry check_zeta_range(const ScenarioTruth& truth, double zeta);

// Full report for a scenario and a concrete parameterization.
AssumptionReport check_scenario(const ScenarioTruth& truth, const EngineParams& params,
                                double zeta, double xi,
                                const BasisMatrix* p_hat_train = nullptr);

}  // namespace reprocs
