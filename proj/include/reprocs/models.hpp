#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/linalg.hpp"

namespace reprocs {

enum class ObservationMode { mc, rpca };

std::string to_string(ObservationMode m);
ObservationMode observation_mode_from_string(const std::string& s);

// Piecewise-constant amplitude override for one existing direction, applied
// on frames t_begin..t_end (1-based, inclusive). Lets experiments zero out or
// rescale directions that are already part of the subspace.
struct VarianceOverride {
    int direction = 0;  // global column index in the stacked basis
    int t_begin = 1;
    int t_end = 0;
    double amplitude = 0.0;
};

// Low-rank signal stream: piecewise-constant subspace with new directions
// added at the change times, coefficients bounded and independent across
// time. New-direction variances grow as q_i * v_i^(t - t_j) * lambda_train_minus;
// coefficients are uniform with exactly that variance.
struct SignalModelConfig {
    int n = 0;
    int t_max = 0;
    int t_train = 0;
    int r0 = 1;
    std::vector<int> change_times;          // ascending, all in (t_train, t_max]
    std::vector<int> r_new;                 // per change
    std::vector<std::vector<double>> q;     // per change, per new direction
    std::vector<std::vector<double>> v;     // per change, per new direction
    double lambda_train_minus = 1.0;
    double gamma_star = 5.0;                // amplitude bound of existing coefficients
    int d = 0;                              // slow-change horizon; 0 = min change spacing
    std::vector<VarianceOverride> variance_overrides;

    int changes() const { return static_cast<int>(change_times.size()); }
    int total_rank() const;
    int min_change_spacing() const;  // includes spacing to t_max + 1 after the last change
    int effective_d() const { return d > 0 ? d : min_change_spacing(); }

    // Structural errors throw; the returned list holds model-compliance
    // violations (callers decide whether those are fatal).
    std::vector<std::string> validate() const;
};

enum class SupportVariant { model3, bernoulli_gaussian, everyframe };

std::string to_string(SupportVariant v);
SupportVariant support_variant_from_string(const std::string& s);

struct SupportModelConfig {
    SupportVariant variant = SupportVariant::model3;
    int s = 1;          // max support size
    int rho = 1;        // displacement divisor (min move = ceil(s/rho))
    int rho2 = 1;       // max-motion divisor (max move = floor(s/rho2))
    int beta = 1;       // max dwell
    int alpha = 1;      // window length the invariants are stated against
    // model3: frames spent at each position; 0 = max(beta - 1, 1), the largest
    // dwell that keeps the emitted sequence strictly inside the support model.
    int dwell = 0;
    bool randomize = false;  // randomize dwell in [1, max dwell] and move in range
    // bernoulli_gaussian
    double move_prob = 1.0;  // q
    double sigma = 0.0;
    // everyframe
    int m = 1;

    int effective_dwell() const { return dwell > 0 ? dwell : std::max(beta - 1, 1); }
    int min_move() const { return (s + rho - 1) / rho; }
    int max_move() const { return s / rho2; }

    std::vector<std::string> validate(int n, int t_max) const;
};

struct OutlierConfig {
    double x_lo = 2.0;
    double x_hi = 6.0;
    bool random_sign = false;
};

// Output of gen_signal.
struct SignalTruth {
    Matrix L;                              // n x t_max
    std::vector<BasisMatrix> p_segments;   // J+1 bases, segment j covers [t_j, t_{j+1})
    std::vector<Vector> lambda_diag;       // per frame, diagonal of the coefficient covariance
    double gamma_measured = 0.0;           // max |a_t| entry over all frames
    double gamma_new_measured = 0.0;       // max new-direction |a| entry within d of a change

    const BasisMatrix& segment_basis(int segment) const { return p_segments[segment]; }
};

// Full generated scenario: truth plus observations.
struct ScenarioTruth {
    SignalModelConfig signal;
    SupportModelConfig support;
    OutlierConfig outliers;
    ObservationMode mode = ObservationMode::rpca;
    std::uint64_t seed = 0;

    SignalTruth sig;
    Matrix M;                                       // n x t_max observations
    std::vector<IndexSet> supports;                 // indexed by t-1; empty during training
    std::vector<std::vector<double>> outlier_values;  // aligned with supports (rpca)

    int segment_of(int t) const;                    // 0..J for frame t (1-based)
    const BasisMatrix& true_basis_at(int t) const;
    Vector x_col(int t) const;                      // dense outlier column (rpca)
    double x_min() const;                           // min nonzero |x|; +inf if none
};

// --- generators (deterministic in (config, seed)) ---

SignalTruth gen_signal(const SignalModelConfig& cfg, std::uint64_t seed,
                       bool enforce_compliance = false);

// Support sequences of `count` frames for the three movement models.
std::vector<IndexSet> gen_support_model3(const SupportModelConfig& cfg, int n,
                                         int count, std::uint64_t seed);
std::vector<IndexSet> gen_support_bernoulli_gaussian(const SupportModelConfig& cfg,
                                                     int n, int count,
                                                     std::uint64_t seed);
std::vector<IndexSet> gen_support_everyframe(const SupportModelConfig& cfg, int n,
                                             int count, std::uint64_t seed);
std::vector<IndexSet> gen_support(const SupportModelConfig& cfg, int n, int count,
                                  std::uint64_t seed);

// Outlier magnitudes for each frame's support. Values are uniform on
// [x_lo, x_hi]; signs are positive unless random_sign is set.
std::vector<std::vector<double>> gen_outliers(const std::vector<IndexSet>& supports,
                                              const OutlierConfig& cfg,
                                              std::uint64_t seed);

// Observation assembly: mc zeroes the supported entries, rpca adds outliers.
Matrix assemble(const Matrix& L, const std::vector<IndexSet>& supports,
                const std::vector<std::vector<double>>& values, ObservationMode mode,
                int t_train);

ScenarioTruth generate_scenario(const SignalModelConfig& signal,
                                const SupportModelConfig& support,
                                const OutlierConfig& outliers, ObservationMode mode,
                                std::uint64_t seed, bool enforce_compliance = false);

// Directory serialization: L.mat, M.mat, supports.csv, meta.
void save_scenario(const ScenarioTruth& truth, const std::string& dir);
ScenarioTruth load_scenario(const std::string& dir);

}  // namespace reprocs
