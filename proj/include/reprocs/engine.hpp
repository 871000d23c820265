#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reprocs/models.hpp"
#include "reprocs/sparse.hpp"

namespace reprocs {

enum class Phase { detect, ppca };

std::string to_string(Phase p);

struct EngineParams {
    int alpha = 1;          // window length (frames)
    int K = 1;              // projection-PCA rounds per detected change
    double thresh = -1.0;   // detection eigenvalue threshold; < 0 = lambda_train_minus / 2
    // sparse recovery (rpca mode)
    double xi = 0.0;
    double omega = 0.0;
    // xi_t = max(||Phi_t l_hat_{t-1}||, xi_floor, xi_floor_rel * ||m_t||).
    // The relative floor keeps the l1 stage away from penalty scales where
    // soft thresholding stops sparsifying and iterations stall.
    bool xi_adaptive = false;
    double xi_floor = 1e-8;
    double xi_floor_rel = 1e-4;
    bool halt_on_error = false;
    BpdnOptions solver;
};

struct DetectionEvent {
    int t = 0;  // frame at which the change was declared
    int j = 0;  // 1-based change count
};

struct PpcaEvent {
    int t = 0;
    int j = 0;
    int k = 0;      // 1-based iteration within the change
    int r_hat = 0;  // estimated number of new directions
};

struct RecoveryRecord {
    int t = 0;
    Vector l_hat;
    Vector x_hat;
    IndexSet support;   // estimated (rpca) or given (mc)
    Phase phase = Phase::detect;
    int j_hat = 0;
    int k = 0;
    double xi_used = 0.0;
    bool solver_converged = true;
    bool error = false;
    std::string error_message;
};

// Training initialization (empirical second moment of outlier-free data).
enum class RankRule { nonzero_eig, fixed_rank, energy_fraction };

struct TrainInit {
    BasisMatrix p_train;
    double lambda_train_minus = 0.0;
    std::vector<double> eigenvalues;  // descending sample eigenvalues
};

TrainInit train_init(const Matrix& m_train, RankRule rule, int r0 = 0,
                     double energy_fraction = 0.0);

// Parameter settings prescribed by the correctness analysis; far too
// conservative to run, returned for reporting and validation.
struct TheoremParams {
    double zeta = 0.0;
    int K = 0;
    double c_add = 0.0;
    double alpha_lower_bound = 0.0;
    double xi = 0.0;
    double omega = 0.0;
};

TheoremParams theorem_params(const ScenarioTruth& truth, double zeta);

// The largest zeta the analysis admits for a scenario.
double zeta_upper_bound(const ScenarioTruth& truth);

// Online engine: per-frame recovery plus window-aligned detection and
// projection-PCA subspace updates. One instance per stream; step() calls are
// strictly sequential. Frame counting is relative to t_train, so window
// boundaries fall at (t - t_train) mod alpha == 0.
class ReProCSEngine {
public:
    ReProCSEngine(BasisMatrix p_train, double lambda_train_minus, EngineParams params,
                  ObservationMode mode, int t_train = 0);

    // Processes one frame. mc mode requires known_support; rpca forbids it.
    RecoveryRecord step(const Vector& m_t, const IndexSet* known_support = nullptr);

    const BasisMatrix& p_star() const { return p_star_; }
    const BasisMatrix& p_new() const { return p_new_; }
    BasisMatrix p_hat() const { return p_star_.concatenated(p_new_); }
    Phase phase() const { return phase_; }
    int j_hat() const { return j_hat_; }
    int k() const { return k_; }
    int frames_seen() const { return counter_; }
    double lambda_train_minus() const { return lambda_train_minus_; }
    double thresh() const { return thresh_; }
    const EngineParams& params() const { return params_; }
    ObservationMode mode() const { return mode_; }
    double last_window_stat() const { return last_window_stat_; }

    const std::vector<DetectionEvent>& detections() const { return detections_; }
    const std::vector<PpcaEvent>& ppca_events() const { return ppca_events_; }

    // Seed for the adaptive xi rule (commonly the last training frame).
    void set_prev_lhat(const Vector& v) { prev_lhat_ = v; }

    // Checkpointing: scalars as key-values, bases and buffer in the text
    // matrix format, all under one directory.
    void save_checkpoint(const std::string& dir) const;
    static ReProCSEngine load_checkpoint(const std::string& dir);

private:
    void window_update(RecoveryRecord& rec);

    EngineParams params_;
    ObservationMode mode_;
    int t_train_ = 0;
    double lambda_train_minus_ = 0.0;
    double thresh_ = 0.0;

    BasisMatrix p_star_;
    BasisMatrix p_new_;
    Phase phase_ = Phase::detect;
    int j_hat_ = 0;
    int k_ = 0;
    int counter_ = 0;  // frames since t_train
    std::vector<DetectionEvent> detections_;
    std::vector<PpcaEvent> ppca_events_;

    Matrix buffer_;      // n x alpha ring of l_hat estimates
    int buffered_ = 0;   // frames currently in the ring (saturates at alpha)
    Vector prev_lhat_;   // for adaptive xi
    Vector prev_xcs_;    // warm start for the l1 solver
    double prev_penalty_ = 0.0;
    double last_window_stat_ = 0.0;
};

}  // namespace reprocs
