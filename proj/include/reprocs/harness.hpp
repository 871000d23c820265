#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/checks.hpp"
#include "reprocs/engine.hpp"
#include "reprocs/models.hpp"

namespace reprocs {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class InitMethod { train, perturbed_truth };

struct ExperimentConfig {
    SignalModelConfig signal;
    SupportModelConfig support;
    OutlierConfig outliers;
    ObservationMode mode = ObservationMode::rpca;
    EngineParams engine;

    bool engine_from_theorem = false;  // derive K, alpha, xi, omega from the analysis
    double zeta = 0.0;                 // 0 = 0.9 * admissible upper bound

    InitMethod init = InitMethod::train;
    RankRule rank_rule = RankRule::nonzero_eig;
    double energy_fraction = 0.95;
    double init_noise = 1e-4;                 // perturbed_truth only
    std::optional<double> lambda_override;    // engine lambda_train_minus override

    int trials = 1;
    std::uint64_t base_seed = 1;
    int jobs = 1;
    int cadence = 1;
    std::string out_dir = "out";
    bool strict_assumptions = false;
    bool svg = false;
    bool run_oracle = false;
    int oracle_r = 0;  // 0 = true rank

    double effective_zeta(const ScenarioTruth& truth) const;

    // "[section]" headers plus "key = value" lines; '#' comments. Unknown
    // keys are hard errors.
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);
};

struct MetricsFrame {
    int t = 0;
    double rel_err = 0.0;  // ||l - l_hat|| / ||l||
    double se = 0.0;       // dif(P_hat_t, P_t)
    double err2 = 0.0;     // ||l - l_hat||
    double precision = 1.0;
    double recall = 1.0;
    bool exact_support = true;
    Phase phase = Phase::detect;
    int j_hat = 0;
    int k = 0;
    double xi_used = 0.0;
    bool solver_ok = true;
};

struct ChangeStats {
    int j = 0;                     // 1-based true change index
    int t_change = 0;
    bool detected = false;
    int t_detect = 0;              // frame of the paired detection
    int delay = -1;
    bool rhat_correct = true;      // r_hat == r_new for every ppca round
    std::vector<double> se_window_mean;  // K p-PCA windows after detection
    bool se_monotone = true;
    double steady_rel_err_mean = 0.0;  // over [t_j + K alpha, next change)
};

struct TrialResult {
    int trial = 0;
    bool failed = false;
    std::string failure;
    double runtime_seconds = 0.0;

    std::vector<MetricsFrame> metrics;  // one per cadence tick
    std::vector<DetectionEvent> detections;
    std::vector<PpcaEvent> ppca_events;

    int support_mismatch_frames = 0;  // rpca
    bool exact_support_all = true;
    int solver_failures = 0;
    int recovery_errors = 0;
    int false_detections = 0;  // detections outside every [t_j, t_j + 2 alpha]
    bool all_changes_detected_in_window = true;
    std::vector<ChangeStats> changes;
    double steady_rel_err_mean_pre = 0.0;  // before the first change
    AssumptionReport assumptions;
};

TrialResult run_trial(const ExperimentConfig& cfg, int trial_index,
                      const std::string& out_dir);

struct EnsembleResult {
    std::vector<TrialResult> trials;
    double exact_support_fraction = 0.0;
    double rhat_correct_fraction = 0.0;
    double se_monotone_fraction = 0.0;
    double detection_ok_fraction = 0.0;  // all changes inside [t_j, t_j+2a], no false alarms
    std::vector<double> steady_mean_per_change;  // ensemble mean per change
    double steady_rel_err_worst_mean = 0.0;      // worst per-trial steady mean
    double max_runtime_seconds = 0.0;
};

EnsembleResult run_ensemble(const ExperimentConfig& cfg);

// Non-causal reference: at every window boundary, eigendecompose the
// observed-so-far second moment and project each of the window's frames on
// the top-r subspace. Returns per-frame relative errors for t > t_train.
std::vector<double> baseline_oracle(const Matrix& L, const Matrix& M,
                                    ObservationMode mode, int r, int alpha,
                                    int t_train);

// Recomputes the cross-trial summary rows from the per-trial metrics CSVs.
// Used to verify that summary.csv is exactly reproducible from its parts.
std::vector<std::vector<std::string>> recompute_summary_from_csv(
    const std::string& out_dir, int trials);

void write_summary_svg(const std::string& path,
                       const std::vector<std::vector<std::string>>& summary_rows);

}  // namespace reprocs
