#include "reprocs/harness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "reprocs/rng.hpp"

namespace reprocs {

namespace {

constexpr std::uint64_t kTagInitNoise = 5;

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("expected boolean for " + key + ", got: " + v);
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("expected integer for " + key + ", got: " + v);
    }
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("expected number for " + key + ", got: " + v);
    }
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(parse_int(cell, key));
    return out;
}

std::vector<double> parse_real_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(parse_real(cell, key));
    return out;
}

std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

double ExperimentConfig::effective_zeta(const ScenarioTruth& truth) const {
    if (zeta > 0) return zeta;
    return 0.9 * zeta_upper_bound(truth);
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::vector<double> q_per_change, v_per_change;

    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string s = strip(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("bad section header at line " + std::to_string(lineno));
            section = s.substr(1, s.size() - 2);
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        const std::string key = strip(s.substr(0, eq));
        const std::string val = strip(s.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;

        if (full == "signal.n") cfg.signal.n = parse_int(val, full);
        else if (full == "signal.t_max") cfg.signal.t_max = parse_int(val, full);
        else if (full == "signal.t_train") cfg.signal.t_train = parse_int(val, full);
        else if (full == "signal.r0") cfg.signal.r0 = parse_int(val, full);
        else if (full == "signal.change_times") cfg.signal.change_times = parse_int_list(val, full);
        else if (full == "signal.r_new") cfg.signal.r_new = parse_int_list(val, full);
        else if (full == "signal.q") q_per_change = parse_real_list(val, full);
        else if (full == "signal.v") v_per_change = parse_real_list(val, full);
        else if (full == "signal.lambda_train_minus") cfg.signal.lambda_train_minus = parse_real(val, full);
        else if (full == "signal.gamma_star") cfg.signal.gamma_star = parse_real(val, full);
        else if (full == "signal.d") cfg.signal.d = parse_int(val, full);
        else if (full == "signal.variance_overrides") {
            std::stringstream os(val);
            std::string item;
            while (std::getline(os, item, ';')) {
                if (item.empty()) continue;
                std::stringstream is(item);
                std::string cell;
                VarianceOverride ov;
                if (!std::getline(is, cell, ':')) throw ConfigError("bad override: " + item);
                ov.direction = parse_int(cell, full);
                if (!std::getline(is, cell, ':')) throw ConfigError("bad override: " + item);
                ov.t_begin = parse_int(cell, full);
                if (!std::getline(is, cell, ':')) throw ConfigError("bad override: " + item);
                ov.t_end = parse_int(cell, full);
                if (!std::getline(is, cell, ':')) throw ConfigError("bad override: " + item);
                ov.amplitude = parse_real(cell, full);
                cfg.signal.variance_overrides.push_back(ov);
            }
        }
        else if (full == "support.variant") cfg.support.variant = support_variant_from_string(val);
        else if (full == "support.s") cfg.support.s = parse_int(val, full);
        else if (full == "support.rho") cfg.support.rho = parse_int(val, full);
        else if (full == "support.rho2") cfg.support.rho2 = parse_int(val, full);
        else if (full == "support.beta") cfg.support.beta = parse_int(val, full);
        else if (full == "support.dwell") cfg.support.dwell = parse_int(val, full);
        else if (full == "support.randomize") cfg.support.randomize = parse_bool(val, full);
        else if (full == "support.move_prob") cfg.support.move_prob = parse_real(val, full);
        else if (full == "support.sigma") cfg.support.sigma = parse_real(val, full);
        else if (full == "support.m") cfg.support.m = parse_int(val, full);
        else if (full == "outliers.x_lo") cfg.outliers.x_lo = parse_real(val, full);
        else if (full == "outliers.x_hi") cfg.outliers.x_hi = parse_real(val, full);
        else if (full == "outliers.random_sign") cfg.outliers.random_sign = parse_bool(val, full);
        else if (full == "engine.alpha") cfg.engine.alpha = parse_int(val, full);
        else if (full == "engine.K") cfg.engine.K = parse_int(val, full);
        else if (full == "engine.thresh") cfg.engine.thresh = parse_real(val, full);
        else if (full == "engine.xi") cfg.engine.xi = parse_real(val, full);
        else if (full == "engine.omega") cfg.engine.omega = parse_real(val, full);
        else if (full == "engine.xi_adaptive") cfg.engine.xi_adaptive = parse_bool(val, full);
        else if (full == "engine.xi_floor") cfg.engine.xi_floor = parse_real(val, full);
        else if (full == "engine.halt_on_error") cfg.engine.halt_on_error = parse_bool(val, full);
        else if (full == "engine.from_theorem") cfg.engine_from_theorem = parse_bool(val, full);
        else if (full == "engine.zeta") cfg.zeta = parse_real(val, full);
        else if (full == "engine.max_solver_iters") cfg.engine.solver.max_iters = parse_int(val, full);
        else if (full == "engine.feas_tol") cfg.engine.solver.feas_tol = parse_real(val, full);
        else if (full == "engine.opt_tol") cfg.engine.solver.opt_tol = parse_real(val, full);
        else if (full == "init.method") {
            if (val == "train") cfg.init = InitMethod::train;
            else if (val == "perturbed_truth") cfg.init = InitMethod::perturbed_truth;
            else throw ConfigError("unknown init method: " + val);
        }
        else if (full == "init.rank_rule") {
            if (val == "nonzero_eig") cfg.rank_rule = RankRule::nonzero_eig;
            else if (val == "fixed_rank") cfg.rank_rule = RankRule::fixed_rank;
            else if (val == "energy_fraction") cfg.rank_rule = RankRule::energy_fraction;
            else throw ConfigError("unknown rank rule: " + val);
        }
        else if (full == "init.energy_fraction") cfg.energy_fraction = parse_real(val, full);
        else if (full == "init.noise") cfg.init_noise = parse_real(val, full);
        else if (full == "init.lambda_override") {
            if (val == "estimate") cfg.lambda_override.reset();
            else cfg.lambda_override = parse_real(val, full);
        }
        else if (full == "run.mode") cfg.mode = observation_mode_from_string(val);
        else if (full == "run.trials") cfg.trials = parse_int(val, full);
        else if (full == "run.base_seed") cfg.base_seed = static_cast<std::uint64_t>(std::stoull(val));
        else if (full == "run.jobs") cfg.jobs = parse_int(val, full);
        else if (full == "run.cadence") cfg.cadence = parse_int(val, full);
        else if (full == "run.out") cfg.out_dir = val;
        else if (full == "run.strict_assumptions") cfg.strict_assumptions = parse_bool(val, full);
        else if (full == "run.svg") cfg.svg = parse_bool(val, full);
        else if (full == "run.oracle") cfg.run_oracle = parse_bool(val, full);
        else if (full == "run.oracle_r") cfg.oracle_r = parse_int(val, full);
        else throw ConfigError("unknown config key: " + full);
    }

    // q and v arrive as one value per change, broadcast across the change's
    // new directions. A single value broadcasts across all changes.
    const int J = cfg.signal.changes();
    auto expand = [&](std::vector<double>& per_change, double fallback,
                      const char* what) {
        if (per_change.empty()) per_change.assign(J, fallback);
        if (static_cast<int>(per_change.size()) == 1 && J > 1)
            per_change.assign(J, per_change[0]);
        if (static_cast<int>(per_change.size()) != J)
            throw ConfigError(std::string(what) + " needs one value per change");
    };
    if (J > 0) {
        expand(q_per_change, 1.0, "signal.q");
        expand(v_per_change, 1.0, "signal.v");
        cfg.signal.q.clear();
        cfg.signal.v.clear();
        for (int j = 0; j < J; ++j) {
            cfg.signal.q.emplace_back(cfg.signal.r_new[j], q_per_change[j]);
            cfg.signal.v.emplace_back(cfg.signal.r_new[j], v_per_change[j]);
        }
    }
    cfg.support.alpha = cfg.engine.alpha;
    if (cfg.trials < 1) throw ConfigError("run.trials must be >= 1");
    if (cfg.cadence < 1) throw ConfigError("run.cadence must be >= 1");
    if (cfg.jobs < 1) throw ConfigError("run.jobs must be >= 1");
    return cfg;
}

namespace {

struct Paired {
    std::vector<ChangeStats> changes;
    int false_detections = 0;
    bool all_in_window = true;
};

Paired pair_detections(const ScenarioTruth& truth,
                       const std::vector<DetectionEvent>& dets,
                       const std::vector<PpcaEvent>& ppca, int alpha, int K) {
    Paired out;
    std::vector<bool> used(dets.size(), false);
    for (int j = 0; j < truth.signal.changes(); ++j) {
        ChangeStats cs;
        cs.j = j + 1;
        cs.t_change = truth.signal.change_times[j];
        for (size_t i = 0; i < dets.size(); ++i) {
            if (used[i]) continue;
            if (dets[i].t >= cs.t_change && dets[i].t <= cs.t_change + 2 * alpha) {
                used[i] = true;
                cs.detected = true;
                cs.t_detect = dets[i].t;
                cs.delay = dets[i].t - cs.t_change;
                for (const auto& ev : ppca)
                    if (ev.j == dets[i].j && ev.r_hat != truth.signal.r_new[j])
                        cs.rhat_correct = false;
                break;
            }
        }
        if (!cs.detected) {
            cs.rhat_correct = false;
            out.all_in_window = false;
        }
        out.changes.push_back(cs);
    }
    for (size_t i = 0; i < dets.size(); ++i)
        if (!used[i]) ++out.false_detections;
    (void)K;
    return out;
}

std::string metrics_header() {
    return "t,rel_err,se,err2,precision,recall,exact_support,phase,j_hat,k,xi_used,"
           "solver_ok";
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsFrame>& rows) {
    CsvWriter csv(path);
    {
        std::vector<std::string> h;
        std::stringstream ss(metrics_header());
        std::string cell;
        while (std::getline(ss, cell, ',')) h.push_back(cell);
        csv.row(h);
    }
    for (const auto& m : rows)
        csv.row({CsvWriter::num(m.t), CsvWriter::num(m.rel_err), CsvWriter::num(m.se),
                 CsvWriter::num(m.err2), CsvWriter::num(m.precision),
                 CsvWriter::num(m.recall), m.exact_support ? "1" : "0",
                 to_string(m.phase), CsvWriter::num(m.j_hat), CsvWriter::num(m.k),
                 CsvWriter::num(m.xi_used), m.solver_ok ? "1" : "0"});
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, int trial_index,
                      const std::string& out_dir) {
    const auto t_start = std::chrono::steady_clock::now();
    TrialResult res;
    res.trial = trial_index;

    SupportModelConfig sup_cfg = cfg.support;
    sup_cfg.alpha = cfg.engine.alpha;
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(trial_index);
    ScenarioTruth truth = generate_scenario(cfg.signal, sup_cfg, cfg.outliers,
                                            cfg.mode, seed);
    const int n = cfg.signal.n;
    const int t_train = cfg.signal.t_train;
    const int t_max = cfg.signal.t_max;

    const double zeta = cfg.effective_zeta(truth);
    EngineParams ep = cfg.engine;
    double theorem_xi = 0.0;
    try {
        TheoremParams tp = theorem_params(truth, zeta);
        theorem_xi = tp.xi;
        if (cfg.engine_from_theorem) {
            ep.K = tp.K;
            ep.alpha = static_cast<int>(std::ceil(tp.alpha_lower_bound));
            ep.xi = tp.xi;
            ep.omega = tp.omega;
            ep.xi_adaptive = false;
        }
    } catch (const std::exception&) {
        theorem_xi = ep.xi;
    }
    if (cfg.mode == ObservationMode::rpca) {
        if (!ep.xi_adaptive && ep.xi <= 0) ep.xi = theorem_xi;
        if (ep.omega <= 0) ep.omega = 7.0 * (ep.xi > 0 ? ep.xi : theorem_xi);
    }

    // Initial subspace estimate.
    BasisMatrix p_hat = BasisMatrix::empty(n);
    double lambda_minus = cfg.signal.lambda_train_minus;
    if (cfg.init == InitMethod::train) {
        TrainInit ti = train_init(truth.M.leftCols(t_train), cfg.rank_rule,
                                  cfg.signal.r0, cfg.energy_fraction);
        p_hat = ti.p_train;
        lambda_minus = cfg.lambda_override.value_or(ti.lambda_train_minus);
    } else {
        Rng rng(Rng::derive(seed, kTagInitNoise));
        Matrix noisy = truth.sig.p_segments[0].data();
        for (Eigen::Index c = 0; c < noisy.cols(); ++c)
            for (Eigen::Index i = 0; i < noisy.rows(); ++i)
                noisy(i, c) += cfg.init_noise * rng.normal();
        p_hat = BasisMatrix::orthonormalized(noisy);
        lambda_minus = cfg.lambda_override.value_or(cfg.signal.lambda_train_minus);
    }

    res.assumptions = check_scenario(truth, ep, zeta,
                                     theorem_xi > 0 ? theorem_xi : ep.xi, &p_hat);

    ReProCSEngine engine(p_hat, lambda_minus, ep, cfg.mode, t_train);
    engine.set_prev_lhat(truth.M.col(t_train - 1));

    std::vector<double> se_full(t_max - t_train, 0.0);
    std::vector<double> rel_full(t_max - t_train, 0.0);

    for (int t = t_train + 1; t <= t_max; ++t) {
        const Vector m = truth.M.col(t - 1);
        RecoveryRecord rec;
        try {
            rec = engine.step(m, cfg.mode == ObservationMode::mc
                                     ? &truth.supports[t - 1]
                                     : nullptr);
        } catch (const std::exception& e) {
            res.failed = true;
            res.failure = e.what();
            break;
        }
        if (rec.error) ++res.recovery_errors;
        if (!rec.solver_converged) ++res.solver_failures;

        const Vector l = truth.sig.L.col(t - 1);
        const double err2 = (l - rec.l_hat).norm();
        const double rel = err2 / l.norm();
        const double se = dif(engine.p_hat(), truth.true_basis_at(t));
        se_full[t - t_train - 1] = se;
        rel_full[t - t_train - 1] = rel;

        MetricsFrame mf;
        mf.t = t;
        mf.rel_err = rel;
        mf.se = se;
        mf.err2 = err2;
        mf.phase = rec.phase;
        mf.j_hat = rec.j_hat;
        mf.k = rec.k;
        mf.xi_used = rec.xi_used;
        mf.solver_ok = rec.solver_converged && !rec.error;
        if (cfg.mode == ObservationMode::rpca) {
            const IndexSet& truth_sup = truth.supports[t - 1];
            size_t hit = 0;
            {
                size_t i = 0, j = 0;
                while (i < rec.support.size() && j < truth_sup.size()) {
                    if (rec.support[i] < truth_sup[j]) ++i;
                    else if (rec.support[i] > truth_sup[j]) ++j;
                    else ++hit, ++i, ++j;
                }
            }
            mf.precision = rec.support.empty() ? 1.0 : double(hit) / rec.support.size();
            mf.recall = truth_sup.empty() ? 1.0 : double(hit) / truth_sup.size();
            mf.exact_support = rec.support == truth_sup;
            if (!mf.exact_support) {
                ++res.support_mismatch_frames;
                res.exact_support_all = false;
            }
        }
        if (t % cfg.cadence == 0) res.metrics.push_back(mf);
    }

    res.detections = engine.detections();
    res.ppca_events = engine.ppca_events();

    if (!res.failed) {
        Paired paired = pair_detections(truth, res.detections, res.ppca_events,
                                        ep.alpha, ep.K);
        res.false_detections = paired.false_detections;
        res.all_changes_detected_in_window = paired.all_in_window;
        res.changes = std::move(paired.changes);

        auto range_mean = [&](int lo, int hi) {  // frames, inclusive, full rate
            lo = std::max(lo, t_train + 1);
            hi = std::min(hi, t_max);
            if (hi < lo) return 0.0;
            double s = 0.0;
            for (int t = lo; t <= hi; ++t) s += rel_full[t - t_train - 1];
            return s / double(hi - lo + 1);
        };
        const int J = truth.signal.changes();
        res.steady_rel_err_mean_pre =
            range_mean(t_train + 1, J > 0 ? truth.signal.change_times[0] - 1 : t_max);
        for (int j = 0; j < J; ++j) {
            auto& cs = res.changes[j];
            const int next = j + 1 < J ? truth.signal.change_times[j + 1] : t_max + 1;
            cs.steady_rel_err_mean =
                range_mean(cs.t_change + ep.K * ep.alpha, next - 1);
            if (cs.detected) {
                for (int k = 1; k <= ep.K; ++k) {
                    const int lo = cs.t_detect + (k - 1) * ep.alpha + 1;
                    const int hi = std::min(cs.t_detect + k * ep.alpha, t_max);
                    if (lo > t_max) break;
                    double s = 0.0;
                    int cnt = 0;
                    for (int t = std::max(lo, t_train + 1); t <= hi; ++t, ++cnt)
                        s += se_full[t - t_train - 1];
                    cs.se_window_mean.push_back(cnt ? s / cnt : 0.0);
                }
                for (size_t k = 1; k < cs.se_window_mean.size(); ++k)
                    if (cs.se_window_mean[k] > cs.se_window_mean[k - 1])
                        cs.se_monotone = false;
            } else {
                cs.se_monotone = false;
            }
        }
    }

    res.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();

    // Per-trial artifacts.
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::string suffix = std::to_string(trial_index);
        write_metrics_csv(out_dir + "/metrics_" + suffix + ".csv", res.metrics);
        {
            CsvWriter csv(out_dir + "/detections_" + suffix + ".csv");
            csv.row({"kind", "t", "j", "k", "r_hat"});
            for (const auto& d : res.detections)
                csv.row({"detect", CsvWriter::num(d.t), CsvWriter::num(d.j), "0", "0"});
            for (const auto& p : res.ppca_events)
                csv.row({"ppca", CsvWriter::num(p.t), CsvWriter::num(p.j),
                         CsvWriter::num(p.k), CsvWriter::num(p.r_hat)});
        }
        res.assumptions.write_csv(out_dir + "/assumptions_" + suffix + ".csv");
        {
            CsvWriter csv(out_dir + "/trial_summary_" + suffix + ".csv");
            csv.row({"key", "value"});
            csv.row({"failed", res.failed ? "1" : "0"});
            csv.row({"runtime_s", CsvWriter::num(res.runtime_seconds)});
            csv.row({"exact_support_all", res.exact_support_all ? "1" : "0"});
            csv.row({"support_mismatch_frames", CsvWriter::num(res.support_mismatch_frames)});
            csv.row({"solver_failures", CsvWriter::num(res.solver_failures)});
            csv.row({"recovery_errors", CsvWriter::num(res.recovery_errors)});
            csv.row({"false_detections", CsvWriter::num(res.false_detections)});
            csv.row({"all_changes_detected_in_window",
                     res.all_changes_detected_in_window ? "1" : "0"});
            csv.row({"steady_rel_err_mean_pre", CsvWriter::num(res.steady_rel_err_mean_pre)});
            for (const auto& cs : res.changes) {
                const std::string p = "change_" + std::to_string(cs.j) + "_";
                csv.row({p + "t", CsvWriter::num(cs.t_change)});
                csv.row({p + "detected", cs.detected ? "1" : "0"});
                csv.row({p + "t_detect", CsvWriter::num(cs.t_detect)});
                csv.row({p + "delay", CsvWriter::num(cs.delay)});
                csv.row({p + "rhat_correct", cs.rhat_correct ? "1" : "0"});
                csv.row({p + "se_monotone", cs.se_monotone ? "1" : "0"});
                csv.row({p + "steady_rel_err_mean", CsvWriter::num(cs.steady_rel_err_mean)});
                for (size_t k = 0; k < cs.se_window_mean.size(); ++k)
                    csv.row({p + "se_win_" + std::to_string(k + 1),
                             CsvWriter::num(cs.se_window_mean[k])});
            }
        }
        if (cfg.run_oracle) {
            const int r = cfg.oracle_r > 0 ? cfg.oracle_r : cfg.signal.total_rank();
            auto errs = baseline_oracle(truth.sig.L, truth.M, cfg.mode, r, ep.alpha,
                                        t_train);
            CsvWriter csv(out_dir + "/oracle_" + suffix + ".csv");
            csv.row({"t", "rel_err"});
            for (size_t i = 0; i < errs.size(); ++i)
                csv.row({CsvWriter::num(t_train + 1 + static_cast<int>(i)),
                         CsvWriter::num(errs[i])});
        }
    }
    return res;
}

namespace {

std::vector<std::vector<std::string>> summary_rows_from_metrics(
    const std::vector<std::vector<MetricsFrame>>& per_trial) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"t", "rel_mean", "rel_median", "rel_max", "se_mean", "se_median",
                    "se_max", "trials"});
    if (per_trial.empty()) return rows;
    size_t ticks = 0;
    for (const auto& m : per_trial) ticks = std::max(ticks, m.size());
    for (size_t i = 0; i < ticks; ++i) {
        std::vector<double> rel, se;
        int t = 0;
        for (const auto& m : per_trial) {
            if (i < m.size()) {
                rel.push_back(m[i].rel_err);
                se.push_back(m[i].se);
                t = m[i].t;
            }
        }
        double rel_max = 0.0, se_max = 0.0;
        for (double x : rel) rel_max = std::max(rel_max, x);
        for (double x : se) se_max = std::max(se_max, x);
        rows.push_back({CsvWriter::num(t), CsvWriter::num(mean_of(rel)),
                        CsvWriter::num(median_of(rel)), CsvWriter::num(rel_max),
                        CsvWriter::num(mean_of(se)), CsvWriter::num(median_of(se)),
                        CsvWriter::num(se_max),
                        CsvWriter::num(static_cast<int>(rel.size()))});
    }
    return rows;
}

}  // namespace

EnsembleResult run_ensemble(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    EnsembleResult out;
    out.trials.resize(cfg.trials);

    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= cfg.trials) break;
            try {
                out.trials[i] = run_trial(cfg, i, cfg.out_dir);
            } catch (const std::exception& e) {
                out.trials[i].trial = i;
                out.trials[i].failed = true;
                out.trials[i].failure = e.what();
            }
        }
    };
    const int jobs = std::max(1, std::min(cfg.jobs, cfg.trials));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Cross-trial aggregates.
    int ok = 0, exact = 0, rhat_ok = 0, monotone = 0, det_ok = 0;
    double worst_steady = 0.0;
    const int J = cfg.signal.changes();
    std::vector<double> steady_sum(J, 0.0);
    int steady_cnt = 0;
    for (const auto& tr : out.trials) {
        if (tr.failed) continue;
        ++ok;
        out.max_runtime_seconds = std::max(out.max_runtime_seconds, tr.runtime_seconds);
        const bool trial_exact =
            tr.exact_support_all && tr.solver_failures == 0 && tr.recovery_errors == 0;
        if (trial_exact) ++exact;
        bool all_rhat = tr.all_changes_detected_in_window;
        bool all_mono = !tr.changes.empty();
        for (const auto& cs : tr.changes) {
            if (!cs.rhat_correct) all_rhat = false;
            if (!cs.se_monotone) all_mono = false;
        }
        if (tr.changes.empty()) all_mono = true;
        if (all_rhat) ++rhat_ok;
        if (all_mono) ++monotone;
        if (tr.all_changes_detected_in_window && tr.false_detections == 0) ++det_ok;
        ++steady_cnt;
        for (int j = 0; j < J; ++j) {
            steady_sum[j] += tr.changes[j].steady_rel_err_mean;
            worst_steady = std::max(worst_steady, tr.changes[j].steady_rel_err_mean);
        }
    }
    const double denom = ok > 0 ? double(ok) : 1.0;
    out.exact_support_fraction = exact / denom;
    out.rhat_correct_fraction = rhat_ok / denom;
    out.se_monotone_fraction = monotone / denom;
    out.detection_ok_fraction = det_ok / denom;
    out.steady_rel_err_worst_mean = worst_steady;
    for (int j = 0; j < J; ++j)
        out.steady_mean_per_change.push_back(
            steady_cnt ? steady_sum[j] / steady_cnt : 0.0);

    // summary.csv across trials at the cadence grid.
    std::vector<std::vector<MetricsFrame>> per_trial;
    for (const auto& tr : out.trials)
        if (!tr.failed) per_trial.push_back(tr.metrics);
    const auto rows = summary_rows_from_metrics(per_trial);
    {
        CsvWriter csv(cfg.out_dir + "/summary.csv");
        for (const auto& r : rows) csv.row(r);
    }
    {
        CsvWriter csv(cfg.out_dir + "/aggregates.csv");
        csv.row({"key", "value"});
        csv.row({"trials", CsvWriter::num(cfg.trials)});
        csv.row({"trials_ok", CsvWriter::num(ok)});
        csv.row({"exact_support_fraction", CsvWriter::num(out.exact_support_fraction)});
        csv.row({"rhat_correct_fraction", CsvWriter::num(out.rhat_correct_fraction)});
        csv.row({"se_monotone_fraction", CsvWriter::num(out.se_monotone_fraction)});
        csv.row({"detection_ok_fraction", CsvWriter::num(out.detection_ok_fraction)});
        for (int j = 0; j < J; ++j)
            csv.row({"steady_rel_err_mean_change_" + std::to_string(j + 1),
                     CsvWriter::num(out.steady_mean_per_change[j])});
        csv.row({"steady_rel_err_worst_mean", CsvWriter::num(out.steady_rel_err_worst_mean)});
        csv.row({"max_runtime_seconds", CsvWriter::num(out.max_runtime_seconds)});
    }
    if (cfg.svg) write_summary_svg(cfg.out_dir + "/summary.svg", rows);
    return out;
}

std::vector<double> baseline_oracle(const Matrix& L, const Matrix& M,
                                    ObservationMode mode, int r, int alpha,
                                    int t_train) {
    (void)mode;  // M already carries erasures or outliers
    const int n = static_cast<int>(L.rows());
    const int t_max = static_cast<int>(L.cols());
    if (M.rows() != n || M.cols() != t_max)
        throw std::invalid_argument("L and M must have matching shapes");
    if (r < 1 || r > n) throw std::invalid_argument("oracle rank out of range");

    Matrix gram = Matrix::Zero(n, n);
    for (int t = 1; t <= t_train; ++t)
        gram.noalias() += M.col(t - 1) * M.col(t - 1).transpose();

    std::vector<double> errs;
    errs.reserve(t_max - t_train);
    int start = t_train + 1;
    while (start <= t_max) {
        const int stop = std::min(start + alpha - 1, t_max);
        for (int t = start; t <= stop; ++t)
            gram.noalias() += M.col(t - 1) * M.col(t - 1).transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("oracle eigendecomposition failed");
        Matrix p = es.eigenvectors().rightCols(r);  // ascending order in Eigen
        for (int t = start; t <= stop; ++t) {
            const Vector lhat = p * (p.transpose() * M.col(t - 1));
            errs.push_back((L.col(t - 1) - lhat).norm() / L.col(t - 1).norm());
        }
        start = stop + 1;
    }
    return errs;
}

std::vector<std::vector<std::string>> recompute_summary_from_csv(
    const std::string& out_dir, int trials) {
    std::vector<std::vector<MetricsFrame>> per_trial;
    for (int i = 0; i < trials; ++i) {
        const std::string path = out_dir + "/metrics_" + std::to_string(i) + ".csv";
        if (!std::filesystem::exists(path)) continue;
        auto rows = read_csv(path);
        std::vector<MetricsFrame> m;
        for (size_t rix = 1; rix < rows.size(); ++rix) {
            MetricsFrame f;
            f.t = std::stoi(rows[rix][0]);
            f.rel_err = std::stod(rows[rix][1]);
            f.se = std::stod(rows[rix][2]);
            m.push_back(f);
        }
        per_trial.push_back(std::move(m));
    }
    return summary_rows_from_metrics(per_trial);
}

void write_summary_svg(const std::string& path,
                       const std::vector<std::vector<std::string>>& summary_rows) {
    const int width = 900, height = 420;
    const int ml = 70, mr = 20, mt = 20, mb = 45;
    std::vector<double> ts, rel, se;
    for (size_t i = 1; i < summary_rows.size(); ++i) {
        ts.push_back(std::stod(summary_rows[i][0]));
        rel.push_back(std::stod(summary_rows[i][1]));
        se.push_back(std::stod(summary_rows[i][4]));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!ts.empty()) {
        double tmin = ts.front(), tmax = ts.back();
        if (tmax <= tmin) tmax = tmin + 1;
        double lo = 1e300, hi = -1e300;
        auto clamp_log = [](double v) { return std::log10(std::max(v, 1e-16)); };
        for (double v : rel) { lo = std::min(lo, clamp_log(v)); hi = std::max(hi, clamp_log(v)); }
        for (double v : se) { lo = std::min(lo, clamp_log(v)); hi = std::max(hi, clamp_log(v)); }
        lo = std::floor(lo) - 0.2;
        hi = std::ceil(hi) + 0.2;
        auto xpix = [&](double t) {
            return ml + (t - tmin) / (tmax - tmin) * (width - ml - mr);
        };
        auto ypix = [&](double v) {
            const double l = clamp_log(v);
            return height - mb - (l - lo) / (hi - lo) * (height - mt - mb);
        };
        auto polyline = [&](const std::vector<double>& ys, const char* color,
                            const char* dash) {
            out << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.5\"" << dash << " points=\"";
            for (size_t i = 0; i < ts.size(); ++i)
                out << xpix(ts[i]) << ',' << ypix(ys[i]) << ' ';
            out << "\"/>\n";
        };
        // Decade grid lines.
        for (int dec = static_cast<int>(std::ceil(lo)); dec <= static_cast<int>(std::floor(hi)); ++dec) {
            const double y = ypix(std::pow(10.0, dec));
            out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << width - mr
                << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
            out << "<text x=\"8\" y=\"" << y + 4 << "\" font-size=\"11\">1e" << dec
                << "</text>\n";
        }
        polyline(rel, "#202020", "");
        polyline(se, "#c03020", " stroke-dasharray=\"6,3\"");
        out << "<text x=\"" << ml << "\" y=\"" << height - 10
            << "\" font-size=\"12\">t (solid: mean relative error, dashed: mean "
               "subspace error, log scale)</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace reprocs
