#include "reprocs/engine.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <filesystem>

namespace reprocs {

std::string to_string(Phase p) { return p == Phase::detect ? "detect" : "ppca"; }

TrainInit train_init(const Matrix& m_train, RankRule rule, int r0,
                     double energy_fraction) {
    const Eigen::Index t_train = m_train.cols();
    if (t_train < 1) throw std::invalid_argument("need at least one training frame");

    // Eigenpairs of (1/t_train) sum m_t m_t' from an SVD of the data block;
    // eigenvalues are squared singular values over t_train.
    Eigen::BDCSVD<Matrix> svd(m_train, Eigen::ComputeThinU);
    std::vector<double> eig;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        const double sv = svd.singularValues()(i);
        eig.push_back(sv * sv / static_cast<double>(t_train));
    }
    if (eig.empty() || eig[0] <= 0.0)
        throw std::invalid_argument("training data is all zero");

    int keep = 0;
    switch (rule) {
        case RankRule::nonzero_eig: {
            const double cutoff = 1e-10 * eig[0];
            while (keep < static_cast<int>(eig.size()) && eig[keep] > cutoff) ++keep;
            break;
        }
        case RankRule::fixed_rank: {
            if (r0 < 1 || r0 > static_cast<int>(eig.size()))
                throw std::invalid_argument("fixed_rank r0 out of range");
            keep = r0;
            break;
        }
        case RankRule::energy_fraction: {
            if (energy_fraction <= 0 || energy_fraction > 1)
                throw std::invalid_argument("energy fraction must be in (0, 1]");
            double total = 0.0, run = 0.0;
            for (double e : eig) total += e;
            while (keep < static_cast<int>(eig.size()) && run < energy_fraction * total)
                run += eig[keep++];
            break;
        }
    }
    if (keep < 1) throw std::invalid_argument("training data is all zero");

    TrainInit out{BasisMatrix::from(svd.matrixU().leftCols(keep)), eig[keep - 1],
                  std::move(eig)};
    return out;
}

double zeta_upper_bound(const ScenarioTruth& truth) {
    const auto& s = truth.signal;
    int r_new = 0;
    for (int rn : s.r_new) r_new = std::max(r_new, rn);
    const double r = s.r0 + double(s.changes()) * r_new;
    double lambda_plus = 0.0;
    for (const auto& lam : truth.sig.lambda_diag)
        if (lam.size()) lambda_plus = std::max(lambda_plus, lam.maxCoeff());
    const double gamma = truth.sig.gamma_measured;
    const double lt = s.lambda_train_minus;
    double bound = 1e-4 / (r * r);
    bound = std::min(bound, 0.03 * lt / (r * r * lambda_plus));
    bound = std::min(bound, 1.0 / (r * r * r * gamma * gamma));
    bound = std::min(bound, lt / (r * r * r * gamma * gamma));
    return bound;
}

TheoremParams theorem_params(const ScenarioTruth& truth, double zeta) {
    const auto& s = truth.signal;
    if (zeta <= 0 || zeta > zeta_upper_bound(truth))
        throw std::invalid_argument("zeta outside the admissible range");

    int r_new = 0;
    for (int rn : s.r_new) r_new = std::max(r_new, rn);
    if (r_new == 0) r_new = 1;  // static-subspace degenerate case
    const double r = s.r0 + double(s.changes()) * r_new;
    const double gamma_new = truth.sig.gamma_new_measured;
    const double lt = s.lambda_train_minus;
    const int j_eff = std::max(s.changes(), 1);

    TheoremParams tp;
    tp.zeta = zeta;
    tp.K = static_cast<int>(
        std::ceil(std::log(0.16 * r_new * zeta) / std::log(0.83)));
    const double fourth = 1.2 * std::pow(std::sqrt(zeta) + std::sqrt(double(r_new)) * gamma_new, 4.0);
    tp.c_add = 32.0 * 100.0 * 100.0 * std::max(16.0, fourth) /
               std::pow(r_new * zeta * lt, 2.0);
    tp.alpha_lower_bound =
        tp.c_add * (std::log(6.0 * (tp.K + 1) * j_eff) + 11.0 * std::log(double(s.n)));
    tp.xi = std::sqrt(double(r_new)) * gamma_new +
            (std::sqrt(r) + std::sqrt(double(r_new))) * std::sqrt(zeta);
    tp.omega = 7.0 * tp.xi;
    return tp;
}

ReProCSEngine::ReProCSEngine(BasisMatrix p_train, double lambda_train_minus,
                             EngineParams params, ObservationMode mode, int t_train)
    : params_(params),
      mode_(mode),
      t_train_(t_train),
      lambda_train_minus_(lambda_train_minus),
      p_star_(std::move(p_train)),
      p_new_(BasisMatrix::empty(0)) {
    if (params_.alpha < 1) throw std::invalid_argument("alpha must be >= 1");
    if (params_.K < 1) throw std::invalid_argument("K must be >= 1");
    if (lambda_train_minus_ <= 0)
        throw std::invalid_argument("lambda_train_minus must be positive");
    thresh_ = params_.thresh >= 0 ? params_.thresh : lambda_train_minus_ / 2.0;
    p_new_ = BasisMatrix::empty(p_star_.n());
    buffer_.resize(p_star_.n(), params_.alpha);
}

RecoveryRecord ReProCSEngine::step(const Vector& m_t,
                                   const IndexSet* known_support) {
    const int n = p_star_.n();
    if (m_t.size() != n) throw std::invalid_argument("frame length mismatch");
    if (mode_ == ObservationMode::mc && !known_support)
        throw std::invalid_argument("mc mode requires the known support");
    if (mode_ == ObservationMode::rpca && known_support)
        throw std::invalid_argument("rpca mode estimates the support itself");

    ++counter_;
    RecoveryRecord rec;
    rec.t = t_train_ + counter_;
    rec.phase = phase_;
    rec.j_hat = j_hat_;
    rec.k = k_;

    ProjectedOperator op(p_hat());
    try {
        if (mode_ == ObservationMode::mc) {
            FrameRecovery fr = recover_frame_mc(op, m_t, *known_support);
            rec.x_hat = std::move(fr.x_hat);
            rec.l_hat = std::move(fr.l_hat);
            rec.support = *known_support;
        } else {
            double xi_t = params_.xi;
            if (params_.xi_adaptive) {
                const double floor =
                    std::max(params_.xi_floor, params_.xi_floor_rel * m_t.norm());
                if (prev_lhat_.size() == n)
                    xi_t = std::max(op.apply(prev_lhat_).norm(), floor);
                else
                    xi_t = std::max(params_.xi, floor);
            }
            rec.xi_used = xi_t;
            BpdnOptions opts = params_.solver;
            if (prev_xcs_.size() == n) opts.warm_start = &prev_xcs_;
            if (prev_penalty_ > 0) opts.penalty_hint = prev_penalty_;
            FrameRecovery fr = recover_frame(op, m_t, xi_t, params_.omega, opts);
            rec.solver_converged = fr.report.converged;
            prev_xcs_ = fr.report.solution;
            prev_penalty_ = fr.report.penalty;
            rec.x_hat = std::move(fr.x_hat);
            rec.l_hat = std::move(fr.l_hat);
            rec.support = std::move(fr.support);
        }
    } catch (const std::exception& e) {
        rec.error = true;
        rec.error_message = e.what();
        rec.x_hat = Vector::Zero(n);
        rec.l_hat = m_t;
        if (params_.halt_on_error) {
            buffer_.col((counter_ - 1) % params_.alpha) = rec.l_hat;
            prev_lhat_ = rec.l_hat;
            throw;
        }
    }

    prev_lhat_ = rec.l_hat;
    buffer_.col((counter_ - 1) % params_.alpha) = rec.l_hat;
    if (buffered_ < params_.alpha) ++buffered_;

    if (counter_ % params_.alpha == 0) window_update(rec);
    return rec;
}

void ReProCSEngine::window_update(RecoveryRecord& rec) {
    // Ring slots are already in chronological order at a window boundary.
    // The projection uses the star basis frozen over this window, never the
    // live [P_star P_new].
    Matrix d = p_star_.project_out_cols(buffer_);
    EigenSplit split = eigenvectors_above_from_columns(d, double(params_.alpha), thresh_);
    last_window_stat_ = split.eigenvalues_kept.empty()
                            ? (split.eigenvalues_dropped.empty()
                                   ? 0.0
                                   : split.eigenvalues_dropped.front())
                            : split.eigenvalues_kept.front();

    if (phase_ == Phase::detect) {
        if (last_window_stat_ >= thresh_) {
            phase_ = Phase::ppca;
            ++j_hat_;
            k_ = 0;
            detections_.push_back({t_train_ + counter_, j_hat_});
        }
    } else {
        p_new_ = split.basis;
        ++k_;
        ppca_events_.push_back({t_train_ + counter_, j_hat_, k_, p_new_.r()});
        if (k_ == params_.K) {
            if (!p_new_.is_empty()) {
                // One reorthogonalization pass before absorbing keeps the
                // star basis orthonormal across many changes.
                Matrix q = p_new_.data();
                if (!p_star_.is_empty()) {
                    q -= p_star_.data() * (p_star_.data().transpose() * q);
                    for (int c = 0; c < q.cols(); ++c) {
                        for (int k2 = 0; k2 < c; ++k2)
                            q.col(c) -= q.col(k2).dot(q.col(c)) * q.col(k2);
                        q.col(c).normalize();
                    }
                }
                Matrix joined(p_star_.n(), p_star_.r() + q.cols());
                joined.leftCols(p_star_.r()) = p_star_.data();
                joined.rightCols(q.cols()) = q;
                p_star_ = BasisMatrix::from(joined);
            }
            p_new_ = BasisMatrix::empty(p_star_.n());
            phase_ = Phase::detect;
        }
    }
    rec.phase = phase_;
    rec.j_hat = j_hat_;
    rec.k = k_;
}

void ReProCSEngine::save_checkpoint(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("mode", to_string(mode_));
    kv.emplace_back("t_train", std::to_string(t_train_));
    kv.emplace_back("lambda_train_minus", format_double(lambda_train_minus_));
    kv.emplace_back("thresh", format_double(thresh_));
    kv.emplace_back("alpha", std::to_string(params_.alpha));
    kv.emplace_back("K", std::to_string(params_.K));
    kv.emplace_back("xi", format_double(params_.xi));
    kv.emplace_back("omega", format_double(params_.omega));
    kv.emplace_back("xi_adaptive", params_.xi_adaptive ? "true" : "false");
    kv.emplace_back("xi_floor", format_double(params_.xi_floor));
    kv.emplace_back("xi_floor_rel", format_double(params_.xi_floor_rel));
    kv.emplace_back("halt_on_error", params_.halt_on_error ? "true" : "false");
    kv.emplace_back("phase", to_string(phase_));
    kv.emplace_back("j_hat", std::to_string(j_hat_));
    kv.emplace_back("k", std::to_string(k_));
    kv.emplace_back("counter", std::to_string(counter_));
    kv.emplace_back("buffered", std::to_string(buffered_));
    kv.emplace_back("prev_penalty", format_double(prev_penalty_));
    {
        std::string det;
        for (size_t i = 0; i < detections_.size(); ++i) {
            if (i) det += ';';
            det += std::to_string(detections_[i].t) + ':' + std::to_string(detections_[i].j);
        }
        kv.emplace_back("detections", det);
        std::string pp;
        for (size_t i = 0; i < ppca_events_.size(); ++i) {
            if (i) pp += ';';
            pp += std::to_string(ppca_events_[i].t) + ':' + std::to_string(ppca_events_[i].j) +
                  ':' + std::to_string(ppca_events_[i].k) + ':' +
                  std::to_string(ppca_events_[i].r_hat);
        }
        kv.emplace_back("ppca_events", pp);
    }
    write_keyvalues(dir + "/state", kv);
    write_matrix(dir + "/p_star.mat", p_star_.data());
    write_matrix(dir + "/p_new.mat", p_new_.data());
    write_matrix(dir + "/buffer.mat", buffer_);
    write_matrix(dir + "/prev_lhat.mat",
                 prev_lhat_.size() ? Matrix(prev_lhat_) : Matrix(0, 0));
    write_matrix(dir + "/prev_xcs.mat",
                 prev_xcs_.size() ? Matrix(prev_xcs_) : Matrix(0, 0));
}

ReProCSEngine ReProCSEngine::load_checkpoint(const std::string& dir) {
    auto kv = read_keyvalues(dir + "/state");
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("checkpoint missing key: " + key);
        return it->second;
    };
    EngineParams params;
    params.alpha = std::stoi(get("alpha"));
    params.K = std::stoi(get("K"));
    params.thresh = std::stod(get("thresh"));
    params.xi = std::stod(get("xi"));
    params.omega = std::stod(get("omega"));
    params.xi_adaptive = get("xi_adaptive") == "true";
    params.xi_floor = std::stod(get("xi_floor"));
    params.xi_floor_rel = std::stod(get("xi_floor_rel"));
    params.halt_on_error = get("halt_on_error") == "true";

    Matrix p_star = read_matrix(dir + "/p_star.mat");
    ReProCSEngine eng(BasisMatrix::from(p_star), std::stod(get("lambda_train_minus")),
                      params, observation_mode_from_string(get("mode")),
                      std::stoi(get("t_train")));
    Matrix p_new = read_matrix(dir + "/p_new.mat");
    eng.p_new_ = p_new.cols() ? BasisMatrix::from(p_new) : BasisMatrix::empty(eng.p_star_.n());
    eng.phase_ = get("phase") == "ppca" ? Phase::ppca : Phase::detect;
    eng.j_hat_ = std::stoi(get("j_hat"));
    eng.k_ = std::stoi(get("k"));
    eng.counter_ = std::stoi(get("counter"));
    eng.buffered_ = std::stoi(get("buffered"));
    eng.prev_penalty_ = std::stod(get("prev_penalty"));
    eng.buffer_ = read_matrix(dir + "/buffer.mat");
    Matrix pl = read_matrix(dir + "/prev_lhat.mat");
    if (pl.size()) eng.prev_lhat_ = pl.col(0);
    Matrix px = read_matrix(dir + "/prev_xcs.mat");
    if (px.size()) eng.prev_xcs_ = px.col(0);

    auto parse_events = [](const std::string& s, auto push) {
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ';'))
            if (!item.empty()) push(item);
    };
    parse_events(get("detections"), [&](const std::string& item) {
        std::stringstream is(item);
        std::string a, b;
        std::getline(is, a, ':');
        std::getline(is, b, ':');
        eng.detections_.push_back({std::stoi(a), std::stoi(b)});
    });
    parse_events(get("ppca_events"), [&](const std::string& item) {
        std::stringstream is(item);
        std::string a, b, c, d;
        std::getline(is, a, ':');
        std::getline(is, b, ':');
        std::getline(is, c, ':');
        std::getline(is, d, ':');
        eng.ppca_events_.push_back({std::stoi(a), std::stoi(b), std::stoi(c), std::stoi(d)});
    });
    return eng;
}

}  // namespace reprocs
