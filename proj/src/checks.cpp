#include "reprocs/checks.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace reprocs {

bool AssumptionReport::overall_pass() const {
    for (const auto& e : entries)
        if (!e.pass) return false;
    return true;
}

void AssumptionReport::add(std::vector<CheckEntry> es) {
    for (auto& e : es) entries.push_back(std::move(e));
}

void AssumptionReport::write_csv(const std::string& path) const {
    CsvWriter csv(path);
    csv.row({"check", "measured", "bound", "ratio", "pass"});
    for (const auto& e : entries) {
        const double ratio = e.bound != 0.0 ? e.measured / e.bound
                                            : std::numeric_limits<double>::infinity();
        csv.row({e.name, CsvWriter::num(e.measured), CsvWriter::num(e.bound),
                 CsvWriter::num(ratio), e.pass ? "1" : "0"});
    }
}

void AssumptionReport::write_keyvalues(const std::string& path) const {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& e : entries)
        kv.emplace_back(e.name, std::string(e.pass ? "pass" : "fail") +
                                    " measured=" + format_double(e.measured) +
                                    " bound=" + format_double(e.bound) + " (" +
                                    e.detail + ")");
    kv.emplace_back("overall", overall_pass() ? "pass" : "fail");
    ::reprocs::write_keyvalues(path, kv);
}

std::string AssumptionReport::to_text() const {
    std::ostringstream os;
    for (const auto& e : entries)
        os << (e.pass ? "[pass] " : "[FAIL] ") << e.name
           << "  measured=" << format_double(e.measured)
           << "  bound=" << format_double(e.bound) << "  (" << e.detail << ")\n";
    os << (overall_pass() ? "overall: pass" : "overall: FAIL") << '\n';
    return os.str();
}

namespace {

double max_column_energy(const BasisMatrix& p) {
    if (p.is_empty()) return 0.0;
    return p.data().rowwise().squaredNorm().maxCoeff();
}

double kappa_auto(const BasisMatrix& p, int s) {
    s = std::min(s, p.n());
    if (p.n() <= 64 && binomial(p.n(), s) <= 1000000ull)
        return kappa_s(p, s, KappaMode::exact);
    return kappa_s(p, s, KappaMode::bound);
}

struct DistinctSets {
    std::vector<IndexSet> sets;      // T^[k]
    std::vector<int> start_frame;    // 1-based frame where set k begins
};

DistinctSets extract_sets(const std::vector<IndexSet>& supports) {
    DistinctSets out;
    for (size_t f = 0; f < supports.size(); ++f) {
        if (out.sets.empty() || supports[f] != out.sets.back()) {
            out.sets.push_back(supports[f]);
            out.start_frame.push_back(static_cast<int>(f) + 1);
        }
    }
    return out;
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
    return out;
}

size_t intersection_size(const IndexSet& a, const IndexSet& b) {
    size_t cnt = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (a[i] > b[j])
            ++j;
        else
            ++cnt, ++i, ++j;
    }
    return cnt;
}

}  // namespace

std::vector<CheckEntry> check_denseness(const BasisMatrix& p0,
                                        const std::vector<BasisMatrix>& p_new,
                                        int s, int n) {
    double mu = max_column_energy(p0) * n / std::max(p0.r(), 1);
    int r_new_max = 0;
    for (const auto& p : p_new) {
        if (p.r() > 0)
            mu = std::max(mu, max_column_energy(p) * n / p.r());
        r_new_max = std::max(r_new_max, p.r());
    }
    const int r = p0.r() + static_cast<int>(p_new.size()) * r_new_max;

    std::vector<CheckEntry> out;
    {
        CheckEntry e;
        e.name = "denseness.product_r";
        e.measured = 2.0 * s * r * mu;
        e.bound = 0.09 * n;
        e.pass = e.measured <= e.bound;
        e.detail = "2 s (r0 + J r_new) mu <= 0.09 n, mu = " + format_double(mu);
        out.push_back(e);
    }
    {
        CheckEntry e;
        e.name = "denseness.product_rnew";
        e.measured = 2.0 * s * r_new_max * mu;
        e.bound = 0.0004 * n;
        e.pass = e.measured <= e.bound;
        e.detail = "2 s r_new mu <= 0.0004 n";
        out.push_back(e);
    }
    {
        // kappa_{2s} of the final stacked basis.
        BasisMatrix full = p0;
        for (const auto& p : p_new) full = full.concatenated(p);
        CheckEntry e;
        e.name = "denseness.kappa_2s_star";
        e.measured = kappa_auto(full, 2 * s);
        e.bound = 0.3;
        e.pass = e.measured <= e.bound;
        e.detail = "kappa_{2s}(P_final) <= 0.3";
        out.push_back(e);
    }
    {
        double worst = 0.0;
        for (const auto& p : p_new) worst = std::max(worst, kappa_auto(p, 2 * s));
        CheckEntry e;
        e.name = "denseness.kappa_2s_new";
        e.measured = worst;
        e.bound = 0.02;
        e.pass = e.measured <= e.bound;
        e.detail = "max_j kappa_{2s}(P_new_j) <= 0.02";
        out.push_back(e);
    }
    return out;
}

std::vector<CheckEntry> check_slow_change(const ScenarioTruth& truth) {
    const auto& s = truth.signal;
    const int d = s.effective_d();
    const double lt = s.lambda_train_minus;

    double lam_new_min = std::numeric_limits<double>::infinity();
    double lam_new_max = 0.0;
    double growth_max = 0.0;
    for (int j = 0; j < s.changes(); ++j) {
        const int tj = s.change_times[j];
        const int t_end = std::min({tj + d, s.t_max,
                                    j + 1 < s.changes() ? s.change_times[j + 1] - 1
                                                        : s.t_max});
        const int r_prev = truth.sig.p_segments[j].r();
        for (int t = tj; t <= t_end; ++t) {
            const Vector& lam = truth.sig.lambda_diag[t - 1];
            for (int i = r_prev; i < lam.size(); ++i) {
                lam_new_min = std::min(lam_new_min, lam(i));
                lam_new_max = std::max(lam_new_max, lam(i));
            }
        }
        for (int i = 0; i < s.r_new[j]; ++i)
            growth_max = std::max(growth_max, s.q[j][i] * std::pow(s.v[j][i], d));
    }

    std::vector<CheckEntry> out;
    if (s.changes() > 0) {
        CheckEntry lo;
        lo.name = "slow_change.lambda_new_lower";
        lo.measured = lam_new_min;
        lo.bound = lt;
        lo.pass = lam_new_min >= lt;
        lo.detail = "min new-direction variance within d of a change >= lambda_train_minus";
        out.push_back(lo);
        CheckEntry hi;
        hi.name = "slow_change.lambda_new_upper";
        hi.measured = lam_new_max;
        hi.bound = 3.0 * lt;
        hi.pass = lam_new_max <= 3.0 * lt;
        hi.detail = "max new-direction variance within d of a change <= 3 lambda_train_minus";
        out.push_back(hi);
        CheckEntry g;
        g.name = "slow_change.growth";
        g.measured = growth_max;
        g.bound = 3.0;
        g.pass = growth_max <= 3.0;
        g.detail = "max_i q_i v_i^d <= 3, d = " + std::to_string(d);
        out.push_back(g);
        CheckEntry sp;
        sp.name = "spacing_d.spacing";
        sp.measured = s.min_change_spacing();
        sp.bound = d;
        sp.pass = s.min_change_spacing() >= d;
        sp.detail = "min_j (t_{j+1} - t_j) >= d";
        out.push_back(sp);
    }
    return out;
}

CheckEntry check_spacing_window(const ScenarioTruth& truth, const EngineParams& params) {
    CheckEntry e;
    e.name = "spacing_d.window";
    e.measured = truth.signal.effective_d();
    e.bound = double(params.K + 2) * params.alpha;
    e.pass = e.measured >= e.bound;
    e.detail = "d >= (K + 2) alpha";
    return e;
}

std::vector<CheckEntry> check_support_model(const std::vector<IndexSet>& supports,
                                            int n, int s, int rho, int beta,
                                            int alpha) {
    DistinctSets ds = extract_sets(supports);
    const int num_sets = static_cast<int>(ds.sets.size());
    std::vector<CheckEntry> out;

    {
        size_t worst = 0;
        for (const auto& t : supports) worst = std::max(worst, t.size());
        CheckEntry e;
        e.name = "support_model.size";
        e.measured = double(worst);
        e.bound = s;
        e.pass = worst <= size_t(s);
        e.detail = "max |T_t| <= s";
        out.push_back(e);
    }
    {
        // Dwell: strictly below beta; the change-every-frame case defines
        // beta = 1, so a dwell of one frame is always admissible.
        int worst = 0;
        for (int k = 0; k < num_sets; ++k) {
            const int end = (k + 1 < num_sets) ? ds.start_frame[k + 1]
                                               : static_cast<int>(supports.size()) + 1;
            worst = std::max(worst, end - ds.start_frame[k]);
        }
        const int allowed = std::max(beta - 1, 1);
        CheckEntry e;
        e.name = "support_model.dwell";
        e.measured = worst;
        e.bound = allowed;
        e.pass = worst <= allowed;
        e.detail = "max dwell <= max(beta - 1, 1) (dwell < beta, strict)";
        out.push_back(e);
    }
    {
        size_t worst = 0;
        for (int k = 0; k + rho < num_sets; ++k) {
            worst = std::max(worst, intersection_size(ds.sets[k], ds.sets[k + rho]));
            if (worst > 0) break;
        }
        CheckEntry e;
        e.name = "support_model.rho_disjoint";
        e.measured = double(worst);
        e.bound = 0.0;
        e.pass = worst == 0;
        e.detail = "T^[k] and T^[k+rho] disjoint";
        out.push_back(e);
    }
    {
        // Window sum of consecutive differences over any alpha consecutive
        // set indices; sliding prefix sums.
        std::vector<IndexSet> diffs(num_sets);
        for (int k = 0; k < num_sets; ++k)
            diffs[k] = (k + 1 < num_sets) ? set_difference(ds.sets[k], ds.sets[k + 1])
                                          : ds.sets[k];
        long long run = 0;
        long long worst = 0;
        for (int k = 0; k < num_sets; ++k) {
            run += static_cast<long long>(diffs[k].size());
            if (k >= alpha) run -= static_cast<long long>(diffs[k - alpha].size());
            worst = std::max(worst, run);
        }
        CheckEntry e;
        e.name = "support_model.window_sum";
        e.measured = double(worst);
        e.bound = n;
        e.pass = worst <= n;
        e.detail = "sum over alpha consecutive changes of |T^[i] \\ T^[i+1]| <= n";
        out.push_back(e);

        // Pairwise disjointness of differences within alpha changes, via a
        // sliding occupancy count.
        std::unordered_map<int, int> occupancy;
        size_t overlap = 0;
        for (int k = 0; k < num_sets && overlap == 0; ++k) {
            if (k >= alpha + 1)
                for (int idx : diffs[k - alpha - 1]) --occupancy[idx];
            for (int idx : diffs[k])
                if (occupancy[idx] > 0) ++overlap;
            for (int idx : diffs[k]) ++occupancy[idx];
        }
        CheckEntry e2;
        e2.name = "support_model.diff_disjoint";
        e2.measured = double(overlap);
        e2.bound = 0.0;
        e2.pass = overlap == 0;
        e2.detail = "differences of consecutive sets pairwise disjoint within a window";
        out.push_back(e2);
    }
    {
        CheckEntry e;
        e.name = "support_model.rho_beta";
        e.measured = double(rho) * rho * beta;
        e.bound = 0.01 * alpha;
        e.pass = e.measured <= e.bound;
        e.detail = "rho^2 beta <= 0.01 alpha";
        out.push_back(e);
    }
    return out;
}

std::vector<WindowBound> h_star_upper(const std::vector<IndexSet>& supports,
                                      int alpha, int rho) {
    if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
    DistinctSets ds = extract_sets(supports);
    const int num_sets = static_cast<int>(ds.sets.size());
    const int frames = static_cast<int>(supports.size());
    const int full_windows = frames / alpha;

    auto set_start = [&](int k) { return ds.start_frame[k]; };
    auto set_end = [&](int k) {  // one past the last frame of set k
        return k + 1 < num_sets ? ds.start_frame[k + 1] : frames + 1;
    };

    std::vector<WindowBound> out;
    for (int u = 0; u < full_windows; ++u) {
        WindowBound wb;
        wb.window = u;
        const int w_lo = u * alpha + 1;
        const int w_hi = (u + 1) * alpha;

        // Sets intersecting this window.
        int k_first = -1, k_last = -1;
        for (int k = 0; k < num_sets; ++k) {
            if (set_start(k) <= w_hi && set_end(k) > w_lo) {
                if (k_first < 0) k_first = k;
                k_last = k;
            }
        }
        if (k_first < 0) {
            wb.valid = true;
            wb.bound = 0;
            out.push_back(wb);
            continue;
        }
        const int l_u = k_last - k_first + 1;

        // Difference partition of the index space plus the interval
        // partition of the window.
        std::vector<IndexSet> parts(l_u);
        std::vector<int> interval_len(l_u);
        for (int i = 0; i < l_u; ++i) {
            const int k = k_first + i;
            parts[i] = (i + 1 < l_u) ? set_difference(ds.sets[k], ds.sets[k + 1])
                                     : ds.sets[k];
            const int lo = std::max(set_start(k), w_lo);
            const int hi = std::min(set_end(k) - 1, w_hi);
            interval_len[i] = hi - lo + 1;
        }

        // Mutual disjointness of the parts.
        std::unordered_map<int, int> seen;
        bool ok = true;
        for (const auto& p : parts)
            for (int idx : p)
                if (seen[idx]++ > 0) ok = false;
        if (!ok) {
            wb.message = "difference sets are not mutually disjoint in this window";
            out.push_back(wb);
            continue;
        }
        // Coverage: each set is inside the union of rho consecutive parts.
        for (int i = 0; i < l_u && ok; ++i) {
            IndexSet covered;
            for (int m = i; m < std::min(i + rho, l_u); ++m)
                covered.insert(covered.end(), parts[m].begin(), parts[m].end());
            std::sort(covered.begin(), covered.end());
            const IndexSet& target = ds.sets[k_first + i];
            if (!std::includes(covered.begin(), covered.end(), target.begin(),
                               target.end())) {
                ok = false;
                wb.message = "a set escapes its rho consecutive difference parts";
            }
        }
        if (!ok) {
            out.push_back(wb);
            continue;
        }
        wb.valid = true;
        wb.bound = *std::max_element(interval_len.begin(), interval_len.end());
        out.push_back(wb);
    }
    return out;
}

BlockBandedCheck blockbanded_bound_check(const std::vector<Matrix>& a_seq,
                                         const std::vector<IndexSet>& supports,
                                         int n, int rho, double h_plus, int alpha,
                                         double sigma_plus) {
    if (a_seq.size() != supports.size())
        throw std::invalid_argument("one block per support set required");
    if (static_cast<int>(a_seq.size()) > alpha)
        throw std::invalid_argument("sequence longer than the window");
    Matrix m = Matrix::Zero(n, n);
    for (size_t t = 0; t < a_seq.size(); ++t) {
        const IndexSet& sup = supports[t];
        const Matrix& a = a_seq[t];
        if (a.rows() != static_cast<Eigen::Index>(sup.size()) || a.rows() != a.cols())
            throw std::invalid_argument("block size must match the support size");
        if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10)
            throw std::invalid_argument("blocks must be symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
        if (a.size() &&
            (es.eigenvalues().minCoeff() < -1e-10 ||
             es.eigenvalues().maxCoeff() > sigma_plus * (1.0 + 1e-12) + 1e-12))
            throw std::invalid_argument("blocks must be PSD with norm <= sigma_plus");
        for (size_t i = 0; i < sup.size(); ++i)
            for (size_t j = 0; j < sup.size(); ++j)
                m(sup[i], sup[j]) += a(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(j));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    BlockBandedCheck out;
    out.measured = std::max(std::abs(es.eigenvalues().maxCoeff()),
                            std::abs(es.eigenvalues().minCoeff()));
    out.bound = double(rho) * rho * h_plus * alpha * sigma_plus;
    out.pass = out.measured <= out.bound * (1.0 + 1e-12);
    return out;
}

CheckEntry check_xmin(const ScenarioTruth& truth, double xi) {
    CheckEntry e;
    e.name = "xmin_margin";
    e.measured = truth.x_min();
    e.bound = 14.0 * xi;
    e.pass = e.measured > e.bound;
    e.detail = "x_min > 14 xi (margin " + format_double(e.measured - e.bound) + ")";
    return e;
}

CheckEntry check_init(const BasisMatrix& p_hat_train, const BasisMatrix& p_true0,
                      int r0, double zeta) {
    CheckEntry e;
    e.name = "init_accuracy";
    e.measured = dif(p_hat_train, p_true0);
    e.bound = r0 * zeta;
    e.pass = e.measured <= e.bound;
    e.detail = "dif(P_hat_train, P_0) <= r0 zeta";
    return e;
}

CheckEntry check_zeta_range(const ScenarioTruth& truth, double zeta) {
    CheckEntry e;
    e.name = "zeta_range";
    e.measured = zeta;
    e.bound = zeta_upper_bound(truth);
    e.pass = zeta > 0 && zeta <= e.bound;
    e.detail = "zeta <= min(1e-4/r^2, 0.03 l-/(r^2 l+), 1/(r^3 g^2), l-/(r^3 g^2))";
    return e;
}

AssumptionReport check_scenario(const ScenarioTruth& truth, const EngineParams& params,
                                double zeta, double xi,
                                const BasisMatrix* p_hat_train) {
    AssumptionReport rep;
    if (p_hat_train)
        rep.add(check_init(*p_hat_train, truth.sig.p_segments[0], truth.signal.r0, zeta));
    rep.add(check_slow_change(truth));
    if (truth.signal.changes() > 0) rep.add(check_spacing_window(truth, params));
    {
        std::vector<IndexSet> streamed(truth.supports.begin() + truth.signal.t_train,
                                       truth.supports.end());
        rep.add(check_support_model(streamed, truth.signal.n, truth.support.s,
                                    truth.support.rho, truth.support.beta,
                                    params.alpha));
    }
    {
        std::vector<BasisMatrix> news;
        for (int j = 1; j <= truth.signal.changes(); ++j) {
            const auto& prev = truth.sig.p_segments[j - 1];
            const auto& cur = truth.sig.p_segments[j];
            news.push_back(BasisMatrix::from(cur.data().rightCols(cur.r() - prev.r())));
        }
        rep.add(check_denseness(truth.sig.p_segments[0], news, truth.support.s,
                                truth.signal.n));
    }
    if (truth.mode == ObservationMode::rpca) rep.add(check_xmin(truth, xi));
    rep.add(check_zeta_range(truth, zeta));
    return rep;
}

}  // namespace reprocs
