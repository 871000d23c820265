#include "reprocs/models.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "reprocs/rng.hpp"

namespace reprocs {

namespace {

// Stream tags: each generated quantity draws from its own derived stream so
// that, e.g., the same seed yields the same supports in mc and rpca runs.
constexpr std::uint64_t kTagBasis = 1;
constexpr std::uint64_t kTagCoeff = 2;
constexpr std::uint64_t kTagSupport = 3;
constexpr std::uint64_t kTagOutlier = 4;

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stoi(cell));
    return out;
}

std::string join_groups(const std::vector<std::vector<double>>& groups) {
    std::string out;
    for (size_t g = 0; g < groups.size(); ++g) {
        if (g) out += ';';
        for (size_t i = 0; i < groups[g].size(); ++i) {
            if (i) out += ',';
            out += format_double(groups[g][i]);
        }
    }
    return out;
}

std::vector<std::vector<double>> parse_groups(const std::string& s) {
    std::vector<std::vector<double>> out;
    std::stringstream ss(s);
    std::string group;
    while (std::getline(ss, group, ';')) {
        std::vector<double> g;
        std::stringstream gs(group);
        std::string cell;
        while (std::getline(gs, cell, ','))
            if (!cell.empty()) g.push_back(std::stod(cell));
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace

std::string to_string(ObservationMode m) {
    return m == ObservationMode::mc ? "mc" : "rpca";
}

ObservationMode observation_mode_from_string(const std::string& s) {
    if (s == "mc") return ObservationMode::mc;
    if (s == "rpca") return ObservationMode::rpca;
    throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(SupportVariant v) {
    switch (v) {
        case SupportVariant::model3: return "model3";
        case SupportVariant::bernoulli_gaussian: return "bernoulli_gaussian";
        case SupportVariant::everyframe: return "everyframe";
    }
    return "model3";
}

SupportVariant support_variant_from_string(const std::string& s) {
    if (s == "model3") return SupportVariant::model3;
    if (s == "bernoulli_gaussian") return SupportVariant::bernoulli_gaussian;
    if (s == "everyframe") return SupportVariant::everyframe;
    throw std::invalid_argument("unknown support variant: " + s);
}

int SignalModelConfig::total_rank() const {
    int r = r0;
    for (int rn : r_new) r += rn;
    return r;
}

int SignalModelConfig::min_change_spacing() const {
    if (change_times.empty()) return t_max;
    int best = std::numeric_limits<int>::max();
    for (size_t j = 0; j < change_times.size(); ++j) {
        int next = (j + 1 < change_times.size()) ? change_times[j + 1] : t_max + 1;
        best = std::min(best, next - change_times[j]);
    }
    return best;
}

std::vector<std::string> SignalModelConfig::validate() const {
    if (n < 1 || t_max < 1) throw std::invalid_argument("n and t_max must be positive");
    if (t_train < 1 || t_train >= t_max)
        throw std::invalid_argument("need 1 <= t_train < t_max");
    if (r0 < 1 || r0 > n) throw std::invalid_argument("need 1 <= r0 <= n");
    if (r_new.size() != change_times.size() || q.size() != change_times.size() ||
        v.size() != change_times.size())
        throw std::invalid_argument("change_times, r_new, q, v must have equal length");
    int prev = t_train;
    for (size_t j = 0; j < change_times.size(); ++j) {
        if (change_times[j] <= prev)
            throw std::invalid_argument("change times must be ascending and > t_train");
        if (change_times[j] > t_max)
            throw std::invalid_argument("change time beyond t_max");
        prev = change_times[j];
        if (r_new[j] < 1) throw std::invalid_argument("r_new must be >= 1");
        if (static_cast<int>(q[j].size()) != r_new[j] ||
            static_cast<int>(v[j].size()) != r_new[j])
            throw std::invalid_argument("q and v need one entry per new direction");
        for (double qi : q[j])
            if (qi <= 0) throw std::invalid_argument("q entries must be positive");
        for (double vi : v[j])
            if (vi <= 0) throw std::invalid_argument("v entries must be positive");
    }
    if (total_rank() >= n)
        throw std::invalid_argument("infeasible config: total rank >= n");
    if (lambda_train_minus <= 0)
        throw std::invalid_argument("lambda_train_minus must be positive");
    if (gamma_star <= 0) throw std::invalid_argument("gamma_star must be positive");

    std::vector<std::string> issues;
    const int dd = effective_d();
    for (size_t j = 0; j < change_times.size(); ++j) {
        for (int i = 0; i < r_new[j]; ++i) {
            if (q[j][i] < 1.0)
                issues.push_back("q < 1 at change " + std::to_string(j + 1));
            if (v[j][i] <= 1.0)
                issues.push_back("v <= 1 at change " + std::to_string(j + 1));
            const double growth = q[j][i] * std::pow(v[j][i], dd);
            if (growth > 3.0)
                issues.push_back("q*v^d = " + format_double(growth) + " > 3 at change " +
                                 std::to_string(j + 1));
        }
    }
    if (!change_times.empty() && min_change_spacing() < dd)
        issues.push_back("change spacing " + std::to_string(min_change_spacing()) +
                         " < d = " + std::to_string(dd));
    if (total_rank() >= min_change_spacing())
        issues.push_back("total rank >= min change spacing (low-rankness at risk)");
    return issues;
}

std::vector<std::string> SupportModelConfig::validate(int n, int t_max) const {
    if (s < 1 || s > n) throw std::invalid_argument("need 1 <= s <= n");
    if (alpha < 1) throw std::invalid_argument("alpha must be positive");
    std::vector<std::string> issues;
    switch (variant) {
        case SupportVariant::model3: {
            if (rho < 1 || rho2 < 1) throw std::invalid_argument("rho, rho2 must be >= 1");
            if (beta < 1) throw std::invalid_argument("beta must be >= 1");
            if (min_move() > max_move())
                throw std::invalid_argument(
                    "infeasible motion bounds: ceil(s/rho) > floor(s/rho2)");
            if (dwell > std::max(beta - 1, 1))
                issues.push_back("dwell exceeds the largest value allowed by the "
                                 "support model (beta - 1)");
            if (static_cast<double>(rho) * rho * beta > 0.01 * alpha)
                issues.push_back("rho^2 * beta > 0.01 * alpha");
            if (static_cast<double>(s) / rho2 * alpha > static_cast<double>(n))
                issues.push_back("(s/rho2) * alpha > n");
            break;
        }
        case SupportVariant::bernoulli_gaussian: {
            if (rho < 1) throw std::invalid_argument("rho must be >= 1");
            if (move_prob < 0 || move_prob > 1)
                throw std::invalid_argument("move_prob must be in [0,1]");
            if (sigma < 0) throw std::invalid_argument("sigma must be >= 0");
            if (static_cast<double>(s) > 1.2 * rho * n / alpha)
                issues.push_back("s > 1.2 * rho * n / alpha");
            if (sigma * sigma >
                static_cast<double>(s) * s / (4000.0 * rho * rho * std::log(double(n))))
                issues.push_back("sigma^2 > s^2 / (4000 rho^2 log n)");
            if (move_prob == 0.0) issues.push_back("move_prob = 0: support never moves");
            (void)t_max;
            break;
        }
        case SupportVariant::everyframe: {
            if (m < 1) throw std::invalid_argument("m must be >= 1");
            if (static_cast<double>(s) > 0.0025 * alpha)
                issues.push_back("s > 0.0025 * alpha");
            if (m > (n - s) / alpha) issues.push_back("m > (n - s) / alpha");
            break;
        }
    }
    return issues;
}

SignalTruth gen_signal(const SignalModelConfig& cfg, std::uint64_t seed,
                       bool enforce_compliance) {
    auto issues = cfg.validate();
    if (enforce_compliance && !issues.empty())
        throw std::invalid_argument("signal model compliance violated: " + issues[0]);

    const int rt = cfg.total_rank();
    const int J = cfg.changes();

    // Basis: one Gaussian matrix, drawn column-major, orthonormalized with
    // (twice-iterated) modified Gram-Schmidt. Column blocks become P0 and the
    // per-change new directions.
    Rng basis_rng(Rng::derive(seed, kTagBasis));
    Matrix g(cfg.n, rt);
    for (int c = 0; c < rt; ++c)
        for (int i = 0; i < cfg.n; ++i) g(i, c) = basis_rng.normal();
    for (int c = 0; c < rt; ++c) {
        for (int pass = 0; pass < 2; ++pass)
            for (int k = 0; k < c; ++k) g.col(c) -= g.col(k).dot(g.col(c)) * g.col(k);
        const double nrm = g.col(c).norm();
        if (nrm < 1e-12) throw std::runtime_error("degenerate basis draw");
        g.col(c) /= nrm;
    }

    SignalTruth out;
    out.p_segments.reserve(J + 1);
    int rank_j = cfg.r0;
    out.p_segments.push_back(BasisMatrix::from(g.leftCols(rank_j)));
    for (int j = 0; j < J; ++j) {
        rank_j += cfg.r_new[j];
        out.p_segments.push_back(BasisMatrix::from(g.leftCols(rank_j)));
    }

    const int dd = cfg.effective_d();
    Rng coeff_rng(Rng::derive(seed, kTagCoeff));
    out.L.resize(cfg.n, cfg.t_max);
    out.lambda_diag.resize(cfg.t_max);

    auto existing_amplitude = [&](int direction, int t) {
        for (const auto& ov : cfg.variance_overrides)
            if (ov.direction == direction && t >= ov.t_begin && t <= ov.t_end)
                return ov.amplitude;
        return cfg.gamma_star;
    };

    for (int t = 1; t <= cfg.t_max; ++t) {
        int seg = 0;
        while (seg < J && cfg.change_times[seg] <= t) ++seg;
        const int r_cur = out.p_segments[seg].r();
        const int r_newest = seg > 0 ? cfg.r_new[seg - 1] : 0;
        const int r_prev = r_cur - r_newest;
        const int t_seg = seg > 0 ? cfg.change_times[seg - 1] : 1;

        Vector a(r_cur);
        Vector lam(r_cur);
        // Draw order per frame: existing directions by ascending global
        // index, then the newest block.
        for (int i = 0; i < r_prev; ++i) {
            const double amp = existing_amplitude(i, t);
            a(i) = amp == 0.0 ? 0.0 : coeff_rng.uniform(-amp, amp);
            lam(i) = amp * amp / 3.0;
        }
        for (int i = 0; i < r_newest; ++i) {
            const double var = cfg.q[seg - 1][i] *
                               std::pow(cfg.v[seg - 1][i], double(t - t_seg)) *
                               cfg.lambda_train_minus;
            const double amp = std::sqrt(3.0 * var);
            a(r_prev + i) = coeff_rng.uniform(-amp, amp);
            lam(r_prev + i) = var;
            if (t - t_seg <= dd)
                out.gamma_new_measured =
                    std::max(out.gamma_new_measured, std::abs(a(r_prev + i)));
        }
        out.gamma_measured = std::max(out.gamma_measured,
                                      a.size() ? a.cwiseAbs().maxCoeff() : 0.0);
        out.L.col(t - 1) = out.p_segments[seg].data() * a;
        out.lambda_diag[t - 1] = std::move(lam);
    }
    return out;
}

std::vector<IndexSet> gen_support_model3(const SupportModelConfig& cfg, int n,
                                         int count, std::uint64_t seed) {
    if (cfg.min_move() > cfg.max_move())
        throw std::invalid_argument("infeasible motion bounds: ceil(s/rho) > floor(s/rho2)");
    Rng rng(Rng::derive(seed, kTagSupport));
    const int max_dwell = cfg.effective_dwell();
    const int top_max = n - cfg.s;

    int pos = static_cast<int>(rng.uniform_int(0, top_max));
    int stay = static_cast<int>(
        cfg.randomize ? rng.uniform_int(1, max_dwell)
                      : max_dwell);
    // Start mid-dwell so trials are not phase locked.
    int spent = static_cast<int>(rng.uniform_int(0, stay - 1));

    std::vector<IndexSet> out(count);
    for (int f = 0; f < count; ++f) {
        IndexSet t(cfg.s);
        for (int k = 0; k < cfg.s; ++k) t[k] = pos + k;
        out[f] = std::move(t);
        if (++spent >= stay) {
            const int move = cfg.randomize
                                 ? static_cast<int>(rng.uniform_int(cfg.min_move(),
                                                                    cfg.max_move()))
                                 : cfg.min_move();
            pos += move;
            if (pos > top_max) pos = 0;  // left the bottom; a new block enters on top
            spent = 0;
            stay = cfg.randomize ? static_cast<int>(rng.uniform_int(1, max_dwell))
                                 : max_dwell;
        }
    }
    return out;
}

std::vector<IndexSet> gen_support_bernoulli_gaussian(const SupportModelConfig& cfg,
                                                     int n, int count,
                                                     std::uint64_t seed) {
    Rng rng(Rng::derive(seed, kTagSupport));
    double o = rng.uniform(0.0, double(n));
    std::vector<IndexSet> out(count);
    const double step = 1.1 * double(cfg.s) / double(cfg.rho);
    for (int f = 0; f < count; ++f) {
        const bool move = rng.bernoulli(cfg.move_prob);
        const double noise = cfg.sigma > 0 ? cfg.sigma * rng.normal() : 0.0;
        if (f > 0 && move) o += step + noise;
        double wrapped = std::fmod(o, double(n));
        if (wrapped < 0) wrapped += n;
        const int top = static_cast<int>(std::ceil(wrapped)) % n;
        IndexSet t(cfg.s);
        for (int k = 0; k < cfg.s; ++k) t[k] = (top + k) % n;
        std::sort(t.begin(), t.end());
        out[f] = std::move(t);
    }
    return out;
}

std::vector<IndexSet> gen_support_everyframe(const SupportModelConfig& cfg, int n,
                                             int count, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, kTagSupport));
    int pos = static_cast<int>(rng.uniform_int(0, n - 1));
    std::vector<IndexSet> out(count);
    for (int f = 0; f < count; ++f) {
        IndexSet t(cfg.s);
        for (int k = 0; k < cfg.s; ++k) t[k] = (pos + k) % n;
        std::sort(t.begin(), t.end());
        out[f] = std::move(t);
        const int move = cfg.m == 1 ? 1 : static_cast<int>(rng.uniform_int(1, cfg.m));
        pos = (pos + move) % n;
    }
    return out;
}

std::vector<IndexSet> gen_support(const SupportModelConfig& cfg, int n, int count,
                                  std::uint64_t seed) {
    switch (cfg.variant) {
        case SupportVariant::model3: return gen_support_model3(cfg, n, count, seed);
        case SupportVariant::bernoulli_gaussian:
            return gen_support_bernoulli_gaussian(cfg, n, count, seed);
        case SupportVariant::everyframe:
            return gen_support_everyframe(cfg, n, count, seed);
    }
    throw std::logic_error("unreachable");
}

std::vector<std::vector<double>> gen_outliers(const std::vector<IndexSet>& supports,
                                              const OutlierConfig& cfg,
                                              std::uint64_t seed) {
    if (cfg.x_lo <= 0) throw std::invalid_argument("x_lo must be positive");
    if (cfg.x_hi < cfg.x_lo) throw std::invalid_argument("need x_hi >= x_lo");
    Rng rng(Rng::derive(seed, kTagOutlier));
    std::vector<std::vector<double>> values(supports.size());
    for (size_t f = 0; f < supports.size(); ++f) {
        values[f].resize(supports[f].size());
        for (size_t k = 0; k < supports[f].size(); ++k) {
            double mag = rng.uniform(cfg.x_lo, cfg.x_hi);
            if (cfg.random_sign && rng.bernoulli(0.5)) mag = -mag;
            values[f][k] = mag;
        }
    }
    return values;
}

Matrix assemble(const Matrix& L, const std::vector<IndexSet>& supports,
                const std::vector<std::vector<double>>& values, ObservationMode mode,
                int t_train) {
    if (static_cast<Eigen::Index>(supports.size()) != L.cols())
        throw std::invalid_argument("supports must cover every frame");
    Matrix M = L;
    for (int t = t_train + 1; t <= L.cols(); ++t) {
        const IndexSet& sup = supports[t - 1];
        if (mode == ObservationMode::mc) {
            for (int idx : sup) M(idx, t - 1) = 0.0;
        } else {
            for (size_t k = 0; k < sup.size(); ++k) M(sup[k], t - 1) += values[t - 1][k];
        }
    }
    return M;
}

ScenarioTruth generate_scenario(const SignalModelConfig& signal,
                                const SupportModelConfig& support,
                                const OutlierConfig& outliers, ObservationMode mode,
                                std::uint64_t seed, bool enforce_compliance) {
    auto issues = signal.validate();
    auto sup_issues = support.validate(signal.n, signal.t_max);
    issues.insert(issues.end(), sup_issues.begin(), sup_issues.end());
    if (enforce_compliance && !issues.empty())
        throw std::invalid_argument("model compliance violated: " + issues[0]);

    ScenarioTruth truth;
    truth.signal = signal;
    truth.support = support;
    truth.outliers = outliers;
    truth.mode = mode;
    truth.seed = seed;
    truth.sig = gen_signal(signal, seed);

    const int streamed = signal.t_max - signal.t_train;
    auto active = gen_support(support, signal.n, streamed, seed);
    truth.supports.assign(signal.t_max, IndexSet{});
    for (int f = 0; f < streamed; ++f)
        truth.supports[signal.t_train + f] = std::move(active[f]);

    truth.outlier_values.assign(signal.t_max, {});
    if (mode == ObservationMode::rpca) {
        auto vals = gen_outliers(
            std::vector<IndexSet>(truth.supports.begin() + signal.t_train,
                                  truth.supports.end()),
            outliers, seed);
        for (int f = 0; f < streamed; ++f)
            truth.outlier_values[signal.t_train + f] = std::move(vals[f]);
    }

    truth.M = assemble(truth.sig.L, truth.supports, truth.outlier_values, mode,
                       signal.t_train);
    if (mode == ObservationMode::rpca) {
        // Pin the supported entries of L to M - X so the additive identity
        // m_t - x_t == l_t holds bit exactly (the adjustment is below one ulp).
        for (int t = signal.t_train + 1; t <= signal.t_max; ++t) {
            const IndexSet& sup = truth.supports[t - 1];
            const auto& vals = truth.outlier_values[t - 1];
            for (size_t k = 0; k < sup.size(); ++k)
                truth.sig.L(sup[k], t - 1) = truth.M(sup[k], t - 1) - vals[k];
        }
    }
    return truth;
}

int ScenarioTruth::segment_of(int t) const {
    int seg = 0;
    while (seg < signal.changes() && signal.change_times[seg] <= t) ++seg;
    return seg;
}

const BasisMatrix& ScenarioTruth::true_basis_at(int t) const {
    return sig.p_segments[segment_of(t)];
}

Vector ScenarioTruth::x_col(int t) const {
    Vector x = Vector::Zero(signal.n);
    const IndexSet& sup = supports[t - 1];
    const auto& vals = outlier_values[t - 1];
    for (size_t k = 0; k < sup.size(); ++k) x(sup[k]) = vals[k];
    return x;
}

double ScenarioTruth::x_min() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& vals : outlier_values)
        for (double v : vals)
            if (v != 0.0) best = std::min(best, std::abs(v));
    return best;
}

void save_scenario(const ScenarioTruth& truth, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_matrix(dir + "/L.mat", truth.sig.L);
    write_matrix(dir + "/M.mat", truth.M);
    write_supports(dir + "/supports.csv",
                   std::vector<IndexSet>(truth.supports.begin() + truth.signal.t_train,
                                         truth.supports.end()),
                   truth.signal.t_train + 1);

    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("mode", to_string(truth.mode));
    kv.emplace_back("seed", std::to_string(truth.seed));
    const auto& s = truth.signal;
    kv.emplace_back("signal.n", std::to_string(s.n));
    kv.emplace_back("signal.t_max", std::to_string(s.t_max));
    kv.emplace_back("signal.t_train", std::to_string(s.t_train));
    kv.emplace_back("signal.r0", std::to_string(s.r0));
    kv.emplace_back("signal.change_times", join_ints(s.change_times));
    kv.emplace_back("signal.r_new", join_ints(s.r_new));
    kv.emplace_back("signal.q", join_groups(s.q));
    kv.emplace_back("signal.v", join_groups(s.v));
    kv.emplace_back("signal.lambda_train_minus", format_double(s.lambda_train_minus));
    kv.emplace_back("signal.gamma_star", format_double(s.gamma_star));
    kv.emplace_back("signal.d", std::to_string(s.d));
    {
        std::string ov;
        for (size_t i = 0; i < s.variance_overrides.size(); ++i) {
            const auto& o = s.variance_overrides[i];
            if (i) ov += ';';
            ov += std::to_string(o.direction) + ':' + std::to_string(o.t_begin) + ':' +
                  std::to_string(o.t_end) + ':' + format_double(o.amplitude);
        }
        kv.emplace_back("signal.variance_overrides", ov);
    }
    const auto& p = truth.support;
    kv.emplace_back("support.variant", to_string(p.variant));
    kv.emplace_back("support.s", std::to_string(p.s));
    kv.emplace_back("support.rho", std::to_string(p.rho));
    kv.emplace_back("support.rho2", std::to_string(p.rho2));
    kv.emplace_back("support.beta", std::to_string(p.beta));
    kv.emplace_back("support.alpha", std::to_string(p.alpha));
    kv.emplace_back("support.dwell", std::to_string(p.dwell));
    kv.emplace_back("support.randomize", p.randomize ? "true" : "false");
    kv.emplace_back("support.move_prob", format_double(p.move_prob));
    kv.emplace_back("support.sigma", format_double(p.sigma));
    kv.emplace_back("support.m", std::to_string(p.m));
    const auto& o = truth.outliers;
    kv.emplace_back("outliers.x_lo", format_double(o.x_lo));
    kv.emplace_back("outliers.x_hi", format_double(o.x_hi));
    kv.emplace_back("outliers.random_sign", o.random_sign ? "true" : "false");
    write_keyvalues(dir + "/meta", kv);
}

ScenarioTruth load_scenario(const std::string& dir) {
    auto kv = read_keyvalues(dir + "/meta");
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("meta is missing key: " + key);
        return it->second;
    };

    SignalModelConfig s;
    s.n = std::stoi(get("signal.n"));
    s.t_max = std::stoi(get("signal.t_max"));
    s.t_train = std::stoi(get("signal.t_train"));
    s.r0 = std::stoi(get("signal.r0"));
    s.change_times = parse_ints(get("signal.change_times"));
    s.r_new = parse_ints(get("signal.r_new"));
    s.q = parse_groups(get("signal.q"));
    s.v = parse_groups(get("signal.v"));
    s.lambda_train_minus = std::stod(get("signal.lambda_train_minus"));
    s.gamma_star = std::stod(get("signal.gamma_star"));
    s.d = std::stoi(get("signal.d"));
    {
        std::stringstream ss(get("signal.variance_overrides"));
        std::string item;
        while (std::getline(ss, item, ';')) {
            if (item.empty()) continue;
            VarianceOverride ov;
            std::stringstream is(item);
            std::string cell;
            std::getline(is, cell, ':');
            ov.direction = std::stoi(cell);
            std::getline(is, cell, ':');
            ov.t_begin = std::stoi(cell);
            std::getline(is, cell, ':');
            ov.t_end = std::stoi(cell);
            std::getline(is, cell, ':');
            ov.amplitude = std::stod(cell);
            s.variance_overrides.push_back(ov);
        }
    }

    SupportModelConfig p;
    p.variant = support_variant_from_string(get("support.variant"));
    p.s = std::stoi(get("support.s"));
    p.rho = std::stoi(get("support.rho"));
    p.rho2 = std::stoi(get("support.rho2"));
    p.beta = std::stoi(get("support.beta"));
    p.alpha = std::stoi(get("support.alpha"));
    p.dwell = std::stoi(get("support.dwell"));
    p.randomize = get("support.randomize") == "true";
    p.move_prob = std::stod(get("support.move_prob"));
    p.sigma = std::stod(get("support.sigma"));
    p.m = std::stoi(get("support.m"));

    OutlierConfig o;
    o.x_lo = std::stod(get("outliers.x_lo"));
    o.x_hi = std::stod(get("outliers.x_hi"));
    o.random_sign = get("outliers.random_sign") == "true";

    const auto mode = observation_mode_from_string(get("mode"));
    const auto seed = static_cast<std::uint64_t>(std::stoull(get("seed")));

    // Generation is deterministic in (config, seed); the matrices on disk
    // are for external consumers.
    return generate_scenario(s, p, o, mode, seed);
}

}  // namespace reprocs
