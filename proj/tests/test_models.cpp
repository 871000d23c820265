#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "reprocs/checks.hpp"
#include "reprocs/models.hpp"
#include "test_support.hpp"

using namespace reprocs;

namespace {

SignalModelConfig small_signal() {
    SignalModelConfig cfg;
    cfg.n = 24;
    cfg.t_max = 1200;
    cfg.t_train = 100;
    cfg.r0 = 3;
    cfg.change_times = {400};
    cfg.r_new = {1};
    cfg.q = {{1.0}};
    cfg.v = {{1.0005}};
    cfg.lambda_train_minus = 1.0;
    cfg.gamma_star = 5.0;
    return cfg;
}

// Topmost index of a contiguous (possibly wrapped) block.
int block_top(const IndexSet& t, int n) {
    if (t.empty()) return -1;
    if (t.back() - t.front() == static_cast<int>(t.size()) - 1) return t.front();
    for (size_t i = 1; i < t.size(); ++i)
        if (t[i] - t[i - 1] > 1) return t[i];
    return (t.front() + n) % n;
}

}  // namespace

TEST_CASE("new-direction variance starts at q * lambda_train_minus") {
    SignalModelConfig cfg = small_signal();
    cfg.v = {{1.00017}};
    SignalTruth sig = gen_signal(cfg, 42);
    const Vector& lam = sig.lambda_diag[cfg.change_times[0] - 1];
    REQUIRE(lam.size() == 4);
    CHECK(lam(3) == doctest::Approx(1.0).epsilon(1e-12));
    // one frame before the change, the new direction does not exist yet
    CHECK(sig.lambda_diag[cfg.change_times[0] - 2].size() == 3);
}

TEST_CASE("existing coefficients stay inside [-gamma, gamma]") {
    SignalModelConfig cfg = small_signal();
    cfg.change_times.clear();
    cfg.r_new.clear();
    cfg.q.clear();
    cfg.v.clear();
    SignalTruth sig = gen_signal(cfg, 9);
    const Matrix a = sig.p_segments[0].data().transpose() * sig.L;
    CHECK(a.cwiseAbs().maxCoeff() <= 5.0);
    CHECK(a.cwiseAbs().maxCoeff() > 4.5);  // the bound is actually exercised
}

TEST_CASE("static subspace keeps every frame in range(P0)") {
    SignalModelConfig cfg = small_signal();
    cfg.change_times.clear();
    cfg.r_new.clear();
    cfg.q.clear();
    cfg.v.clear();
    SignalTruth sig = gen_signal(cfg, 5);
    const Matrix residual = sig.p_segments[0].project_out_cols(sig.L);
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("windowed sample variances stay in the slow-change band") {
    SignalModelConfig cfg = small_signal();
    cfg.t_max = 2000;
    cfg.d = 1400;  // q v^d = 1.0005^1400 = e^0.6997 ~ 2.01 <= 3
    SignalTruth sig = gen_signal(cfg, 31);
    const int tj = cfg.change_times[0];
    const int alpha = 400;
    const Matrix p_new = sig.p_segments[1].data().rightCols(1);
    for (int w = 0; w < 3; ++w) {
        const int lo = tj + w * alpha;
        double var = 0.0;
        for (int t = lo; t < lo + alpha; ++t) {
            const double a = (p_new.transpose() * sig.L.col(t - 1))(0);
            var += a * a;
        }
        var /= alpha;
        CHECK(var >= 0.8 * cfg.lambda_train_minus);
        CHECK(var <= 3.3 * cfg.lambda_train_minus);
    }
}

TEST_CASE("rank of L equals r0 plus all added directions") {
    SignalModelConfig cfg;
    cfg.n = 20;
    cfg.t_max = 900;
    cfg.t_train = 60;
    cfg.r0 = 2;
    cfg.change_times = {300, 600};
    cfg.r_new = {1, 1};
    cfg.q = {{1.0}, {1.0}};
    cfg.v = {{1.001}, {1.001}};
    SignalTruth sig = gen_signal(cfg, 77);
    Eigen::BDCSVD<Matrix> svd(sig.L);
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-8) ++rank;
    CHECK(rank == 4);
}

TEST_CASE("identical seeds give bitwise identical scenarios") {
    SignalModelConfig cfg = small_signal();
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 4;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 5;
    sup.alpha = 200;
    OutlierConfig out;
    ScenarioTruth a = generate_scenario(cfg, sup, out, ObservationMode::rpca, 123);
    ScenarioTruth b = generate_scenario(cfg, sup, out, ObservationMode::rpca, 123);
    CHECK((a.sig.L - b.sig.L).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.M - b.M).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.supports == b.supports);
    ScenarioTruth c = generate_scenario(cfg, sup, out, ObservationMode::rpca, 124);
    CHECK((a.M - c.M).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("model3 moves by s/rho every dwell frames") {
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 20;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 18;
    sup.dwell = 18;  // mirror the reported simulation exactly
    sup.alpha = 800;
    const int n = 256;
    auto seq = gen_support_model3(sup, n, 400, 7);
    // skip the (possibly partial) first dwell
    int t0 = 1;
    while (t0 < 400 && seq[t0] == seq[t0 - 1]) ++t0;
    int last_top = block_top(seq[t0], n);
    int stretch = 1;
    for (int t = t0 + 1; t < 400; ++t) {
        const int top = block_top(seq[t], n);
        CHECK(seq[t].size() == 20);
        if (top == last_top) {
            ++stretch;
        } else {
            CHECK(stretch == 18);
            const bool shifted = top == last_top + 10;
            const bool restarted = top == 0 && last_top + 10 > n - 20;
            CHECK((shifted || restarted));
            last_top = top;
            stretch = 1;
        }
    }
}

TEST_CASE("model3 with rho = beta = 1 gives frame-disjoint supports") {
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 4;
    sup.rho = 1;
    sup.rho2 = 1;
    sup.beta = 1;
    sup.alpha = 100;
    auto seq = gen_support_model3(sup, 40, 200, 3);
    for (size_t t = 1; t < seq.size(); ++t) {
        IndexSet inter;
        std::set_intersection(seq[t - 1].begin(), seq[t - 1].end(), seq[t].begin(),
                              seq[t].end(), std::back_inserter(inter));
        CHECK(inter.empty());
    }
}

TEST_CASE("generated model3 stream passes its own validator") {
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 8;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 4;
    sup.alpha = 400;
    const int n = 2000;
    auto seq = gen_support_model3(sup, n, 500, 11);
    auto entries = check_support_model(seq, n, sup.s, sup.rho, sup.beta, sup.alpha);
    for (const auto& e : entries) {
        if (e.name == "support_model.rho_beta") continue;  // config-level budget
        INFO(e.name);
        CHECK(e.pass);
    }
}

TEST_CASE("bernoulli-gaussian support: degenerate and noise-free limits") {
    SupportModelConfig sup;
    sup.variant = SupportVariant::bernoulli_gaussian;
    sup.s = 20;
    sup.rho = 2;
    sup.alpha = 400;
    sup.move_prob = 0.0;
    sup.sigma = 0.0;
    auto frozen = gen_support_bernoulli_gaussian(sup, 100, 50, 5);
    for (const auto& t : frozen) CHECK(t == frozen[0]);
    auto issues = sup.validate(100, 1000);
    bool flagged = false;
    for (const auto& msg : issues)
        if (msg.find("never moves") != std::string::npos) flagged = true;
    CHECK(flagged);

    sup.move_prob = 1.0;
    auto marching = gen_support_bernoulli_gaussian(sup, 100, 50, 5);
    for (size_t t = 1; t < marching.size(); ++t) {
        const int hop = (block_top(marching[t], 100) - block_top(marching[t - 1], 100) +
                         100) % 100;
        CHECK(hop == 11);  // 1.1 s / rho, integral for these parameters
    }
}

TEST_CASE("bernoulli-gaussian dwell stays under the implied beta") {
    const int n = 100;
    const int t_max = 10000;
    SupportModelConfig sup;
    sup.variant = SupportVariant::bernoulli_gaussian;
    sup.s = 20;
    sup.rho = 2;
    sup.alpha = 400;
    sup.move_prob = 0.9;
    sup.sigma = std::sqrt(400.0 / (4000.0 * 4.0 * std::log(double(n))));
    auto seq = gen_support_bernoulli_gaussian(sup, n, t_max, 17);
    // smallest beta with move_prob >= 1 - (n^-10 / (2 t_max))^(1/beta)
    const double beta_real =
        std::log(std::pow(double(n), -10.0) / (2.0 * t_max)) / std::log(0.1);
    const int beta = static_cast<int>(std::ceil(beta_real));
    int longest = 1, run = 1;
    for (int t = 1; t < t_max; ++t) {
        if (seq[t] == seq[t - 1])
            ++run;
        else
            run = 1;
        longest = std::max(longest, run);
    }
    CHECK(longest <= beta);
}

TEST_CASE("everyframe support marches and cycles") {
    SupportModelConfig sup;
    sup.variant = SupportVariant::everyframe;
    sup.s = 1;
    sup.m = 1;
    sup.alpha = 400;
    const int n = 5;
    auto seq = gen_support_everyframe(sup, n, 12, 19);
    for (int t = 1; t < 12; ++t) CHECK(seq[t][0] == (seq[t - 1][0] + 1) % n);
    CHECK(seq[5] == seq[0]);  // full cycle of length n
}

TEST_CASE("everyframe window occupancy is bounded by s") {
    SupportModelConfig sup;
    sup.variant = SupportVariant::everyframe;
    sup.s = 2;
    sup.m = 3;
    sup.alpha = 800;
    const int n = 2500;
    CHECK(sup.validate(n, 4000).empty());
    auto seq = gen_support_everyframe(sup, n, 3200, 23);

    // Unwrap the topmost positions (moves are between 1 and m).
    std::vector<long long> pos(seq.size());
    pos[0] = block_top(seq[0], n);
    for (size_t t = 1; t < seq.size(); ++t) {
        const int hop = (block_top(seq[t], n) - block_top(seq[t - 1], n) + n) % n;
        CHECK(hop >= 1);
        CHECK(hop <= sup.m);
        pos[t] = pos[t - 1] + hop;
    }
    // Partition each window's position range into blocks of s; the object
    // spends at most s frames inside a block.
    for (size_t w = 0; w + sup.alpha <= seq.size(); w += sup.alpha) {
        const long long base = pos[w];
        std::map<long long, int> frames_in_block;
        for (int i = 0; i < sup.alpha; ++i)
            ++frames_in_block[(pos[w + i] - base) / sup.s];
        for (const auto& [block, count] : frames_in_block) CHECK(count <= sup.s);
    }
}

TEST_CASE("outlier magnitudes honor the configured range") {
    std::vector<IndexSet> supports = {{0, 2}, {}, {1}};
    OutlierConfig cfg;
    cfg.x_lo = 2.0;
    cfg.x_hi = 6.0;
    auto vals = gen_outliers(supports, cfg, 9);
    REQUIRE(vals.size() == 3);
    CHECK(vals[1].empty());
    for (const auto& frame : vals)
        for (double v : frame) {
            CHECK(v >= 2.0);
            CHECK(v <= 6.0);
        }

    cfg.x_lo = cfg.x_hi = 3.5;
    auto constant = gen_outliers(supports, cfg, 9);
    for (const auto& frame : constant)
        for (double v : frame) CHECK(v == 3.5);

    CHECK_THROWS(gen_outliers(supports, OutlierConfig{0.0, 1.0, false}, 1));
}

TEST_CASE("assemble: empty support, all-erased, and the additive identity") {
    SignalModelConfig cfg = small_signal();
    cfg.change_times.clear();
    cfg.r_new.clear();
    cfg.q.clear();
    cfg.v.clear();
    cfg.t_max = 140;
    SignalTruth sig = gen_signal(cfg, 3);

    std::vector<IndexSet> none(cfg.t_max);
    std::vector<std::vector<double>> no_vals(cfg.t_max);
    Matrix m_mc = assemble(sig.L, none, no_vals, ObservationMode::mc, cfg.t_train);
    Matrix m_rp = assemble(sig.L, none, no_vals, ObservationMode::rpca, cfg.t_train);
    CHECK((m_mc - sig.L).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m_rp - sig.L).cwiseAbs().maxCoeff() == 0.0);

    std::vector<IndexSet> all(cfg.t_max);
    for (int t = cfg.t_train; t < cfg.t_max; ++t) {
        all[t].resize(cfg.n);
        std::iota(all[t].begin(), all[t].end(), 0);
    }
    Matrix erased = assemble(sig.L, all, no_vals, ObservationMode::mc, cfg.t_train);
    CHECK(erased.rightCols(cfg.t_max - cfg.t_train).cwiseAbs().maxCoeff() == 0.0);

    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 3;
    sup.rho = 1;
    sup.rho2 = 1;
    sup.beta = 2;
    sup.alpha = 100;
    ScenarioTruth truth =
        generate_scenario(cfg, sup, OutlierConfig{}, ObservationMode::rpca, 55);
    for (int t = cfg.t_train + 1; t <= cfg.t_max; ++t) {
        const Vector diff = truth.M.col(t - 1) - truth.x_col(t);
        CHECK((diff - truth.sig.L.col(t - 1)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(truth.x_min() >= 2.0);
}

TEST_CASE("mc observations zero exactly the supported entries") {
    SignalModelConfig cfg = small_signal();
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 4;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 3;
    sup.alpha = 100;
    ScenarioTruth truth =
        generate_scenario(cfg, sup, OutlierConfig{}, ObservationMode::mc, 8);
    for (int t = cfg.t_train + 1; t <= cfg.t_max; ++t) {
        size_t k = 0;
        for (int i = 0; i < cfg.n; ++i) {
            if (k < truth.supports[t - 1].size() && truth.supports[t - 1][k] == i) {
                CHECK(truth.M(i, t - 1) == 0.0);
                ++k;
            } else {
                CHECK(truth.M(i, t - 1) == truth.sig.L(i, t - 1));
            }
        }
    }
}

TEST_CASE("scenario directory round trip") {
    SignalModelConfig cfg = small_signal();
    cfg.t_max = 300;
    cfg.change_times = {200};
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 4;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 5;
    sup.alpha = 100;
    ScenarioTruth truth =
        generate_scenario(cfg, sup, OutlierConfig{}, ObservationMode::rpca, 99);
    const std::string dir = "scenario_roundtrip_test";
    save_scenario(truth, dir);
    ScenarioTruth back = load_scenario(dir);
    CHECK((back.sig.L - truth.sig.L).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.M - truth.M).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.supports == truth.supports);
    Matrix l_file = read_matrix(dir + "/L.mat");
    CHECK((l_file - truth.sig.L).cwiseAbs().maxCoeff() == 0.0);
    int t_begin = 0;
    auto sups = read_supports(dir + "/supports.csv", &t_begin);
    CHECK(t_begin == cfg.t_train + 1);
    CHECK(sups.size() == size_t(cfg.t_max - cfg.t_train));
    std::filesystem::remove_all(dir);
}

TEST_CASE("config validation rejects infeasible setups") {
    SignalModelConfig cfg = small_signal();
    cfg.r0 = 30;  // exceeds n after adding changes
    CHECK_THROWS(cfg.validate());

    SignalModelConfig ok = small_signal();
    ok.v = {{0.9995}};  // shrinking variance: flagged, not fatal
    auto issues = ok.validate();
    bool flagged = false;
    for (const auto& m : issues)
        if (m.find("v <= 1") != std::string::npos) flagged = true;
    CHECK(flagged);

    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 5;
    sup.rho = 3;   // ceil(5/3) = 2
    sup.rho2 = 5;  // floor(5/5) = 1 < 2
    sup.beta = 4;
    sup.alpha = 100;
    CHECK_THROWS(gen_support_model3(sup, 50, 10, 1));
}
