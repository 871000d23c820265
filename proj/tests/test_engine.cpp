#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>

#include "reprocs/engine.hpp"
#include "test_support.hpp"

using namespace reprocs;
using reprocs::testing::random_basis;
using reprocs::testing::random_gaussian;

namespace {

// Streams frames through a fresh engine; returns the records.
std::vector<RecoveryRecord> run_stream(ReProCSEngine& eng, const Matrix& frames,
                                       const std::vector<IndexSet>* supports) {
    std::vector<RecoveryRecord> recs;
    for (Eigen::Index t = 0; t < frames.cols(); ++t)
        recs.push_back(eng.step(frames.col(t),
                                supports ? &(*supports)[t] : nullptr));
    return recs;
}

}  // namespace

TEST_CASE("train_init on a rank-one stream") {
    const int n = 6;
    Vector v = Vector::Zero(n);
    v(2) = 1.0;
    Matrix m(n, 10);
    for (int t = 0; t < 10; ++t) m.col(t) = v;
    TrainInit ti = train_init(m, RankRule::nonzero_eig);
    REQUIRE(ti.p_train.r() == 1);
    CHECK(std::abs(std::abs(ti.p_train.data()(2, 0)) - 1.0) <= 1e-12);
    CHECK(ti.lambda_train_minus == doctest::Approx(1.0));
}

TEST_CASE("train_init recovers a noiseless subspace exactly") {
    Rng rng(3);
    const int n = 20, r0 = 4, t_train = 30;
    BasisMatrix p0 = random_basis(n, r0, rng);
    Matrix m(n, t_train);
    for (int t = 0; t < t_train; ++t)
        m.col(t) = p0.data() * random_gaussian(r0, 1, rng);
    TrainInit ti = train_init(m, RankRule::nonzero_eig);
    REQUIRE(ti.p_train.r() == r0);
    CHECK(dif(ti.p_train, p0) <= 1e-8);
}

TEST_CASE("train_init fixed rank matches an independent eigensolver") {
    Rng rng(5);
    const int n = 12, t_train = 40;
    Matrix m(n, t_train);
    for (int t = 0; t < t_train; ++t) {
        m.col(t) = Vector::Zero(n);
        m(0, t) = 3.0 * rng.normal();
        m(1, t) = 1.5 * rng.normal();
        m(2, t) = 0.5 * rng.normal();
    }
    TrainInit ti = train_init(m, RankRule::fixed_rank, 2);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(m * m.transpose() / t_train));
    CHECK(ti.lambda_train_minus ==
          doctest::Approx(es.eigenvalues()(n - 2)).epsilon(1e-10));
    CHECK(ti.p_train.r() == 2);

    TrainInit energy = train_init(m, RankRule::energy_fraction, 0, 0.999);
    CHECK(energy.p_train.r() >= 2);
    CHECK_THROWS(train_init(Matrix::Zero(4, 5), RankRule::nonzero_eig));
}

TEST_CASE("in-subspace frames pass through untouched, no detection fires") {
    Rng rng(7);
    const int n = 24, r0 = 3, frames = 10000;
    BasisMatrix p0 = random_basis(n, r0, rng);
    EngineParams params;
    params.alpha = 250;
    params.K = 3;
    ReProCSEngine eng(p0, 1.0, params, ObservationMode::mc, 0);
    std::vector<IndexSet> empty_sup(frames);
    Matrix m(n, frames);
    for (int t = 0; t < frames; ++t)
        m.col(t) = p0.data() * Vector(5.0 * random_gaussian(r0, 1, rng));
    auto recs = run_stream(eng, m, &empty_sup);
    for (int t = 0; t < frames; t += 997) {
        CHECK((recs[t].l_hat - m.col(t)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(recs[t].x_hat.cwiseAbs().maxCoeff() <= 1e-10);
    }
    CHECK(eng.detections().empty());
    CHECK(eng.phase() == Phase::detect);
    CHECK(dif(eng.p_hat(), p0) <= 1e-12);
}

TEST_CASE("mc step with empty support returns the observation") {
    Rng rng(9);
    BasisMatrix p0 = random_basis(8, 2, rng);
    EngineParams params;
    params.alpha = 50;
    ReProCSEngine eng(p0, 1.0, params, ObservationMode::mc, 0);
    Vector m = random_gaussian(8, 1, rng);
    IndexSet none;
    RecoveryRecord rec = eng.step(m, &none);
    CHECK((rec.l_hat - m).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS(eng.step(m));  // mc requires the support
}

TEST_CASE("detection fires when projected energy crosses the threshold") {
    Rng rng(11);
    const int n = 30, r0 = 2;
    BasisMatrix joint = random_basis(n, r0 + 1, rng);
    BasisMatrix p0 = BasisMatrix::from(joint.data().leftCols(r0));
    const Vector fresh = joint.data().col(r0);

    EngineParams params;
    params.alpha = 200;
    params.K = 2;
    ReProCSEngine eng(p0, 1.0, params, ObservationMode::mc, 0);
    std::vector<IndexSet> none(3 * params.alpha);
    Matrix m(n, 3 * params.alpha);
    Matrix buffer(n, params.alpha);
    for (int t = 0; t < 3 * params.alpha; ++t) {
        // new-direction variance 2.0 > 2 * thresh
        const Vector l = p0.data() * Vector(5.0 * random_gaussian(r0, 1, rng)) +
                         fresh * rng.uniform(-std::sqrt(6.0), std::sqrt(6.0));
        m.col(t) = l;
        if (t < params.alpha) buffer.col(t) = l;
    }
    run_stream(eng, m, &none);

    REQUIRE(eng.detections().size() == 1);
    CHECK(eng.detections()[0].t == params.alpha);  // first window boundary

    // the window statistic matches a direct eigendecomposition
    Matrix d = p0.project_out_cols(buffer);
    Eigen::SelfAdjointEigenSolver<Matrix> es(
        Matrix(d * d.transpose() / double(params.alpha)));
    EigenSplit split = eigenvectors_above_from_columns(d, params.alpha, 0.5);
    CHECK(split.eigenvalues_kept.size() == 1);
    CHECK(split.eigenvalues_kept[0] ==
          doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-9));

    // both p-PCA rounds saw exactly one new direction
    REQUIRE(eng.ppca_events().size() == 2);
    for (const auto& ev : eng.ppca_events()) CHECK(ev.r_hat == 1);
    // after K rounds the star basis absorbed it and stayed orthonormal
    CHECK(eng.phase() == Phase::detect);
    CHECK(eng.p_star().r() == r0 + 1);
    CHECK(eng.p_star().orthonormality_defect() <= 1e-8);
    CHECK(dif(eng.p_star(), joint) <= 1e-2);
    CHECK(eng.p_new().is_empty());
}

TEST_CASE("theorem parameter formulas") {
    SignalModelConfig cfg;
    cfg.n = 40;
    cfg.t_max = 4000;
    cfg.t_train = 100;
    cfg.r0 = 4;
    cfg.change_times = {1000, 2500};
    cfg.r_new = {2, 2};
    cfg.q = {{1.0, 1.0}, {1.0, 1.0}};
    cfg.v = {{1.0005, 1.0005}, {1.0005, 1.0005}};
    SupportModelConfig sup;
    sup.s = 4;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 3;
    sup.alpha = 200;
    ScenarioTruth truth =
        generate_scenario(cfg, sup, OutlierConfig{}, ObservationMode::rpca, 31);

    TheoremParams tp = theorem_params(truth, 1e-6);
    CHECK(tp.K == 81);
    CHECK(tp.omega == doctest::Approx(7.0 * tp.xi));
    CHECK(tp.alpha_lower_bound > 1e6);  // far beyond any practical window

    const double gamma_new = truth.sig.gamma_new_measured;
    TheoremParams tiny = theorem_params(truth, 1e-12);
    CHECK(tiny.xi == doctest::Approx(std::sqrt(2.0) * gamma_new).epsilon(1e-4));

    CHECK_THROWS(theorem_params(truth, 0.5));  // far outside the admissible range
    CHECK(zeta_upper_bound(truth) > 0);
}

TEST_CASE("rpca stream without changes never raises a detection") {
    Rng rng(13);
    const int n = 32, r0 = 3, frames = 2000;
    BasisMatrix p0 = random_basis(n, r0, rng);
    EngineParams params;
    params.alpha = 200;
    params.K = 2;
    params.xi_adaptive = true;
    params.omega = 1.0;
    ReProCSEngine eng(p0, 1.0, params, ObservationMode::rpca, 0);
    Vector seed_lhat = p0.data() * random_gaussian(r0, 1, rng);
    eng.set_prev_lhat(seed_lhat);

    int exact = 0;
    for (int t = 0; t < frames; ++t) {
        const Vector l = p0.data() * Vector(5.0 * random_gaussian(r0, 1, rng));
        Vector x = Vector::Zero(n);
        const int pos = t % (n - 3);
        IndexSet sup = {pos, pos + 1, pos + 2};
        for (int idx : sup) x(idx) = rng.uniform(2.0, 6.0);
        RecoveryRecord rec = eng.step(l + x);
        CHECK(rec.solver_converged);
        if (rec.support == sup) ++exact;
    }
    CHECK(eng.detections().empty());
    CHECK(exact == frames);
}

TEST_CASE("state checkpoints round trip and resume identically") {
    Rng rng(15);
    const int n = 16, r0 = 2;
    BasisMatrix p0 = random_basis(n, r0, rng);
    EngineParams params;
    params.alpha = 40;
    params.K = 2;
    params.xi = 0.4;
    params.omega = 1.0;
    ReProCSEngine eng(p0, 1.0, params, ObservationMode::rpca, 10);

    Matrix m(n, 100);
    for (int t = 0; t < 100; ++t) {
        m.col(t) = p0.data() * Vector(5.0 * random_gaussian(r0, 1, rng));
        if (t % 3 == 0) m(t % n, t) += 4.0;
    }
    for (int t = 0; t < 60; ++t) eng.step(m.col(t));

    const std::string dir = "engine_ckpt_test";
    eng.save_checkpoint(dir);
    ReProCSEngine resumed = ReProCSEngine::load_checkpoint(dir);
    CHECK(resumed.frames_seen() == eng.frames_seen());
    CHECK(resumed.phase() == eng.phase());
    CHECK((resumed.p_star().data() - eng.p_star().data()).cwiseAbs().maxCoeff() == 0.0);

    for (int t = 60; t < 100; ++t) {
        RecoveryRecord a = eng.step(m.col(t));
        RecoveryRecord b = resumed.step(m.col(t));
        CHECK((a.l_hat - b.l_hat).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.support == b.support);
        CHECK(a.phase == b.phase);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("mini end-to-end: change detected, rank found, subspace reacquired") {
    SignalModelConfig cfg;
    cfg.n = 48;
    cfg.t_max = 1400;
    cfg.t_train = 60;
    cfg.r0 = 4;
    cfg.change_times = {400};
    cfg.r_new = {1};
    cfg.q = {{1.0}};
    cfg.v = {{1.002}};
    SupportModelConfig sup;
    sup.variant = SupportVariant::model3;
    sup.s = 4;
    sup.rho = 2;
    sup.rho2 = 2;
    sup.beta = 4;
    sup.alpha = 150;
    ScenarioTruth truth =
        generate_scenario(cfg, sup, OutlierConfig{}, ObservationMode::mc, 21);

    TrainInit ti = train_init(truth.M.leftCols(cfg.t_train), RankRule::fixed_rank, 4);
    EngineParams params;
    params.alpha = 150;
    params.K = 4;
    ReProCSEngine eng(ti.p_train, 1.0, params, ObservationMode::mc, cfg.t_train);

    double se_after_change = 0.0;
    for (int t = cfg.t_train + 1; t <= cfg.t_max; ++t) {
        eng.step(truth.M.col(t - 1), &truth.supports[t - 1]);
        if (t == 560) se_after_change = dif(eng.p_hat(), truth.true_basis_at(t));
    }
    REQUIRE(eng.detections().size() == 1);
    const int t_hat = eng.detections()[0].t;
    CHECK(t_hat >= 400);
    CHECK(t_hat <= 400 + 2 * params.alpha);
    for (const auto& ev : eng.ppca_events()) CHECK(ev.r_hat == 1);
    CHECK(eng.p_star().r() == 5);

    const double se_final = dif(eng.p_hat(), truth.true_basis_at(cfg.t_max));
    CHECK(se_after_change > 0.05);  // the change was actually disruptive
    CHECK(se_final <= 5e-2);
    CHECK(se_final < se_after_change);
}

TEST_CASE("engine parameter validation") {
    Rng rng(17);
    BasisMatrix p0 = random_basis(6, 2, rng);
    EngineParams bad;
    bad.alpha = 0;
    CHECK_THROWS(ReProCSEngine(p0, 1.0, bad, ObservationMode::mc, 0));
    EngineParams params;
    params.alpha = 10;
    ReProCSEngine eng(p0, 1.0, params, ObservationMode::mc, 0);
    CHECK(eng.thresh() == doctest::Approx(0.5));  // lambda_train_minus / 2
    EngineParams with_thresh;
    with_thresh.alpha = 10;
    with_thresh.thresh = 0.9;
    ReProCSEngine eng2(p0, 2.0, with_thresh, ObservationMode::mc, 0);
    CHECK(eng2.thresh() == doctest::Approx(0.9));
}
