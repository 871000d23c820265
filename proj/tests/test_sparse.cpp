#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "reprocs/sparse.hpp"
#include "test_support.hpp"

using namespace reprocs;
using reprocs::testing::random_basis;
using reprocs::testing::random_gaussian;

namespace {

// Exhaustive-support oracle: over every support of size <= smax whose
// restricted least-squares fit is feasible, take the smallest l1 norm.
double oracle_min_l1(const ProjectedOperator& op, const Vector& y, double xi,
                     int smax) {
    const int n = op.n();
    Matrix phi = Matrix::Identity(n, n);
    if (!op.basis.is_empty())
        phi -= op.basis.data() * op.basis.data().transpose();
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= smax; ++s) {
        for_each_subset(n, s, 1u << 30, [&](const IndexSet& t) {
            if (t.empty()) {
                if (y.norm() <= xi) best = std::min(best, 0.0);
                return;
            }
            Matrix phi_t(n, static_cast<int>(t.size()));
            for (size_t i = 0; i < t.size(); ++i)
                phi_t.col(static_cast<int>(i)) = phi.col(t[i]);
            Eigen::JacobiSVD<Matrix> svd(phi_t,
                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
            if (svd.singularValues()(svd.singularValues().size() - 1) < 1e-10) return;
            Vector coeffs = svd.solve(y);
            if ((y - phi_t * coeffs).norm() <= xi * (1.0 + 1e-7) + 1e-12)
                best = std::min(best, coeffs.lpNorm<1>());
        });
    }
    return best;
}

}  // namespace

TEST_CASE("identity operator with a zero noise ball returns y") {
    Rng rng(2);
    const int n = 8;
    ProjectedOperator op = ProjectedOperator::identity(n);
    Vector y = random_gaussian(n, 1, rng);
    L1SolveReport rep = bpdn_solve(op, y, 0.0);
    CHECK(rep.converged);
    CHECK((rep.solution - y).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(rep.residual_norm <= 1e-8);
}

TEST_CASE("a noise ball containing y yields the zero solution") {
    Rng rng(4);
    const int n = 10;
    ProjectedOperator op(random_basis(n, 2, rng));
    Vector y = random_gaussian(n, 1, rng);
    L1SolveReport rep = bpdn_solve(op, y, y.norm() * 1.001);
    CHECK(rep.converged);
    CHECK(rep.solution.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.l1_value == 0.0);
}

TEST_CASE("matches the exhaustive-support oracle on a tiny instance") {
    Rng rng(6);
    const int n = 6;
    ProjectedOperator op(random_basis(n, 1, rng));
    Vector x_true = Vector::Zero(n);
    x_true(1) = 3.0;
    x_true(4) = -3.0;
    const Vector y = op.apply(x_true);
    const double xi = 1e-9;
    L1SolveReport rep = bpdn_solve(op, y, xi);
    CHECK(rep.converged);
    const double best = oracle_min_l1(op, y, xi, 2);
    CHECK(rep.l1_value == doctest::Approx(best).epsilon(1e-6));
    CHECK(rep.residual_norm <= xi * (1 + 1e-6) + 1e-12);
}

TEST_CASE("l1 value never beats the oracle and never exceeds the truth") {
    Rng rng(8);
    for (int rep_i = 0; rep_i < 20; ++rep_i) {
        const int n = 7;
        ProjectedOperator op(random_basis(n, 1, rng));
        Vector x_true = Vector::Zero(n);
        const int i = static_cast<int>(rng.uniform_int(0, n - 1));
        int j = static_cast<int>(rng.uniform_int(0, n - 1));
        if (j == i) j = (j + 1) % n;
        x_true(i) = rng.uniform(1.0, 4.0);
        x_true(j) = -rng.uniform(1.0, 4.0);
        Vector b = random_gaussian(n, 1, rng);
        const double xi = 0.05;
        b *= 0.8 * xi / b.norm();
        const Vector y = op.apply(x_true) + b;
        L1SolveReport rep = bpdn_solve(op, y, xi);
        REQUIRE(rep.converged);
        CHECK(rep.residual_norm <= xi * (1 + 1e-6) + 1e-12);
        // the truth is feasible, so the optimum cannot have a larger l1
        CHECK(rep.l1_value <= x_true.lpNorm<1>() * (1 + 1e-6) + 1e-9);
        const double best = oracle_min_l1(op, y, xi, 2);
        CHECK(rep.l1_value <= best * (1 + 1e-6) + 1e-9);
        CHECK(rep.duality_gap <= 1e-6 * std::max(1.0, rep.l1_value) + 1e-12);
    }
}

TEST_CASE("infeasible target reported, not masked") {
    Rng rng(10);
    const int n = 6;
    BasisMatrix p = random_basis(n, 2, rng);
    ProjectedOperator op(p);
    // y with a large out-of-range component cannot be matched within xi
    Vector y = p.data().col(0) * 5.0;
    L1SolveReport rep = bpdn_solve(op, y, 0.01);
    CHECK(!rep.converged);
}

TEST_CASE("threshold_support boundary semantics") {
    Vector x(3);
    x << 10.0, 0.1, -8.0;
    CHECK(threshold_support(x, 7.0) == IndexSet{0, 2});
    CHECK(threshold_support(Vector::Zero(5), 1.0).empty());
    Vector tie(2);
    tie << 2.0, -2.0;
    CHECK(threshold_support(tie, 2.0).empty());  // strict inequality
    CHECK_THROWS(threshold_support(x, 0.0));
}

TEST_CASE("recover_frame passes through clean frames") {
    Rng rng(12);
    const int n = 12;
    BasisMatrix p = random_basis(n, 3, rng);
    ProjectedOperator op(p);
    const Vector l = p.data() * random_gaussian(3, 1, rng);
    FrameRecovery fr = recover_frame(op, l, 1e-6, 0.5);
    CHECK(fr.support.empty());
    CHECK(fr.x_hat.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((fr.l_hat - l).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("recover_frame separates a well-posed frame") {
    Rng rng(14);
    const int n = 32;
    BasisMatrix p = random_basis(n, 2, rng);
    ProjectedOperator op(p);
    Vector a = random_gaussian(2, 1, rng);
    const Vector l = p.data() * a;
    Vector x = Vector::Zero(n);
    IndexSet sup = {4, 5, 6};
    for (int idx : sup) x(idx) = 3.0 + rng.uniform(0.0, 1.0);
    const Vector m = l + x;
    FrameRecovery fr = recover_frame(op, m, 1e-8, 1.0);
    CHECK(fr.support == sup);
    CHECK((fr.x_hat - x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fr.l_hat - l).cwiseAbs().maxCoeff() <= 1e-6);
    // l_hat + x_hat reproduces the observation identically
    CHECK((fr.l_hat + fr.x_hat - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("known-support path skips the l1 stage") {
    Rng rng(16);
    const int n = 10;
    BasisMatrix p = random_basis(n, 2, rng);
    ProjectedOperator op(p);
    const Vector l = p.data() * random_gaussian(2, 1, rng);
    Vector m = l;
    m(3) = 0.0;
    m(7) = 0.0;  // erasures
    FrameRecovery fr = recover_frame_mc(op, m, {3, 7});
    CHECK((fr.l_hat - l).cwiseAbs().maxCoeff() <= 1e-9);
    FrameRecovery none = recover_frame_mc(op, l, {});
    CHECK((none.l_hat - l).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("projector is idempotent and symmetric") {
    Rng rng(18);
    const int n = 20;
    ProjectedOperator op(random_basis(n, 4, rng));
    for (int rep = 0; rep < 20; ++rep) {
        Vector v = random_gaussian(n, 1, rng);
        const Vector pv = op.apply(v);
        CHECK((op.apply(pv) - pv).norm() <= 1e-10 * v.norm());
        Vector w = random_gaussian(n, 1, rng);
        // symmetry through inner products: <Phi v, w> == <v, Phi w>
        CHECK(std::abs(pv.dot(w) - v.dot(op.apply(w))) <= 1e-10 * v.norm() * w.norm());
    }
}

TEST_CASE("CS error bound and exact support recovery on 100 small instances") {
    Rng rng(20);
    int tested = 0;
    int attempts = 0;
    while (tested < 100 && attempts < 500) {
        ++attempts;
        const int n = 24 + static_cast<int>(rng.uniform_int(0, 8));  // 24..32
        const int r = 1 + static_cast<int>(rng.uniform_int(0, 1));
        const int s = 1 + static_cast<int>(rng.uniform_int(0, 1));
        BasisMatrix p = random_basis(n, r, rng);
        const double kappa2s = kappa_s(p, std::min(2 * s, n), KappaMode::exact);
        const double delta2s = kappa2s * kappa2s;
        if (delta2s >= std::sqrt(2.0) - 1.0) continue;  // outside the guarantee

        // sparse signal with x_min > 14 xi
        const double xi = 0.05;
        const double x_min = 14.0 * xi * 1.3;
        Vector x = Vector::Zero(n);
        IndexSet sup;
        while (static_cast<int>(sup.size()) < s) {
            int idx = static_cast<int>(rng.uniform_int(0, n - 1));
            if (std::find(sup.begin(), sup.end(), idx) == sup.end()) sup.push_back(idx);
        }
        std::sort(sup.begin(), sup.end());
        for (int idx : sup)
            x(idx) = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(x_min, 2.0 * x_min);

        Vector b = random_gaussian(n, 1, rng);
        b *= rng.uniform(0.1, 0.99) * xi / b.norm();
        ProjectedOperator op(p);
        const Vector y = op.apply(x) + b;

        L1SolveReport rep = bpdn_solve(op, y, xi);
        REQUIRE(rep.converged);
        CHECK((rep.solution - x).norm() <= 7.0 * xi);

        // any omega in [7 xi, x_min - 7 xi] recovers the support exactly
        for (double omega : {7.0 * xi, 0.5 * (7.0 * xi + x_min - 7.0 * xi),
                             x_min - 7.0 * xi}) {
            CHECK(threshold_support(rep.solution, omega) == sup);
        }
        ++tested;
    }
    CHECK(tested == 100);
}

TEST_CASE("recovery error identity on the known support") {
    Rng rng(22);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = 12;
        BasisMatrix p = random_basis(n, 2, rng);
        ProjectedOperator op(p);
        Vector l = p.data() * random_gaussian(2, 1, rng) +
                   0.01 * random_gaussian(n, 1, rng);
        IndexSet sup = {1, 5, 8};
        Vector x = Vector::Zero(n);
        for (int idx : sup) x(idx) = rng.uniform(2.0, 6.0);
        const Vector m = l + x;

        FrameRecovery fr = recover_frame_mc(op, m, sup);
        const Vector e = fr.x_hat - x;
        CHECK((l - fr.l_hat - e).cwiseAbs().maxCoeff() <= 1e-12);  // e = l - l_hat

        Matrix phi_t = projected_columns(p, sup);
        Matrix gram = phi_t.transpose() * phi_t;
        Vector rhs = phi_t.transpose() * l;  // I_T' Phi l because Phi' Phi = Phi
        Vector closed = gram.ldlt().solve(rhs);
        for (size_t i = 0; i < sup.size(); ++i)
            CHECK(std::abs(e(sup[i]) - closed(static_cast<int>(i))) <= 1e-8);
    }
}
