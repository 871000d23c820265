#include "reprocs/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <functional>
#include <numeric>

namespace reprocs {

LinalgTolerances& linalg_tolerances() {
    static LinalgTolerances tol;
    return tol;
}

std::uint64_t binomial(int n, int s) {
    if (s < 0 || s > n) return 0;
    s = std::min(s, n - s);
    std::uint64_t result = 1;
    const std::uint64_t cap = ~std::uint64_t(0) >> 1;
    for (int i = 1; i <= s; ++i) {
        // result * (n - s + i) / i is always integral at this point
        double projected = static_cast<double>(result) * (n - s + i) / i;
        if (projected > static_cast<double>(cap)) return cap;
        result = result * static_cast<std::uint64_t>(n - s + i) / i;
    }
    return result;
}

bool for_each_subset(int n, int s, std::uint64_t budget,
                     const std::function<void(const IndexSet&)>& visit) {
    if (binomial(n, s) > budget) return false;
    if (s == 0) {
        IndexSet empty;
        visit(empty);
        return true;
    }
    IndexSet t(s);
    std::iota(t.begin(), t.end(), 0);
    while (true) {
        visit(t);
        int i = s - 1;
        while (i >= 0 && t[i] == n - s + i) --i;
        if (i < 0) break;
        ++t[i];
        for (int j = i + 1; j < s; ++j) t[j] = t[j - 1] + 1;
    }
    return true;
}

double spectral_norm(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    if (std::min(m.rows(), m.cols()) <= 24) {
        return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
    }
    return Eigen::BDCSVD<Matrix>(m).singularValues()(0);
}

BasisMatrix BasisMatrix::empty(int n) { return BasisMatrix(Matrix(n, 0)); }

BasisMatrix BasisMatrix::from(const Matrix& columns) {
    if (columns.cols() > columns.rows())
        throw std::invalid_argument("basis matrix needs r <= n");
    BasisMatrix b(columns);
    if (b.orthonormality_defect() > linalg_tolerances().orthonormality)
        throw std::invalid_argument("columns are not orthonormal");
    return b;
}

BasisMatrix BasisMatrix::orthonormalized(const Matrix& columns) {
    if (columns.cols() == 0) return empty(static_cast<int>(columns.rows()));
    Eigen::ColPivHouseholderQR<Matrix> qr(columns);
    qr.setThreshold(linalg_tolerances().rank_cutoff);
    const Eigen::Index rank = qr.rank();
    if (rank == 0) return empty(static_cast<int>(columns.rows()));
    Matrix q = qr.householderQ() * Matrix::Identity(columns.rows(), rank);
    return BasisMatrix(std::move(q));
}

BasisMatrix BasisMatrix::concatenated(const BasisMatrix& other) const {
    if (other.n() != n()) throw std::invalid_argument("ambient dimension mismatch");
    if (other.is_empty()) return *this;
    if (is_empty()) return other;
    Matrix joined(n(), r() + other.r());
    joined.leftCols(r()) = data_;
    joined.rightCols(other.r()) = other.data_;
    BasisMatrix b(std::move(joined));
    if (b.orthonormality_defect() > linalg_tolerances().orthonormality)
        throw std::invalid_argument("concatenated blocks are not orthonormal");
    return b;
}

Vector BasisMatrix::project_out(const Vector& v) const {
    if (v.size() != n()) throw std::invalid_argument("vector length mismatch");
    if (is_empty()) return v;
    return v - data_ * (data_.transpose() * v);
}

Matrix BasisMatrix::project_out_cols(const Matrix& m) const {
    if (m.rows() != n()) throw std::invalid_argument("row count mismatch");
    if (is_empty()) return m;
    return m - data_ * (data_.transpose() * m);
}

double BasisMatrix::orthonormality_defect() const {
    if (is_empty()) return 0.0;
    Matrix g = data_.transpose() * data_;
    g.diagonal().array() -= 1.0;
    return g.cwiseAbs().maxCoeff();
}

double dif(const BasisMatrix& phat, const BasisMatrix& p) {
    if (phat.n() != p.n()) throw std::invalid_argument("ambient dimension mismatch");
    if (p.is_empty()) return 0.0;
    return spectral_norm(phat.project_out_cols(p.data()));
}

double kappa_s(const BasisMatrix& p, int s, KappaMode mode,
               std::uint64_t enumeration_budget) {
    if (s < 1 || s > p.n()) throw std::invalid_argument("need 1 <= s <= n");
    if (p.is_empty()) return 0.0;
    const double kappa1 = p.data().rowwise().norm().maxCoeff();
    if (mode == KappaMode::bound) return std::sqrt(static_cast<double>(s)) * kappa1;
    if (s == 1) return kappa1;

    double best = 0.0;
    bool done = for_each_subset(p.n(), s, enumeration_budget, [&](const IndexSet& t) {
        Matrix rows(s, p.r());
        for (int i = 0; i < s; ++i) rows.row(i) = p.data().row(t[i]);
        best = std::max(best, spectral_norm(rows));
    });
    if (!done)
        throw EnumerationBudgetError("kappa_s exact: C(n,s) exceeds enumeration budget");
    return best;
}

double ric_delta(const BasisMatrix& p, int s, std::uint64_t enumeration_budget) {
    if (s < 1 || s > p.n()) throw std::invalid_argument("need 1 <= s <= n");
    const int n = p.n();
    Matrix a = Matrix::Identity(n, n);
    if (!p.is_empty()) a -= p.data() * p.data().transpose();

    double delta = 0.0;
    bool done = for_each_subset(n, s, enumeration_budget, [&](const IndexSet& t) {
        Matrix at(n, s);
        for (int i = 0; i < s; ++i) at.col(i) = a.col(t[i]);
        Matrix gram = at.transpose() * at;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("ric_delta: eigensolver did not converge");
        delta = std::max(delta, es.eigenvalues().maxCoeff() - 1.0);
        delta = std::max(delta, 1.0 - es.eigenvalues().minCoeff());
    });
    if (!done)
        throw EnumerationBudgetError("ric_delta: C(n,s) exceeds enumeration budget");
    return delta;
}

namespace {

EigenSplit split_from_pairs(std::vector<std::pair<double, int>>& order, const Matrix& vectors,
                            double thresh, int n) {
    // Descending eigenvalue, ties by ascending original index.
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    EigenSplit out;
    int kept = 0;
    for (const auto& [value, idx] : order)
        if (value >= thresh) ++kept;
    Matrix basis(n, kept);
    int col = 0;
    for (const auto& [value, idx] : order) {
        if (value >= thresh) {
            basis.col(col++) = vectors.col(idx);
            out.eigenvalues_kept.push_back(std::max(value, 0.0));
        } else {
            out.eigenvalues_dropped.push_back(std::max(value, 0.0));
        }
    }
    out.basis = BasisMatrix::from(basis);
    return out;
}

}  // namespace

EigenSplit eigenvectors_above(const Matrix& m, double thresh) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > linalg_tolerances().symmetry)
        throw std::invalid_argument("matrix is not symmetric within tolerance");
    Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigenvectors_above: eigensolver did not converge");
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < sym.rows(); ++i) order.emplace_back(es.eigenvalues()(i), i);
    return split_from_pairs(order, es.eigenvectors(), thresh,
                            static_cast<int>(sym.rows()));
}

EigenSplit eigenvectors_above_from_columns(const Matrix& d, double alpha,
                                           double thresh) {
    if (alpha <= 0) throw std::invalid_argument("alpha must be positive");
    const int n = static_cast<int>(d.rows());
    Eigen::BDCSVD<Matrix> svd(d, Eigen::ComputeThinU);
    std::vector<std::pair<double, int>> order;
    const int k = static_cast<int>(svd.singularValues().size());
    for (int i = 0; i < k; ++i) {
        const double sv = svd.singularValues()(i);
        order.emplace_back(sv * sv / alpha, i);
    }
    EigenSplit out = split_from_pairs(order, svd.matrixU(), thresh, n);
    // Eigenvalues of (1/alpha) D D' beyond rank(D) are exact zeros.
    for (int i = k; i < n; ++i) out.eigenvalues_dropped.push_back(0.0);
    return out;
}

Matrix projected_columns(const BasisMatrix& phi_base, const IndexSet& t) {
    const int n = phi_base.n();
    Matrix cols(n, static_cast<int>(t.size()));
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < 0 || t[i] >= n) throw std::invalid_argument("support index out of range");
        if (i > 0 && t[i] <= t[i - 1])
            throw std::invalid_argument("support must be strictly ascending");
        Vector e = Vector::Zero(n);
        e(t[i]) = 1.0;
        cols.col(static_cast<int>(i)) = e;
    }
    if (!phi_base.is_empty())
        cols -= phi_base.data() * (phi_base.data().transpose() * cols);
    return cols;
}

Vector projected_ls(const BasisMatrix& phi_base, const IndexSet& t, const Vector& y) {
    const int n = phi_base.n();
    if (y.size() != n) throw std::invalid_argument("measurement length mismatch");
    Vector x = Vector::Zero(n);
    if (t.empty()) return x;
    if (static_cast<int>(t.size()) > n)
        throw std::invalid_argument("support larger than ambient dimension");
    Matrix phi_t = projected_columns(phi_base, t);
    Eigen::JacobiSVD<Matrix> svd(phi_t, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= linalg_tolerances().rank_cutoff)
        throw SingularSystemError(
            "projected_ls: restricted matrix is rank deficient (denseness violation)");
    Vector coeffs = svd.solve(y);
    for (size_t i = 0; i < t.size(); ++i) x(t[i]) = coeffs(static_cast<int>(i));
    return x;
}

}  // namespace reprocs
