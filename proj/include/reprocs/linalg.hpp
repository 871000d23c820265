#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "reprocs/io.hpp"

namespace reprocs {

// Module tolerances. Overridable for experiments; the defaults are the
// contract everything else in this library assumes.
struct LinalgTolerances {
    double orthonormality = 1e-10;  // max |P'P - I| accepted by BasisMatrix
    double rank_cutoff = 1e-10;     // smallest singular value treated as nonzero
    double symmetry = 1e-8;         // max |M - M'| accepted before symmetrizing
};

LinalgTolerances& linalg_tolerances();

class SingularSystemError : public std::runtime_error {
public:
    explicit SingularSystemError(const std::string& what) : std::runtime_error(what) {}
};

class EnumerationBudgetError : public std::runtime_error {
public:
    explicit EnumerationBudgetError(const std::string& what)
        : std::runtime_error(what) {}
};

// An n x r matrix with orthonormal columns. r == 0 is the empty basis.
class BasisMatrix {
public:
    // Empty basis on an n-dimensional ambient space.
    static BasisMatrix empty(int n);

    // Wraps a matrix whose columns are already orthonormal; throws if the
    // orthonormality check fails.
    static BasisMatrix from(const Matrix& columns);

    // Orthonormalizes the given columns (thin QR, rank-revealing). Columns
    // below the rank cutoff are dropped.
    static BasisMatrix orthonormalized(const Matrix& columns);

    int n() const { return static_cast<int>(data_.rows()); }
    int r() const { return static_cast<int>(data_.cols()); }
    bool is_empty() const { return data_.cols() == 0; }
    const Matrix& data() const { return data_; }

    // [P Q] with Q already orthonormal to *this (checked).
    BasisMatrix concatenated(const BasisMatrix& other) const;

    // Applies I - P P' to a vector or to each column of a matrix.
    Vector project_out(const Vector& v) const;
    Matrix project_out_cols(const Matrix& m) const;

    // max |P'P - I|; 0 for the empty basis.
    double orthonormality_defect() const;

private:
    explicit BasisMatrix(Matrix data) : data_(std::move(data)) {}
    Matrix data_;
};

// Result of a thresholded symmetric eigendecomposition. Eigenvalues are
// split at thresh; values exactly equal to thresh are kept. Both lists are
// descending; ties are broken by ascending original index.
struct EigenSplit {
    BasisMatrix basis;
    std::vector<double> eigenvalues_kept;
    std::vector<double> eigenvalues_dropped;

    EigenSplit() : basis(BasisMatrix::empty(0)) {}
};

// Subspace difference ||(I - Phat Phat') P||_2. Symmetric when Phat and P
// have the same number of columns. Throws on ambient-dimension mismatch.
double dif(const BasisMatrix& phat, const BasisMatrix& p);

enum class KappaMode { exact, bound };

// Denseness coefficient kappa_s(P) = max over |T| <= s of ||I_T' P||_2.
// exact enumerates all size-s row subsets (budget-limited); bound returns
// sqrt(s) * kappa_1(P), a proven upper bound.
double kappa_s(const BasisMatrix& p, int s, KappaMode mode,
               std::uint64_t enumeration_budget = 1000000);

// Restricted isometry constant delta_s(I - P P') by exhaustive support
// enumeration of the restricted Gram matrix. Small-instance test oracle;
// equals kappa_s(P, s, exact)^2.
double ric_delta(const BasisMatrix& p, int s,
                 std::uint64_t enumeration_budget = 1000000);

// Basis for the span of all eigenvectors of symmetric PSD M with eigenvalue
// >= thresh. M is symmetrized internally; throws if |M - M'| exceeds the
// symmetry tolerance or the eigensolver fails.
EigenSplit eigenvectors_above(const Matrix& m, double thresh);

// Same split computed from a column-data matrix D: eigenvalues of
// (1/alpha) D D' are squared singular values of D divided by alpha. Avoids
// forming the Gram matrix.
EigenSplit eigenvectors_above_from_columns(const Matrix& d, double alpha,
                                           double thresh);

// Least squares restricted to a support: returns x with
// x_T = ((Phi)_T)^dag y and zeros elsewhere, where Phi = I - P P'.
// Solved through an SVD of the restricted column block; throws
// SingularSystemError when the block is rank deficient.
Vector projected_ls(const BasisMatrix& phi_base, const IndexSet& t, const Vector& y);

// Dense columns of Phi = I - P P' restricted to T (n x |T|).
Matrix projected_columns(const BasisMatrix& phi_base, const IndexSet& t);

// Spectral norm via SVD.
double spectral_norm(const Matrix& m);

// Enumeration helper: visits all size-s subsets of {0,...,n-1} in
// lexicographic order. Returns false (without visiting) when C(n,s) exceeds
// the budget.
bool for_each_subset(int n, int s, std::uint64_t budget,
                     const std::function<void(const IndexSet&)>& visit);

// C(n, s) with saturation at 2^63-1.
std::uint64_t binomial(int n, int s);

}  // namespace reprocs
