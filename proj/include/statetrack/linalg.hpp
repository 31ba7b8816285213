#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "statetrack/common.hpp"

namespace statetrack {

// General dense real matrix, row-major. Small sizes only (state dimensions and
// alphabet-sized tables); no attempt at blocking or views.
class DenseMatrix {
 public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols);  // zero-initialized
    static DenseMatrix identity(int n);
    static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    DenseMatrix transpose() const;
    double frobenius_norm() const;
    double max_abs_diff(const DenseMatrix& other) const;
    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool operator==(const DenseMatrix& other) const = default;

 private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);

std::vector<double> matvec(const DenseMatrix& a, const std::vector<double>& x);

// One generalized-Householder factor I - beta v v^T with ||v|| = 1 (checked to
// 1e-12) and beta in [0, 2]. Its distinguished eigenvalue along v is 1 - beta;
// every other eigenvalue is 1.
struct GhFactor {
    std::vector<double> v;
    double beta = 0.0;

    GhFactor(std::vector<double> v_in, double beta_in);
    int dim() const { return static_cast<int>(v.size()); }
    double distinguished_eigenvalue() const { return 1.0 - beta; }
};

// Ordered product of GH factors acting on R^dim. Factors are stored in
// application order: factors[0] is applied to a vector first, so the realized
// matrix is C(factors[k-1]) * ... * C(factors[0]). The identity is the empty
// factor list. Every valid factor has operator norm <= 1, so realized products
// are contractions by construction.
struct GhProduct {
    int dim = 0;
    std::vector<GhFactor> factors;

    explicit GhProduct(int dim_in, std::vector<GhFactor> factors_in = {});
    size_t size() const { return factors.size(); }
};

// y = x - beta (v.x) v, without materializing the factor as a matrix.
std::vector<double> gh_apply(const GhFactor& f, const std::vector<double>& x);
// In-place variants used by the step loops. The matrix form applies the factor
// to every column of h.
void gh_apply_inplace(const GhFactor& f, std::vector<double>& x);
void gh_apply_inplace(const GhFactor& f, DenseMatrix& h);
// Applies all factors of the product, in application order.
void gh_apply_inplace(const GhProduct& p, DenseMatrix& h);

// Realized matrix of the product (see GhProduct for the ordering convention).
DenseMatrix gh_product_matrix(const GhProduct& p);

// Plane rotation [[cos,-sin],[sin,cos]] and line reflection
// [[cos,sin],[sin,-cos]] on R^2.
DenseMatrix rotation2(double theta);
DenseMatrix reflection2(double alpha);

// Two beta = 2 factors realizing rotation2(theta) as the reflection product
// H(theta) * H(0). Stored in application order, i.e. the H(0) factor (v = e2)
// first and the H(theta) factor (v = (-sin(theta/2), cos(theta/2))) second.
GhProduct rotation_as_householders(double theta);

// Swap of coordinates i and j on R^n as a beta = 2 factor with
// v = (e_i - e_j) / sqrt(2).
GhFactor swap_householder(int i, int j, int n);

// Largest singular value via power iteration on M^T M. Deterministic start
// (1,...,1)/sqrt(n), at most 500 iterations, convergence threshold 1e-12 on
// the estimate. Accepts rectangular input; the zero matrix returns 0.
double spectral_norm(const DenseMatrix& m);

struct Svd {
    DenseMatrix u;              // orthogonal
    std::vector<double> sigma;  // descending, nonnegative
    DenseMatrix v;              // orthogonal; m = u * diag(sigma) * v^T
};

// One-sided Jacobi SVD for square matrices up to n = 64. Fixed lexicographic
// sweep order, so the result is deterministic for a given input.
Svd svd_small(const DenseMatrix& m);

// Decomposition of an orthogonal matrix into at most n reflections (beta = 2
// factors), returned in application order. Columns already aligned with the
// corresponding basis vector (residual below 1e-10) are skipped, so the
// identity yields an empty list.
std::vector<GhFactor> orthogonal_to_reflections(const DenseMatrix& q);

// Factorization of an arbitrary contraction (spectral norm <= 1 + 1e-8) into
// at most 3n GH factors via the SVD: reflections for V^T and U plus one
// axis-aligned factor per singular value (v = e_i, beta = 1 - sigma_i).
GhProduct gh_factorize(const DenseMatrix& m);

// Complex eigenvalues via the characteristic polynomial, n <= 4 only
// (Faddeev-LeVerrier coefficients + deterministic Durand-Kerner roots).
std::vector<std::complex<double>> eigenvalues_small(const DenseMatrix& m);

}  // namespace statetrack
