#include "statetrack/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace statetrack {

namespace {
constexpr double kUnitNormTol = 1e-12;
constexpr double kAlignedColumnTol = 1e-10;
constexpr double kContractionSlack = 1e-8;
}  // namespace

DenseMatrix::DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    require(rows >= 0 && cols >= 0, "DenseMatrix: negative dimensions");
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

DenseMatrix DenseMatrix::identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    require(!rows.empty(), "from_rows: empty");
    const int r = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows[0].size());
    DenseMatrix m(r, c);
    for (int i = 0; i < r; ++i) {
        require(static_cast<int>(rows[i].size()) == c, "from_rows: ragged rows");
        for (int j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double DenseMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

double DenseMatrix::max_abs_diff(const DenseMatrix& other) const {
    require(same_shape(other), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - other.data_[i]));
    return m;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.same_shape(b), "matrix add: shape mismatch");
    DenseMatrix c(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
    return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.same_shape(b), "matrix sub: shape mismatch");
    DenseMatrix c(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
    DenseMatrix c(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) = s * a(i, j);
    return c;
}

std::vector<double> matvec(const DenseMatrix& a, const std::vector<double>& x) {
    require(a.cols() == static_cast<int>(x.size()), "matvec: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

GhFactor::GhFactor(std::vector<double> v_in, double beta_in) : v(std::move(v_in)), beta(beta_in) {
    require(!v.empty(), "GhFactor: empty direction");
    double n2 = 0.0;
    for (double x : v) {
        require(std::isfinite(x), "GhFactor: non-finite direction entry");
        n2 += x * x;
    }
    require(std::abs(std::sqrt(n2) - 1.0) <= kUnitNormTol, "GhFactor: direction must be unit norm");
    require(std::isfinite(beta) && beta >= -kUnitNormTol && beta <= 2.0 + kUnitNormTol,
            "GhFactor: beta must lie in [0, 2]");
    beta = std::clamp(beta, 0.0, 2.0);
}

GhProduct::GhProduct(int dim_in, std::vector<GhFactor> factors_in)
    : dim(dim_in), factors(std::move(factors_in)) {
    require(dim >= 1, "GhProduct: dimension must be positive");
    for (const auto& f : factors)
        require(f.dim() == dim, "GhProduct: factor dimension mismatch");
}

std::vector<double> gh_apply(const GhFactor& f, const std::vector<double>& x) {
    require(f.dim() == static_cast<int>(x.size()), "gh_apply: dimension mismatch");
    std::vector<double> y = x;
    gh_apply_inplace(f, y);
    return y;
}

void gh_apply_inplace(const GhFactor& f, std::vector<double>& x) {
    double dot = 0.0;
    const int n = f.dim();
    for (int i = 0; i < n; ++i) dot += f.v[i] * x[i];
    const double c = f.beta * dot;
    for (int i = 0; i < n; ++i) x[i] -= c * f.v[i];
}

void gh_apply_inplace(const GhFactor& f, DenseMatrix& h) {
    require(h.rows() == f.dim(), "gh_apply: state row count mismatch");
    const int n = h.rows(), d = h.cols();
    for (int j = 0; j < d; ++j) {
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += f.v[i] * h(i, j);
        const double c = f.beta * dot;
        for (int i = 0; i < n; ++i) h(i, j) -= c * f.v[i];
    }
}

void gh_apply_inplace(const GhProduct& p, DenseMatrix& h) {
    for (const auto& f : p.factors) gh_apply_inplace(f, h);
}

DenseMatrix gh_product_matrix(const GhProduct& p) {
    DenseMatrix m = DenseMatrix::identity(p.dim);
    gh_apply_inplace(p, m);  // applying the whole product to I realizes it
    return m;
}

DenseMatrix rotation2(double theta) {
    DenseMatrix m(2, 2);
    m(0, 0) = std::cos(theta);
    m(0, 1) = -std::sin(theta);
    m(1, 0) = std::sin(theta);
    m(1, 1) = std::cos(theta);
    return m;
}

DenseMatrix reflection2(double alpha) {
    DenseMatrix m(2, 2);
    m(0, 0) = std::cos(alpha);
    m(0, 1) = std::sin(alpha);
    m(1, 0) = std::sin(alpha);
    m(1, 1) = -std::cos(alpha);
    return m;
}

GhProduct rotation_as_householders(double theta) {
    // R(theta) = H(theta) * H(0) with H(a) = I - 2 v v^T, v = (-sin(a/2), cos(a/2)).
    // Application order: the H(0) factor (v = e2) acts first.
    std::vector<GhFactor> fs;
    fs.emplace_back(std::vector<double>{0.0, 1.0}, 2.0);
    fs.emplace_back(std::vector<double>{-std::sin(theta / 2.0), std::cos(theta / 2.0)}, 2.0);
    return GhProduct(2, std::move(fs));
}

GhFactor swap_householder(int i, int j, int n) {
    require(n >= 2 && i >= 0 && j >= 0 && i < n && j < n && i != j,
            "swap_householder: need distinct indices inside [0, n)");
    std::vector<double> v(n, 0.0);
    const double r = 1.0 / std::sqrt(2.0);
    v[std::min(i, j)] = r;
    v[std::max(i, j)] = -r;
    return GhFactor(std::move(v), 2.0);
}

double spectral_norm(const DenseMatrix& m) {
    require(m.rows() > 0 && m.cols() > 0, "spectral_norm: empty matrix");
    const int n = m.cols();
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double prev = 0.0;
    for (int it = 0; it < 500; ++it) {
        // z = M x; y = M^T z
        std::vector<double> z(m.rows(), 0.0);
        for (int i = 0; i < m.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += m(i, j) * x[j];
            z[i] = s;
        }
        double s2 = 0.0;
        for (double zi : z) s2 += zi * zi;
        const double est = std::sqrt(s2);
        if (it > 0 && std::abs(est - prev) <= 1e-12) return est;
        prev = est;
        std::vector<double> y(n, 0.0);
        for (int i = 0; i < m.rows(); ++i) {
            const double zi = z[i];
            if (zi == 0.0) continue;
            for (int j = 0; j < n; ++j) y[j] += m(i, j) * zi;
        }
        double ny = 0.0;
        for (double yi : y) ny += yi * yi;
        ny = std::sqrt(ny);
        if (ny == 0.0) return 0.0;  // x landed in the kernel of M^T M
        for (int j = 0; j < n; ++j) x[j] = y[j] / ny;
    }
    return prev;
}

Svd svd_small(const DenseMatrix& m) {
    require(m.rows() == m.cols(), "svd_small: square input required");
    const int n = m.rows();
    require(n >= 1 && n <= 64, "svd_small: supported sizes are 1..64");

    DenseMatrix a = m;                       // columns are rotated in place
    DenseMatrix v = DenseMatrix::identity(n);
    const double tol = 1e-15;

    for (int sweep = 0; sweep < 60; ++sweep) {
        bool converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < n; ++i) {
                    app += a(i, p) * a(i, p);
                    aqq += a(i, q) * a(i, q);
                    apq += a(i, p) * a(i, q);
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                converged = false;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < n; ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (converged) break;
    }

    std::vector<double> sigma(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double s2 = 0.0;
        for (int i = 0; i < n; ++i) s2 += a(i, j) * a(i, j);
        sigma[j] = std::sqrt(s2);
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sigma[x] > sigma[y]; });

    // Numerically zero singular values leave their U column undefined; the
    // threshold is relative so a duplicated row is treated as exact rank loss.
    const double sigma_max = *std::max_element(sigma.begin(), sigma.end());
    const double zero_tol = 1e-13 * std::max(1.0, sigma_max);

    Svd out;
    out.u = DenseMatrix(n, n);
    out.v = DenseMatrix(n, n);
    out.sigma.resize(n);
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        out.sigma[j] = sigma[src];
        for (int i = 0; i < n; ++i) out.v(i, j) = v(i, src);
        if (sigma[src] > zero_tol) {
            for (int i = 0; i < n; ++i) out.u(i, j) = a(i, src) / sigma[src];
        }
    }
    // Complete U for the zero columns: first canonical basis vector with a
    // substantial residual against the existing columns.
    for (int j = 0; j < n; ++j) {
        if (out.sigma[j] > zero_tol) continue;
        for (int cand = 0; cand < n; ++cand) {
            std::vector<double> e(n, 0.0);
            e[cand] = 1.0;
            for (int jj = 0; jj < n; ++jj) {
                if (jj == j || (out.sigma[jj] <= zero_tol && jj > j)) continue;
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += out.u(i, jj) * e[i];
                for (int i = 0; i < n; ++i) e[i] -= dot * out.u(i, jj);
            }
            double nrm = 0.0;
            for (double x : e) nrm += x * x;
            nrm = std::sqrt(nrm);
            if (nrm > 0.5) {
                for (int i = 0; i < n; ++i) out.u(i, j) = e[i] / nrm;
                break;
            }
        }
    }
    return out;
}

std::vector<GhFactor> orthogonal_to_reflections(const DenseMatrix& q) {
    require(q.rows() == q.cols(), "orthogonal_to_reflections: square input required");
    const int n = q.rows();
    require((q.transpose() * q).max_abs_diff(DenseMatrix::identity(n)) <= 1e-8,
            "orthogonal_to_reflections: input is not orthogonal");
    DenseMatrix r = q;
    std::vector<GhFactor> built;  // construction order: P_1, P_2, ...
    for (int i = 0; i < n; ++i) {
        std::vector<double> u(n, 0.0);
        double n2 = 0.0;
        for (int k = 0; k < n; ++k) {
            u[k] = r(k, i) - (k == i ? 1.0 : 0.0);
            n2 += u[k] * u[k];
        }
        const double nrm = std::sqrt(n2);
        if (nrm < kAlignedColumnTol) continue;  // column already equals e_i
        for (int k = 0; k < n; ++k) u[k] /= nrm;
        GhFactor f(std::move(u), 2.0);
        gh_apply_inplace(f, r);
        built.push_back(std::move(f));
    }
    // P_m ... P_1 Q = I and each P is an involution, so Q = P_1 ... P_m.
    // Application order is therefore the reverse of construction order.
    std::reverse(built.begin(), built.end());
    return built;
}

GhProduct gh_factorize(const DenseMatrix& m) {
    require(m.rows() == m.cols(), "gh_factorize: square input required");
    const int n = m.rows();
    Svd svd = svd_small(m);
    require(svd.sigma.empty() || svd.sigma[0] <= 1.0 + kContractionSlack,
            "gh_factorize: input is not a contraction");

    // M = U S V^T; application order lists compose left-to-right, so V^T's
    // factors go first, then the diagonal factors, then U's.
    std::vector<GhFactor> fs = orthogonal_to_reflections(svd.v.transpose());
    for (int i = 0; i < n; ++i) {
        const double beta = std::clamp(1.0 - svd.sigma[i], 0.0, 2.0);
        if (beta < 1e-15) continue;  // sigma_i == 1: identity factor
        std::vector<double> e(n, 0.0);
        e[i] = 1.0;
        fs.emplace_back(std::move(e), beta);
    }
    std::vector<GhFactor> fu = orthogonal_to_reflections(svd.u);
    fs.insert(fs.end(), std::make_move_iterator(fu.begin()), std::make_move_iterator(fu.end()));
    return GhProduct(n, std::move(fs));
}

std::vector<std::complex<double>> eigenvalues_small(const DenseMatrix& m) {
    require(m.rows() == m.cols(), "eigenvalues_small: square input required");
    const int n = m.rows();
    require(n >= 1 && n <= 4, "eigenvalues_small: supported sizes are 1..4");

    // Faddeev-LeVerrier: p(x) = x^n + c[0] x^(n-1) + ... + c[n-1].
    std::vector<double> c(n, 0.0);
    DenseMatrix mk = m;
    for (int k = 1; k <= n; ++k) {
        double tr = 0.0;
        for (int i = 0; i < n; ++i) tr += mk(i, i);
        c[k - 1] = -tr / k;
        if (k == n) break;
        DenseMatrix shifted = mk;
        for (int i = 0; i < n; ++i) shifted(i, i) += c[k - 1];
        mk = m * shifted;
    }

    // Monic coefficient vector a[i] multiplying x^(deg - i).
    std::vector<double> a(static_cast<size_t>(n) + 1);
    a[0] = 1.0;
    for (int k = 0; k < n; ++k) a[static_cast<size_t>(k) + 1] = c[static_cast<size_t>(k)];

    // Deflate the root x = 1 while the polynomial vanishes there to within
    // coefficient-noise level. Every repeated eigenvalue this code base
    // produces -- GH products, permutation matrices, plane-rotation
    // embeddings -- sits at exactly 1 (the factors fix the complement of
    // their active subspace), and a root of multiplicity m is otherwise only
    // locatable to O(eps^(1/m)): far too loose for downstream tolerances.
    // Dividing the known root out leaves simple, well-conditioned roots.
    int ones = 0;
    int deg = n;
    while (deg > 0) {
        double value = 0.0, magnitude = 0.0;
        for (int i = 0; i <= deg; ++i) {
            value += a[static_cast<size_t>(i)];
            magnitude += std::abs(a[static_cast<size_t>(i)]);
        }
        if (std::abs(value) > 1e-9 * (magnitude + 1.0)) break;
        // Synthetic division by (x - 1).
        for (int i = 1; i < deg; ++i) a[static_cast<size_t>(i)] += a[static_cast<size_t>(i) - 1];
        a.resize(static_cast<size_t>(deg));
        --deg;
        ++ones;
    }

    using cd = std::complex<double>;
    auto eval = [&](cd x) {
        cd r = a[0];
        for (int k = 1; k <= deg; ++k) r = r * x + a[static_cast<size_t>(k)];
        return r;
    };

    // Durand-Kerner from the standard deterministic start (0.4 + 0.9i)^k.
    std::vector<cd> z(static_cast<size_t>(deg));
    const cd base(0.4, 0.9);
    cd p0(1.0, 0.0);
    for (int i = 0; i < deg; ++i) {
        p0 *= base;
        z[static_cast<size_t>(i)] = p0;
    }
    for (int it = 0; it < 300; ++it) {
        double delta = 0.0;
        for (int i = 0; i < deg; ++i) {
            cd denom(1.0, 0.0);
            for (int j = 0; j < deg; ++j)
                if (j != i) denom *= (z[static_cast<size_t>(i)] - z[static_cast<size_t>(j)]);
            if (std::abs(denom) == 0.0) continue;
            const cd step = eval(z[static_cast<size_t>(i)]) / denom;
            z[static_cast<size_t>(i)] -= step;
            delta = std::max(delta, std::abs(step));
        }
        if (delta < 1e-13) break;
    }

    // Residual repeated roots away from 1 are still located only to
    // O(eps^(1/m)); collapsing a cluster to its mean keeps the reported
    // value inside the convex hull of the true roots.
    double scale = 1.0;
    for (const cd& r : z) scale = std::max(scale, std::abs(r));
    const double radius = 2e-4 * scale;
    std::vector<int> cluster(static_cast<size_t>(deg), -1);
    for (int i = 0; i < deg; ++i) {
        if (cluster[static_cast<size_t>(i)] >= 0) continue;
        std::vector<int> members{i};
        cluster[static_cast<size_t>(i)] = i;
        for (size_t head = 0; head < members.size(); ++head) {
            for (int j = 0; j < deg; ++j) {
                if (cluster[static_cast<size_t>(j)] >= 0) continue;
                if (std::abs(z[static_cast<size_t>(members[head])] - z[static_cast<size_t>(j)]) <=
                    radius) {
                    cluster[static_cast<size_t>(j)] = i;
                    members.push_back(j);
                }
            }
        }
        if (members.size() > 1) {
            cd mean(0.0, 0.0);
            for (int idx : members) mean += z[static_cast<size_t>(idx)];
            mean /= static_cast<double>(members.size());
            for (int idx : members) z[static_cast<size_t>(idx)] = mean;
        }
    }
    for (int i = 0; i < ones; ++i) z.emplace_back(1.0, 0.0);
    return z;
}

}  // namespace statetrack
