#include "hamming/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>

namespace hamming {

std::size_t worker_count() {
    if (const char* env = std::getenv("HAMMING_L0_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

RealVector matvec(const Matrix& a, const RealVector& x) {
    if (x.size() != a.cols) throw std::invalid_argument("matvec: size mismatch");
    RealVector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: size mismatch");
    Matrix c(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ra = a.row(i);
        double* rc = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ra[k];
            if (aik == 0.0) continue;
            const double* rb = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) rc[j] += aik * rb[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double inf_norm(const RealVector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

double inf_norm(const Matrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += std::fabs(a.at(i, j));
        m = std::max(m, s);
    }
    return m;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data) m = std::max(m, std::fabs(x));
    return m;
}

namespace {

// In-place elimination with partial pivoting on an augmented system.
// `rhs` holds one or more right-hand-side columns. Throws on a pivot at or
// below PIVOT_TOL * max|A| (the scale is taken from the original matrix).
void eliminate_square(Matrix& a, Matrix& rhs) {
    const std::size_t n = a.rows;
    const double scale = max_abs(a);
    const double tol = PIVOT_TOL * (scale > 0.0 ? scale : 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::fabs(a.at(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            double v = std::fabs(a.at(i, k));
            if (v > best) { best = v; piv = i; }
        }
        if (best <= tol)
            throw SingularMatrixError("solve_square: pivot " + std::to_string(best) +
                                      " at column " + std::to_string(k) + " below threshold");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(piv, j));
            for (std::size_t j = 0; j < rhs.cols; ++j) std::swap(rhs.at(k, j), rhs.at(piv, j));
        }
        const double inv = 1.0 / a.at(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a.at(i, k) * inv;
            if (f == 0.0) continue;
            a.at(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) a.at(i, j) -= f * a.at(k, j);
            for (std::size_t j = 0; j < rhs.cols; ++j) rhs.at(i, j) -= f * rhs.at(k, j);
        }
    }
    // back substitution
    for (std::size_t c = 0; c < rhs.cols; ++c) {
        for (std::size_t ik = n; ik-- > 0;) {
            double s = rhs.at(ik, c);
            for (std::size_t j = ik + 1; j < n; ++j) s -= a.at(ik, j) * rhs.at(j, c);
            rhs.at(ik, c) = s / a.at(ik, ik);
        }
    }
}

}  // namespace

RealVector solve_square(const Matrix& a, const RealVector& b) {
    if (a.rows != a.cols) throw std::invalid_argument("solve_square: matrix not square");
    if (b.size() != a.rows) throw std::invalid_argument("solve_square: rhs size mismatch");
    Matrix work = a;
    Matrix rhs(a.rows, 1);
    for (std::size_t i = 0; i < a.rows; ++i) rhs.at(i, 0) = b[i];
    eliminate_square(work, rhs);
    RealVector x(a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) x[i] = rhs.at(i, 0);
    return x;
}

Matrix invert(const Matrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("invert: matrix not square");
    Matrix work = a;
    Matrix rhs(a.rows, a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) rhs.at(i, i) = 1.0;
    eliminate_square(work, rhs);
    return rhs;
}

AffinePreimage preimage_affine(const Matrix& a, const RealVector& target) {
    if (a.rows > a.cols) throw std::invalid_argument("preimage_affine: more rows than columns");
    if (target.size() != a.rows) throw std::invalid_argument("preimage_affine: target size mismatch");
    const std::size_t m = a.rows, n = a.cols;
    Matrix work = a;
    RealVector rhs = target;
    const double scale = max_abs(a);
    const double tol = PIVOT_TOL * (scale > 0.0 ? scale : 1.0);

    // Row echelon with row pivoting; pivot columns advance left to right and
    // are remembered so free columns can be identified afterwards.
    std::vector<std::size_t> pivot_col(m, 0);
    std::size_t r = 0;
    for (std::size_t c = 0; c < n && r < m; ++c) {
        std::size_t piv = r;
        double best = std::fabs(work.at(r, c));
        for (std::size_t i = r + 1; i < m; ++i) {
            double v = std::fabs(work.at(i, c));
            if (v > best) { best = v; piv = i; }
        }
        if (best <= tol) continue;  // free column
        if (piv != r) {
            for (std::size_t j = 0; j < n; ++j) std::swap(work.at(r, j), work.at(piv, j));
            std::swap(rhs[r], rhs[piv]);
        }
        const double inv = 1.0 / work.at(r, c);
        for (std::size_t i = 0; i < m; ++i) {
            if (i == r) continue;
            const double f = work.at(i, c) * inv;
            if (f == 0.0) continue;
            for (std::size_t j = c; j < n; ++j) work.at(i, j) -= f * work.at(r, j);
            work.at(i, c) = 0.0;
            rhs[i] -= f * rhs[r];
        }
        pivot_col[r] = c;
        ++r;
    }
    if (r < m)
        throw RankDeficientError("preimage_affine: row rank " + std::to_string(r) +
                                 " < rows " + std::to_string(m));

    std::vector<bool> is_pivot(n, false);
    for (std::size_t i = 0; i < m; ++i) is_pivot[pivot_col[i]] = true;

    AffinePreimage out;
    out.particular.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        out.particular[pivot_col[i]] = rhs[i] / work.at(i, pivot_col[i]);

    // One basis vector per free column: unit weight on the free column, pivot
    // entries chosen to cancel it.
    for (std::size_t c = 0; c < n; ++c) {
        if (is_pivot[c]) continue;
        RealVector v(n, 0.0);
        v[c] = 1.0;
        for (std::size_t i = 0; i < m; ++i)
            v[pivot_col[i]] = -work.at(i, c) / work.at(i, pivot_col[i]);
        out.basis.push_back(std::move(v));
    }
    return out;
}

double condition_estimate(const Matrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("condition_estimate: matrix not square");
    if (a.rows == 0) return 1.0;
    try {
        Matrix inv = invert(a);
        double kappa = inf_norm(a) * inf_norm(inv);
        if (!std::isfinite(kappa)) return std::numeric_limits<double>::infinity();
        return std::max(kappa, 1.0);
    } catch (const SingularMatrixError&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace hamming
