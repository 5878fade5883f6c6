#pragma once

#include <cstddef>
#include <vector>

#include "hamming/common.hpp"

namespace hamming {

// Dense row-major matrix of doubles. Small sizes only (tens to a few hundred
// rows); everything here is O(n^3) textbook elimination, which is plenty.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows*cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
};

// Pivots with magnitude at or below PIVOT_TOL * max|entry| count as zero.
inline constexpr double PIVOT_TOL = 1e-12;

// Solutions must satisfy |A x - b|_inf <= RESIDUAL_TOL * (1 + |b|_inf).
inline constexpr double RESIDUAL_TOL = 1e-9;

RealVector matvec(const Matrix& a, const RealVector& x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double inf_norm(const RealVector& v);
double inf_norm(const Matrix& a);  // max absolute row sum
double max_abs(const Matrix& a);

// Solves A x = b for square A by Gaussian elimination with partial pivoting.
// Throws SingularMatrixError when a pivot falls below the relative threshold.
RealVector solve_square(const Matrix& a, const RealVector& b);

// Inverse via the same elimination; throws SingularMatrixError.
Matrix invert(const Matrix& a);

// Solution set of A x = target for a wide matrix A (rows <= cols) of full row
// rank: a particular solution plus a basis of the (cols - rows)-dimensional
// null space. Any x = particular + sum_i c_i * basis[i] satisfies A x = target.
struct AffinePreimage {
    RealVector particular;
    std::vector<RealVector> basis;
};

// Throws RankDeficientError when row rank < rows.
AffinePreimage preimage_affine(const Matrix& a, const RealVector& target);

// Infinity-norm condition number |A|_inf * |A^-1|_inf, clamped to >= 1.
// Returns +infinity for singular input instead of throwing.
double condition_estimate(const Matrix& a);

}  // namespace hamming
