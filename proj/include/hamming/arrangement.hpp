#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hamming/linalg.hpp"

namespace hamming {

// m hyperplanes <m_i, x> + b_i = 0 in R^n, rows of `coeffs` are the m_i.
struct HyperplaneArrangement {
    Matrix coeffs;       // m x n, every row nonzero
    RealVector offsets;  // m

    std::size_t m() const { return coeffs.rows; }
    std::size_t n() const { return coeffs.cols; }
};

// Strict sign pattern, entries +1 or -1.
using SignVector = std::vector<std::int8_t>;

// Sign evaluations with magnitude <= CELL_BOUNDARY_TOL raise OnBoundaryError.
inline constexpr double CELL_BOUNDARY_TOL = 1e-12;

// Doubling search in cross_cell gives up past this scale factor.
inline constexpr double CROSS_CELL_MAX_SCALE = 1e12;

// Critical ratios closer than this are a degenerate pair.
inline constexpr double RATIO_TIE_TOL = 1e-12;

// Coverage bitmap refuses m above this (2^m bits of memory).
inline constexpr std::size_t COVERAGE_MAX_M = 24;

SignVector cell_of(const HyperplaneArrangement& arr, const RealVector& x);

// Exact cell-count bound sum_{i=0..n} C(m, i); CountOverflowError past 64 bits.
std::uint64_t max_cells(std::size_t m, std::size_t n);

// Direction d with at most k nonzero coordinates whose image signs equal
// `target`, i.e. sign(coeffs * d) == target (offsets play no role for the
// direction). Returns empty vector when the search finds none within budget.
//   k == 1, 2   : exhaustive over columns / column pairs
//   3 <= k < m  : seeded random column subsets, feasibility by phase-one LP
//   k >= m      : seeded random subsets, direct solve of the square/wide system
RealVector sparse_direction(const HyperplaneArrangement& arr, const SignVector& target,
                            std::size_t k, std::uint64_t seed = 0,
                            std::size_t budget = 2000);

// Walks y = x + c*d by doubling c from 1 until cell_of(y) == target.
// Requires sign(coeffs * d) == target; throws NoConvergenceError past the cap.
RealVector cross_cell(const HyperplaneArrangement& arr, const RealVector& x,
                      const SignVector& target, const RealVector& d);

// Orthants met by span{g, h} together with a witness combination u*g + v*h
// strictly inside each orthant.
struct PairOrthants {
    std::vector<SignVector> orthants;
    std::vector<std::pair<double, double>> witnesses;
};

// Exactly 2m orthants for a pair in general position (all entries nonzero,
// all m critical ratios h_i/g_i distinct); DegeneratePairError otherwise.
PairOrthants orthants_of_pair(const RealVector& g, const RealVector& h);

// 2 * sum_{d=0..k-1} C(m-1, d): orthants crossed by a generic k-dim subspace.
std::uint64_t orthant_count_formula(std::size_t m, std::size_t k);

// 2^(m/k) / m^((k-1)/k): input dimension needed before random k-sparse
// directions reach a given orthant count.
double dimension_bound(std::size_t m, std::size_t k);

struct CoverageReport {
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::uint64_t covered = 0;
    std::uint64_t total = 0;
    double fraction = 0.0;
    double independence_estimate = 0.0;
    double elapsed_seconds = 0.0;
    std::uint64_t degenerate_pairs = 0;  // ties resolved by perturbation
};

// Draws an m x n standard-normal matrix from `seed` and marks every orthant
// hit by a k-sparse combination of its columns (k in {1, 2}) in a 2^m bitmap.
// Pair enumeration runs across worker_count() threads; the result is
// bit-identical for a fixed seed regardless of thread count.
CoverageReport coverage_experiment(std::size_t m, std::size_t n, std::size_t k,
                                   std::uint64_t seed);

// Packs a sign vector into bits (bit i set when entry i is positive).
std::uint32_t pack_signs(const SignVector& s);

}  // namespace hamming
