#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hamming {

using RealVector = std::vector<double>;

// Thrown by solvers when elimination meets a pivot below the relative threshold.
struct SingularMatrixError : std::runtime_error {
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by preimage_affine when the row rank is less than the row count.
struct RankDeficientError : std::runtime_error {
    explicit RankDeficientError(const std::string& what) : std::runtime_error(what) {}
};

// A query point sits on (or numerically too close to) a separating surface.
// For hyperplane arrangements `layer` is always 0 and `unit` is the hyperplane
// index; for networks it names the hidden layer and unit whose pre-activation
// vanished.
struct OnBoundaryError : std::runtime_error {
    std::size_t layer;
    std::size_t unit;
    OnBoundaryError(std::size_t layer_, std::size_t unit_, const std::string& what)
        : std::runtime_error(what), layer(layer_), unit(unit_) {}
};

// A column pair contains a zero entry or two critical ratios coincide.
struct DegeneratePairError : std::runtime_error {
    explicit DegeneratePairError(const std::string& what) : std::runtime_error(what) {}
};

// Doubling search exceeded its scale cap without entering the target cell.
struct NoConvergenceError : std::runtime_error {
    explicit NoConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Path endpoints coincide (in input space, or exactly in output space).
struct DegenerateSegmentError : std::runtime_error {
    explicit DegenerateSegmentError(const std::string& what) : std::runtime_error(what) {}
};

// An exact combinatorial count does not fit in 64 bits.
struct CountOverflowError : std::runtime_error {
    explicit CountOverflowError(const std::string& what) : std::runtime_error(what) {}
};

// File-format problems (IDX magic/truncation/shape, weights schema).
struct DataFormatError : std::runtime_error {
    explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

struct BadMagicError : DataFormatError {
    explicit BadMagicError(const std::string& what) : DataFormatError(what) {}
};

struct TruncatedFileError : DataFormatError {
    explicit TruncatedFileError(const std::string& what) : DataFormatError(what) {}
};

struct DimensionMismatchError : DataFormatError {
    explicit DimensionMismatchError(const std::string& what) : DataFormatError(what) {}
};

struct SchemaError : DataFormatError {
    explicit SchemaError(const std::string& what) : DataFormatError(what) {}
};

// A finite-difference probe would straddle an activation boundary.
struct BoundaryTooCloseError : std::runtime_error {
    explicit BoundaryTooCloseError(const std::string& what) : std::runtime_error(what) {}
};

// Worker count for the parallel sections: HAMMING_L0_THREADS if set and
// positive, otherwise std::thread::hardware_concurrency().
std::size_t worker_count();

}  // namespace hamming
