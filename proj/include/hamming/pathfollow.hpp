#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hamming/relunet.hpp"

namespace hamming {

// Piecewise-linear image of the input segment x -> y under the network:
// output-space vertices at every activation crossing plus both endpoints.
struct OutputPath {
    std::vector<RealVector> vertices;
    std::vector<double> alphas;      // matching positions in [0, 1] along x -> y
    std::vector<double> prefix_len;  // cumulative Euclidean arc length per vertex
    double arc_length = 0.0;
};

// After a crossing the walk resumes at tau + BOUNDARY_NUDGE so the pattern on
// the far side is strict.
inline constexpr double BOUNDARY_NUDGE = 1e-7;

// Condition estimates above this abort the run as Singular.
inline constexpr double CONDITION_LIMIT = 1e12;

enum class FailureKind { None, Sinkhole, Reflection, Singular, IterationCap };

enum class SubsetMode { LargestStd, Random, UserList };

// How the free coefficient is drawn when the direction preimage has slack:
// Ray restricts sampling to the half-line that stays on the crossed unit's far
// side, Line samples the whole line and lets the progress guard sort it out.
enum class FarSideMode { Ray, Line };

enum class TraceEvent { Start, Advance, BoundaryCross, PathCorner };

struct TraceStep {
    RealVector output;
    double progress = 0.0;
    TraceEvent event = TraceEvent::Start;
};

struct AttackTrace {
    std::vector<TraceStep> steps;
    double input_length = 0.0;  // total Euclidean length walked in input space
};

struct AttackConfig {
    std::size_t delta = 1;
    std::optional<double> epsilon_target;    // default 1e-6 * (1 + |forward(y)|_inf)
    std::optional<double> epsilon_progress;  // default 1e-9 * path arc length
    std::size_t max_iters = 2000;
    std::size_t restarts = 1000;
    std::uint64_t seed = 0;
    SubsetMode subset_mode = SubsetMode::LargestStd;
    std::vector<std::size_t> subset;  // used when subset_mode == UserList
    FarSideMode far_side = FarSideMode::Ray;
    bool record_trace = false;
};

struct AttackResult {
    bool success = false;
    RealVector z;             // final input point; equals x off the subset bit-exactly
    std::size_t hamming = 0;  // coordinates where z differs from x
    std::size_t iterations = 0;
    RealVector final_output;
    FailureKind failure_kind = FailureKind::None;
    double progress = 0.0;  // best arc length reached along the path
    AttackTrace trace;      // filled only when config.record_trace
};

// Walks the segment from x to y, recording an output vertex at every
// activation boundary. Throws DegenerateSegmentError when x == y or the
// endpoint outputs coincide; OnBoundaryError when x starts on a boundary.
OutputPath build_path(const MlpNetwork& net, const RealVector& x, const RealVector& y);

// Follows the output path by repeatedly inverting the square local map on
// `subset` (|subset| == output_dim). Deterministic; reflections are fatal.
AttackResult follow_basic(const MlpNetwork& net, const RealVector& x, const RealVector& y,
                          const std::vector<std::size_t>& subset, const AttackConfig& cfg);

// Same walk with |subset| == output_dim + cfg.delta spare coordinates: each
// step picks a random point of the direction preimage (far-side constrained
// after a crossing), which dissolves reflections. Bit-reproducible for a
// fixed (seed, restart) pair; the restart index is folded into cfg.seed by
// run_attack.
AttackResult follow_improved(const MlpNetwork& net, const RealVector& x, const RealVector& y,
                             const std::vector<std::size_t>& subset, const AttackConfig& cfg);

struct AttackRunSummary {
    AttackResult result;
    int source_class = -1;
    int target_class = -1;
    std::vector<std::size_t> subset;
    RealVector target_input;   // anchor image y
    RealVector target_output;  // forward(y)
    std::size_t restarts_used = 0;
};

// Full protocol for one source image and one target class: picks the anchor
// (first correctly-classified training image of the class with the largest
// score margin), fixes the subset, and runs follow_improved restarts in
// deterministic waves with a frozen best-progress watermark. Returns the
// lowest-index success, else the best failure.
AttackRunSummary run_attack(const MlpNetwork& net, const LabeledDataset& train,
                            const RealVector& x, int target_class, const AttackConfig& cfg);

}  // namespace hamming
