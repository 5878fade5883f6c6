#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hamming/arrangement.hpp"
#include "hamming/relunet.hpp"

namespace hamming {

// Central-difference step.
inline constexpr double FD_STEP = 1e-6;

// Sampling box half-width for region enumeration.
inline constexpr double REGION_BOX_RADIUS = 10.0;

// enumerate_regions refuses networks with more hidden units than this.
inline constexpr std::size_t REGION_MAX_HIDDEN = 20;

struct RegionRecord {
    ActivationPattern pattern;
    RealVector witness;
    LocalAffineMap map;  // over all input coordinates
};

struct RegionCatalog {
    std::vector<RegionRecord> regions;
};

// Uniform sampling in [-box_radius, box_radius]^n, collecting distinct
// activation patterns with a witness and the exact local map at the witness.
// Boundary hits are skipped. Deterministic for a fixed seed.
RegionCatalog enumerate_regions(const MlpNetwork& net, double box_radius,
                                std::size_t samples, std::uint64_t seed);

// Central-difference Jacobian of forward() w.r.t. the subset coordinates.
// Throws BoundaryTooCloseError when a probe leaves x's activation region.
Matrix fd_jacobian(const MlpNetwork& net, const RealVector& x,
                   const std::vector<std::size_t>& subset, double h = FD_STEP);

// Sign patterns of random combinations sum_i c_i * vectors[i], c ~ N(0,1).
// Samples with zero entries are resampled, not counted. Returned sorted.
std::vector<SignVector> mc_orthant_sample(const std::vector<RealVector>& vectors,
                                          std::size_t samples, std::uint64_t seed);

struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

using LocalMapFn = std::function<LocalAffineMap(const MlpNetwork&, const RealVector&,
                                                const std::vector<std::size_t>&)>;

// Cross-checks the analytic machinery against brute force on seeded random
// instances: solver round-trips, preimage membership, pair-orthant counts vs
// Monte-Carlo, local maps vs finite differences, region maps re-verified at
// fresh points. `local_map` is injectable so a deliberately broken
// implementation is caught (and tests prove it). When `net` is given, its
// local maps are spot-checked too.
std::vector<VerifyCheck> verification_suite(std::size_t trials, std::uint64_t seed,
                                            const MlpNetwork* net = nullptr,
                                            const LocalMapFn& local_map = {});

}  // namespace hamming
