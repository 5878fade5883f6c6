#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hamming/linalg.hpp"

namespace hamming {

// Fully-connected layer, weights stored out x in.
struct Layer {
    Matrix w;
    RealVector b;
};

// ReLU after every layer except the last; outputs are raw scores.
struct MlpNetwork {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
    std::size_t hidden_count() const;  // total hidden units across layers

    // Throws std::invalid_argument on dimension-chain breaks or non-finite weights.
    void validate() const;
};

// Pre-activations with magnitude <= this count as "on a boundary".
inline constexpr double ACTIVATION_BOUNDARY_TOL = 1e-12;

// First-crossing candidates within this of the minimum are a tie, resolved by
// lexicographically smallest (layer, unit).
inline constexpr double STEP_TIE_TOL = 1e-10;

RealVector forward(const MlpNetwork& net, const RealVector& x);

// One bit vector per hidden layer, 1 = unit active (pre-activation > 0).
using ActivationPattern = std::vector<std::vector<std::uint8_t>>;

// Throws OnBoundaryError(layer, unit) when a pre-activation is within
// ACTIVATION_BOUNDARY_TOL of zero.
ActivationPattern activation_pattern(const MlpNetwork& net, const RealVector& x);

// Exact affine behaviour of the network at x restricted to the coordinates in
// `subset`: for perturbations e supported on the subset and small enough to
// keep the pattern fixed, forward(x + e) = c + a * e_subset.
struct LocalAffineMap {
    std::vector<std::size_t> subset;
    Matrix a;                  // output_dim x subset.size()
    RealVector c;              // forward(x)
    ActivationPattern pattern;
};

LocalAffineMap local_affine_map(const MlpNetwork& net, const RealVector& x,
                                const std::vector<std::size_t>& subset);

struct BoundaryHit {
    double tau = 0.0;
    std::size_t layer = 0;  // hidden layer index, 0-based
    std::size_t unit = 0;
};

// Smallest tau in (0, tau_max] where some hidden pre-activation of
// x + tau * dir reaches zero, computed from the exact piecewise-linear cascade
// at x's activation pattern (exact for the first crossing). nullopt when no
// unit crosses within tau_max.
std::optional<BoundaryHit> step_to_boundary(const MlpNetwork& net, const RealVector& x,
                                            const RealVector& dir, double tau_max);

struct TrainConfig {
    std::size_t width = 256;
    std::size_t epochs = 200;
    double lr = 0.1;
    std::size_t batch = 64;
    std::uint64_t seed = 1;
    double lr_decay = 0.5;
    std::size_t decay_every = 50;   // epochs between decays
    std::size_t classes = 0;        // 0 = max label + 1
};

struct LabeledDataset {
    std::vector<RealVector> images;  // values in [0, 1]
    std::vector<int> labels;
    std::size_t dim = 0;
};

// Plain SGD with softmax cross-entropy, He-initialised single hidden layer,
// halving learning rate every decay_every epochs. Single-threaded and
// bit-reproducible for a fixed seed. Reports mean epoch loss via on_epoch.
MlpNetwork train_mlp(const LabeledDataset& train, const TrainConfig& cfg,
                     const std::function<void(std::size_t, double, double)>& on_epoch = {});

// Mean loss and parameter gradients over an index batch; the exact quantity
// train_mlp descends, exposed so tests can difference it.
double batch_loss_grad(const MlpNetwork& net, const LabeledDataset& data,
                       const std::vector<std::size_t>& batch, std::vector<Layer>& grads);

double accuracy(const MlpNetwork& net, const LabeledDataset& data);

// Indices of the `count` coordinates with the largest per-coordinate standard
// deviation over the dataset, ties to the lower index, returned ascending.
std::vector<std::size_t> select_pixels(const LabeledDataset& data, std::size_t count);

}  // namespace hamming
