#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hamming/arrangement.hpp"
#include "hamming/pathfollow.hpp"
#include "hamming/relunet.hpp"

namespace hamming {

// IDX image/label readers. Pixels are normalized to [0, 1].
LabeledDataset load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);

// Reads <prefix>-images-idx3-ubyte / <prefix>-labels-idx1-ubyte from dir
// and attaches the labels to the returned dataset.
LabeledDataset load_dataset(const std::filesystem::path& dir, const std::string& prefix);

struct WeightsMeta {
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;
};

void save_weights(const std::filesystem::path& path, const MlpNetwork& net,
                  const WeightsMeta& meta);
MlpNetwork load_weights(const std::filesystem::path& path, WeightsMeta* meta = nullptr);

struct AttackReport {
    int source_class = -1;
    int target_class = -1;
    std::size_t delta = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> subset;
    AttackResult result;
    RealVector source_input;
    RealVector target_output;
    std::size_t restarts_used = 0;
};

void write_report(const std::filesystem::path& path, const AttackReport& report);

// 8-bit binary PGM; values are clamped to [0, 1] then scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const RealVector& image,
               std::size_t width = 28, std::size_t height = 28);

void write_coverage_csv(const std::filesystem::path& path,
                        const std::vector<CoverageReport>& reports);

}  // namespace hamming
