#pragma once

// Shared helpers for the test binaries: independent reference computations
// and small file fixtures. Everything here is deliberately written with
// plain loops, separate from the library code it checks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "hamming/relunet.hpp"

namespace testsupport {

using hamming::Matrix;
using hamming::MlpNetwork;
using hamming::RealVector;

// Reference forward pass: naive loops, no shared code with the library
// beyond the weight layout.
inline RealVector reference_forward(const MlpNetwork& net, const RealVector& x) {
    RealVector v = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        RealVector next(layer.w.rows, 0.0);
        for (std::size_t i = 0; i < layer.w.rows; ++i) {
            double s = layer.b[i];
            for (std::size_t j = 0; j < layer.w.cols; ++j) s += layer.w.at(i, j) * v[j];
            if (l + 1 < net.layers.size() && s < 0.0) s = 0.0;
            next[i] = s;
        }
        v = std::move(next);
    }
    return v;
}

// Random one-hidden-layer network with He-style scaling.
inline MlpNetwork random_net(std::uint64_t seed, std::size_t in, std::size_t hidden,
                             std::size_t out) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MlpNetwork net;
    net.layers.resize(2);
    net.layers[0].w = Matrix(hidden, in);
    for (double& v : net.layers[0].w.data) v = gauss(rng) / std::sqrt(double(in));
    net.layers[0].b.assign(hidden, 0.0);
    for (double& v : net.layers[0].b) v = 0.1 * gauss(rng);
    net.layers[1].w = Matrix(out, hidden);
    for (double& v : net.layers[1].w.data) v = gauss(rng) / std::sqrt(double(hidden));
    net.layers[1].b.assign(out, 0.0);
    for (double& v : net.layers[1].b) v = 0.1 * gauss(rng);
    return net;
}

inline RealVector random_vector(std::uint64_t seed, std::size_t n, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    RealVector v(n);
    for (double& e : v) e = gauss(rng);
    return v;
}

// Fresh directory under the system temp root, unique per call.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void put_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

// IDX writers mirroring the classic image/label layouts.
inline void write_idx_images(const std::filesystem::path& path,
                             const std::vector<std::vector<unsigned char>>& images,
                             std::uint32_t rows, std::uint32_t cols,
                             std::uint32_t magic = 2051) {
    std::ofstream out(path, std::ios::binary);
    put_be32(out, magic);
    put_be32(out, static_cast<std::uint32_t>(images.size()));
    put_be32(out, rows);
    put_be32(out, cols);
    for (const auto& img : images)
        out.write(reinterpret_cast<const char*>(img.data()), std::streamsize(img.size()));
}

inline void write_idx_labels(const std::filesystem::path& path,
                             const std::vector<unsigned char>& labels,
                             std::uint32_t magic = 2049) {
    std::ofstream out(path, std::ios::binary);
    put_be32(out, magic);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
}

}  // namespace testsupport
