#include "hamming/dataio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hamming/arrangement.hpp"

namespace hamming {

namespace {

using nlohmann::json;

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError("cannot open " + path.string());
    return in;
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw TruncatedFileError(path.string() + ": truncated header");
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

LabeledDataset load_idx_images(const std::filesystem::path& path) {
    std::ifstream in = open_binary(path);
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 2051)
        throw BadMagicError(path.string() + ": magic " + std::to_string(magic) +
                            ", expected 2051 (idx3-ubyte images)");
    const std::uint32_t count = read_be32(in, path);
    const std::uint32_t rows = read_be32(in, path);
    const std::uint32_t cols = read_be32(in, path);
    if (rows == 0 || cols == 0 || count == 0)
        throw DataFormatError(path.string() + ": empty image file");

    LabeledDataset ds;
    ds.dim = std::size_t(rows) * cols;
    ds.images.resize(count);
    std::vector<unsigned char> raw(ds.dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
            throw TruncatedFileError(path.string() + ": truncated at image " + std::to_string(i));
        RealVector& img = ds.images[i];
        img.resize(ds.dim);
        for (std::size_t j = 0; j < ds.dim; ++j) img[j] = raw[j] / 255.0;
    }
    return ds;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    std::ifstream in = open_binary(path);
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 2049)
        throw BadMagicError(path.string() + ": magic " + std::to_string(magic) +
                            ", expected 2049 (idx1-ubyte labels)");
    const std::uint32_t count = read_be32(in, path);
    std::vector<unsigned char> raw(count);
    if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
        throw TruncatedFileError(path.string() + ": truncated label data");
    return {raw.begin(), raw.end()};
}

LabeledDataset load_dataset(const std::filesystem::path& dir, const std::string& prefix) {
    LabeledDataset ds = load_idx_images(dir / (prefix + "-images-idx3-ubyte"));
    std::vector<int> labels = load_idx_labels(dir / (prefix + "-labels-idx1-ubyte"));
    if (labels.size() != ds.images.size())
        throw DimensionMismatchError(prefix + ": " + std::to_string(ds.images.size()) +
                                     " images vs " + std::to_string(labels.size()) + " labels");
    ds.labels = std::move(labels);
    return ds;
}

void save_weights(const std::filesystem::path& path, const MlpNetwork& net,
                  const WeightsMeta& meta) {
    net.validate();
    json j;
    j["meta"] = {{"seed", meta.seed}, {"test_accuracy", meta.test_accuracy}};
    j["layers"] = json::array();
    for (const Layer& layer : net.layers) {
        j["layers"].push_back({{"rows", layer.w.rows},
                               {"cols", layer.w.cols},
                               {"weights", layer.w.data},
                               {"biases", layer.b}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw DataFormatError("write failed for " + path.string());
}

MlpNetwork load_weights(const std::filesystem::path& path, WeightsMeta* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array() ||
            j["layers"].empty())
            throw SchemaError(path.string() + ": missing or empty layers array");
        MlpNetwork net;
        for (const json& jl : j["layers"]) {
            Layer layer;
            const std::size_t rows = jl.at("rows").get<std::size_t>();
            const std::size_t cols = jl.at("cols").get<std::size_t>();
            layer.w = Matrix(rows, cols);
            layer.w.data = jl.at("weights").get<std::vector<double>>();
            layer.b = jl.at("biases").get<std::vector<double>>();
            if (layer.w.data.size() != rows * cols || layer.b.size() != rows)
                throw SchemaError(path.string() + ": layer payload does not match rows/cols");
            net.layers.push_back(std::move(layer));
        }
        net.validate();
        if (meta) {
            *meta = WeightsMeta{};
            if (j.contains("meta")) {
                meta->seed = j["meta"].value("seed", std::uint64_t(0));
                meta->test_accuracy = j["meta"].value("test_accuracy", 0.0);
            }
        }
        return net;
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {  // validate() rejected the shape
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_report(const std::filesystem::path& path, const AttackReport& report) {
    json j;
    j["source_class"] = report.source_class;
    j["target_class"] = report.target_class;
    j["delta"] = report.delta;
    j["seed"] = report.seed;
    j["subset_indices"] = report.subset;
    j["success"] = report.result.success;
    j["hamming"] = report.result.hamming;
    j["iterations"] = report.result.iterations;
    j["restarts_used"] = report.restarts_used;
    j["progress"] = report.result.progress;
    j["final_output"] = report.result.final_output;
    j["target_output"] = report.target_output;
    switch (report.result.failure_kind) {
        case FailureKind::None: j["failure"] = "none"; break;
        case FailureKind::Sinkhole: j["failure"] = "sinkhole"; break;
        case FailureKind::Reflection: j["failure"] = "reflection"; break;
        case FailureKind::Singular: j["failure"] = "singular"; break;
        case FailureKind::IterationCap: j["failure"] = "iteration_cap"; break;
    }
    j["perturbation"] = json::array();
    if (report.result.success && report.result.z.size() == report.source_input.size()) {
        for (std::size_t i = 0; i < report.result.z.size(); ++i) {
            if (report.result.z[i] != report.source_input[i])
                j["perturbation"].push_back(
                    {{"index", i}, {"old", report.source_input[i]}, {"new", report.result.z[i]}});
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot write " + path.string());
    out << std::setprecision(17) << j.dump(2) << '\n';
    if (!out) throw DataFormatError("write failed for " + path.string());
}

void write_pgm(const std::filesystem::path& path, const RealVector& image, std::size_t width,
               std::size_t height) {
    if (image.size() != width * height)
        throw DimensionMismatchError("write_pgm: image size " + std::to_string(image.size()) +
                                     " != " + std::to_string(width) + "x" + std::to_string(height));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError("cannot write " + path.string());
    out << "P5\n" << width << ' ' << height << "\n255\n";
    for (double v : image) {
        const double clamped = std::min(1.0, std::max(0.0, v));
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
    }
    if (!out) throw DataFormatError("write failed for " + path.string());
}

void write_coverage_csv(const std::filesystem::path& path,
                        const std::vector<CoverageReport>& reports) {
    std::ofstream out(path);
    if (!out) throw DataFormatError("cannot write " + path.string());
    out << "m,n,k,seed,covered,total,fraction,independence_estimate,degenerate_pairs,elapsed_seconds\n";
    out << std::setprecision(17);
    for (const CoverageReport& r : reports) {
        out << r.m << ',' << r.n << ',' << r.k << ',' << r.seed << ',' << r.covered << ','
            << r.total << ',' << r.fraction << ',' << r.independence_estimate << ','
            << r.degenerate_pairs << ',' << r.elapsed_seconds << '\n';
    }
    if (!out) throw DataFormatError("write failed for " + path.string());
}

}  // namespace hamming
