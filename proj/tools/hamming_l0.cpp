#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hamming/arrangement.hpp"
#include "hamming/dataio.hpp"
#include "hamming/oracle.hpp"
#include "hamming/pathfollow.hpp"

namespace fs = std::filesystem;
using namespace hamming;

namespace {

fs::path resolve_data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("HAMMING_L0_DATA")) return env;
    throw DataFormatError("no data directory: pass --data-dir or set HAMMING_L0_DATA");
}

int run_coverage(std::size_t m, std::size_t n, std::size_t k, std::uint64_t seed,
                 std::size_t seeds, const std::string& csv) {
    std::vector<CoverageReport> reports;
    double fraction_sum = 0.0;
    for (std::size_t i = 0; i < seeds; ++i) {
        CoverageReport r = coverage_experiment(m, n, k, seed + i);
        fraction_sum += r.fraction;
        std::cout << "seed " << r.seed << ": covered " << r.covered << " / " << r.total
                  << " = " << std::setprecision(6) << r.fraction << "  (independence model "
                  << r.independence_estimate << ", " << std::setprecision(3)
                  << r.elapsed_seconds << "s";
        if (r.degenerate_pairs) std::cout << ", " << r.degenerate_pairs << " perturbed ties";
        std::cout << ")\n";
        reports.push_back(r);
    }
    std::cout << "mean fraction over " << seeds << " seeds: " << std::setprecision(6)
              << fraction_sum / static_cast<double>(seeds) << '\n';
    if (!csv.empty()) {
        write_coverage_csv(csv, reports);
        std::cout << "wrote " << csv << '\n';
    }
    return 0;
}

int run_train(const std::string& data_flag, const TrainConfig& cfg, const std::string& out) {
    const fs::path dir = resolve_data_dir(data_flag);
    LabeledDataset train = load_dataset(dir, "train");
    LabeledDataset test = load_dataset(dir, "t10k");
    std::cout << "loaded " << train.images.size() << " train / " << test.images.size()
              << " test images, dim " << train.dim << '\n';

    MlpNetwork net = train_mlp(train, cfg, [&](std::size_t epoch, double loss, double lr) {
        std::cout << "epoch " << std::setw(3) << epoch + 1 << "/" << cfg.epochs << "  loss "
                  << std::fixed << std::setprecision(6) << loss << "  lr " << lr << '\n'
                  << std::defaultfloat;
    });

    WeightsMeta meta;
    meta.seed = cfg.seed;
    meta.test_accuracy = accuracy(net, test);
    std::cout << "train accuracy " << std::setprecision(6) << accuracy(net, train)
              << ", test accuracy " << meta.test_accuracy << '\n';
    save_weights(out, net, meta);
    std::cout << "wrote " << out << '\n';
    return 0;
}

int run_one_attack(const MlpNetwork& net, const LabeledDataset& train, const RealVector& x,
                   std::size_t image_index, int target, const AttackConfig& cfg,
                   const std::string& out_dir) {
    AttackRunSummary sum = run_attack(net, train, x, target, cfg);
    const AttackResult& res = sum.result;
    std::cout << "class " << sum.source_class << " -> " << sum.target_class << ": "
              << (res.success ? "success" : "FAILED") << ", hamming " << res.hamming
              << ", iterations " << res.iterations << ", restarts " << sum.restarts_used;
    if (!res.success) {
        const char* kind = "?";
        switch (res.failure_kind) {
            case FailureKind::None: kind = "none"; break;
            case FailureKind::Sinkhole: kind = "sinkhole"; break;
            case FailureKind::Reflection: kind = "reflection"; break;
            case FailureKind::Singular: kind = "singular"; break;
            case FailureKind::IterationCap: kind = "iteration_cap"; break;
        }
        std::cout << ", failure " << kind << ", best progress " << std::setprecision(6)
                  << res.progress;
    }
    std::cout << '\n';

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        AttackReport rep;
        rep.source_class = sum.source_class;
        rep.target_class = sum.target_class;
        rep.delta = cfg.delta;
        rep.seed = cfg.seed;
        rep.subset = sum.subset;
        rep.result = res;
        rep.source_input = x;
        rep.target_output = sum.target_output;
        rep.restarts_used = sum.restarts_used;
        const std::string stem =
            "attack_" + std::to_string(image_index) + "_to_" + std::to_string(target);
        write_report(fs::path(out_dir) / (stem + ".json"), rep);
        if (res.success) write_pgm(fs::path(out_dir) / (stem + ".pgm"), res.z);
    }
    return res.success ? 0 : 1;
}

int run_verify(const std::string& weights, std::size_t trials, std::uint64_t seed) {
    std::optional<MlpNetwork> net;
    if (!weights.empty()) net = load_weights(weights);
    std::vector<VerifyCheck> checks =
        verification_suite(trials, seed, net ? &*net : nullptr);
    bool all = true;
    for (const VerifyCheck& c : checks) {
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(22) << c.name
                  << "  " << c.detail << '\n';
        all = all && c.pass;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cell-crossing attacks on ReLU networks with few changed coordinates"};
    app.require_subcommand(1);

    // coverage
    auto* cov = app.add_subcommand("coverage", "orthant coverage of sparse column combinations");
    std::size_t cov_m = 20, cov_n = 250, cov_k = 2, cov_seeds = 5;
    std::uint64_t cov_seed = 1;
    std::string cov_csv;
    cov->add_option("--m", cov_m, "hyperplane count (bitmap is 2^m bits)")
        ->check(CLI::Range(std::size_t(1), COVERAGE_MAX_M));
    cov->add_option("--n", cov_n, "input dimension / column count")->check(CLI::PositiveNumber);
    cov->add_option("--k", cov_k, "sparsity of the combinations")->check(CLI::Range(1, 2));
    cov->add_option("--seed", cov_seed, "base seed, runs use seed..seed+seeds-1");
    cov->add_option("--seeds", cov_seeds, "number of independent runs")->check(CLI::PositiveNumber);
    cov->add_option("--csv", cov_csv, "write per-run rows to this CSV file");

    // train
    auto* tr = app.add_subcommand("train", "train the MNIST classifier");
    std::string tr_data, tr_out = "weights.json";
    TrainConfig tcfg;
    tr->add_option("--data-dir", tr_data, "directory with the IDX files (or HAMMING_L0_DATA)");
    tr->add_option("--width", tcfg.width, "hidden layer width")->check(CLI::PositiveNumber);
    tr->add_option("--epochs", tcfg.epochs, "training epochs")->check(CLI::PositiveNumber);
    tr->add_option("--batch", tcfg.batch, "minibatch size")->check(CLI::PositiveNumber);
    tr->add_option("--lr", tcfg.lr, "initial learning rate")->check(CLI::PositiveNumber);
    tr->add_option("--seed", tcfg.seed, "training seed");
    tr->add_option("--out", tr_out, "weights output path");

    // attack
    auto* at = app.add_subcommand("attack", "drive one image into other classes");
    std::string at_weights, at_data, at_out_dir, at_from = "test", at_subset_mode = "largest-std";
    std::string at_far_side = "ray";
    std::size_t at_index = 0;
    int at_target = -1;
    bool at_all = false;
    AttackConfig acfg;
    at->add_option("--weights", at_weights, "trained weights file")->required();
    at->add_option("--data-dir", at_data, "directory with the IDX files (or HAMMING_L0_DATA)");
    at->add_option("--from", at_from, "which split the source image comes from")
        ->check(CLI::IsMember({"train", "test"}));
    at->add_option("--image-index", at_index, "source image index within the split");
    at->add_option("--target-class", at_target, "single target class");
    at->add_flag("--all-targets", at_all, "attack every class other than the source's");
    at->add_option("--delta", acfg.delta, "spare subset coordinates beyond the output dimension");
    at->add_option("--subset-mode", at_subset_mode, "how the changed pixels are chosen")
        ->check(CLI::IsMember({"largest-std", "random", "user"}));
    at->add_option("--subset", acfg.subset, "pixel indices for --subset-mode user");
    at->add_option("--far-side", at_far_side, "preimage sampling after a crossing")
        ->check(CLI::IsMember({"ray", "line"}));
    at->add_option("--restarts", acfg.restarts, "random restarts per target");
    at->add_option("--max-iters", acfg.max_iters, "iteration cap per restart");
    at->add_option("--seed", acfg.seed, "attack seed");
    at->add_option("--out-dir", at_out_dir, "write JSON reports and PGM images here");

    // verify
    auto* ve = app.add_subcommand("verify", "independent cross-checks of the core numerics");
    std::string ve_weights;
    std::size_t ve_trials = 25;
    std::uint64_t ve_seed = 1;
    ve->add_option("--weights", ve_weights, "also spot-check this trained network");
    ve->add_option("--trials", ve_trials, "instances per check")->check(CLI::PositiveNumber);
    ve->add_option("--seed", ve_seed, "seed for the generated instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cov->parsed()) return run_coverage(cov_m, cov_n, cov_k, cov_seed, cov_seeds, cov_csv);
        if (tr->parsed()) return run_train(tr_data, tcfg, tr_out);
        if (ve->parsed()) return run_verify(ve_weights, ve_trials, ve_seed);

        // attack
        if (!at_all && at_target < 0)
            throw DataFormatError("attack needs --target-class or --all-targets");
        if (at_subset_mode == "largest-std") acfg.subset_mode = SubsetMode::LargestStd;
        else if (at_subset_mode == "random") acfg.subset_mode = SubsetMode::Random;
        else acfg.subset_mode = SubsetMode::UserList;
        acfg.far_side = at_far_side == "ray" ? FarSideMode::Ray : FarSideMode::Line;

        const fs::path dir = resolve_data_dir(at_data);
        MlpNetwork net = load_weights(at_weights);
        LabeledDataset train = load_dataset(dir, "train");
        const LabeledDataset source_set =
            at_from == "train" ? train : load_dataset(dir, "t10k");
        if (at_index >= source_set.images.size())
            throw DataFormatError("--image-index past the end of the " + at_from + " split");
        const RealVector& x = source_set.images[at_index];

        RealVector scores = forward(net, x);
        const int source_class = static_cast<int>(
            std::max_element(scores.begin(), scores.end()) - scores.begin());
        std::cout << "source image " << at_from << "[" << at_index << "], labelled "
                  << source_set.labels[at_index] << ", classified " << source_class << '\n';
        if (!at_out_dir.empty()) {
            fs::create_directories(at_out_dir);
            write_pgm(fs::path(at_out_dir) / ("source_" + std::to_string(at_index) + ".pgm"), x);
        }

        int rc = 0;
        if (at_all) {
            for (int t = 0; t < static_cast<int>(net.output_dim()); ++t) {
                if (t == source_class) continue;
                rc = std::max(rc, run_one_attack(net, train, x, at_index, t, acfg, at_out_dir));
            }
        } else {
            rc = run_one_attack(net, train, x, at_index, at_target, acfg, at_out_dir);
        }
        return rc;
    } catch (const DataFormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
