#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hamming/pathfollow.hpp"
#include "support.hpp"

using namespace hamming;
using testsupport::random_net;
using testsupport::random_vector;

namespace {

double dist_inf(const RealVector& a, const RealVector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

double dist2(const RealVector& a, const RealVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// instance generator shared by the walk tests: net, two interior points
struct Instance {
    MlpNetwork net;
    RealVector x, y;
};

// slice > 0 draws y inside the slice spanned by the first `slice` input
// coordinates of x, so a point matching the target output is known to exist
Instance make_instance(std::uint64_t seed, std::size_t in = 10, std::size_t hidden = 12,
                       std::size_t out = 3, std::size_t slice = 0) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        Instance inst;
        inst.net = random_net(seed * 1000 + attempt, in, hidden, out);
        inst.x = random_vector(seed * 1000 + attempt + 500000, in);
        inst.y = random_vector(seed * 1000 + attempt + 900000, in);
        if (slice > 0)
            for (std::size_t j = slice; j < in; ++j) inst.y[j] = inst.x[j];
        try {
            activation_pattern(inst.net, inst.x);
            activation_pattern(inst.net, inst.y);
            build_path(inst.net, inst.x, inst.y);
            return inst;
        } catch (const OnBoundaryError&) {
        } catch (const DegenerateSegmentError&) {
        }
    }
}

}  // namespace

TEST_CASE("build_path starts and ends at the segment's outputs") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Instance inst = make_instance(seed);
        OutputPath path = build_path(inst.net, inst.x, inst.y);

        REQUIRE(path.vertices.size() >= 2);
        REQUIRE(path.alphas.size() == path.vertices.size());
        REQUIRE(path.prefix_len.size() == path.vertices.size());

        CHECK(path.alphas.front() == 0.0);
        CHECK(path.alphas.back() == 1.0);
        CHECK(dist_inf(path.vertices.front(), forward(inst.net, inst.x)) <= 1e-12);
        CHECK(dist_inf(path.vertices.back(), forward(inst.net, inst.y)) <= 1e-12);

        for (std::size_t i = 1; i < path.alphas.size(); ++i)
            CHECK(path.alphas[i] > path.alphas[i - 1]);
    }
}

TEST_CASE("build_path prefix lengths accumulate the segment distances") {
    Instance inst = make_instance(3);
    OutputPath path = build_path(inst.net, inst.x, inst.y);
    CHECK(path.prefix_len.front() == 0.0);
    for (std::size_t i = 1; i < path.vertices.size(); ++i) {
        const double seg = dist2(path.vertices[i], path.vertices[i - 1]);
        CHECK(path.prefix_len[i] - path.prefix_len[i - 1] == doctest::Approx(seg).epsilon(1e-12));
        CHECK(seg > 0.0);
    }
    CHECK(path.arc_length == path.prefix_len.back());
    CHECK(path.arc_length > 0.0);
}

TEST_CASE("the output curve is linear between consecutive path vertices") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        Instance inst = make_instance(seed + 40);
        OutputPath path = build_path(inst.net, inst.x, inst.y);
        for (std::size_t i = 1; i < path.vertices.size(); ++i) {
            const double mid = 0.5 * (path.alphas[i - 1] + path.alphas[i]);
            RealVector p(inst.x.size());
            for (std::size_t j = 0; j < p.size(); ++j)
                p[j] = inst.x[j] + mid * (inst.y[j] - inst.x[j]);
            RealVector out = forward(inst.net, p);
            double scale = 1.0;
            for (double v : out) scale = std::max(scale, std::fabs(v));
            for (std::size_t d = 0; d < out.size(); ++d) {
                const double expect = 0.5 * (path.vertices[i - 1][d] + path.vertices[i][d]);
                CHECK(std::fabs(out[d] - expect) <= 1e-8 * scale);
            }
        }
    }
}

TEST_CASE("build_path rejects degenerate segments") {
    Instance inst = make_instance(9);
    CHECK_THROWS_AS(build_path(inst.net, inst.x, inst.x), DegenerateSegmentError);
}

TEST_CASE("follow_basic only touches the subset and hits the target when it succeeds") {
    AttackConfig cfg;
    int successes = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Instance inst = make_instance(seed + 100);
        std::vector<std::size_t> subset = {0, 1, 2};  // |subset| == output_dim
        AttackResult res = follow_basic(inst.net, inst.x, inst.y, subset, cfg);
        if (!res.success) {
            CHECK(res.failure_kind != FailureKind::None);
            continue;
        }
        ++successes;
        CHECK(res.failure_kind == FailureKind::None);
        CHECK(res.hamming <= subset.size());
        CHECK(dist_inf(res.final_output, forward(inst.net, inst.y)) <= 1e-6);
        CHECK(res.final_output == forward(inst.net, res.z));
        for (std::size_t j = 3; j < inst.x.size(); ++j)
            CHECK(res.z[j] == inst.x[j]);  // untouched coordinates are bit-identical
    }
    CHECK(successes > 0);
}

TEST_CASE("follow_improved succeeds on most instances and is bit-reproducible") {
    AttackConfig cfg;
    cfg.delta = 1;
    cfg.seed = 4242;
    cfg.epsilon_target = 1e-6;  // absolute, to match the assertion below
    int successes = 0;
    const int total = 40;
    for (std::uint64_t seed = 1; seed <= total; ++seed) {
        Instance inst = make_instance(seed + 200, 10, 12, 3, 4);  // solvable by construction
        std::vector<std::size_t> subset = {0, 1, 2, 3};  // output_dim + delta
        AttackResult res = follow_improved(inst.net, inst.x, inst.y, subset, cfg);
        AttackResult res2 = follow_improved(inst.net, inst.x, inst.y, subset, cfg);
        CHECK(res.success == res2.success);
        CHECK(res.iterations == res2.iterations);
        CHECK(res.z == res2.z);

        if (!res.success) continue;
        ++successes;
        CHECK(res.hamming <= 4);
        CHECK(dist_inf(res.final_output, forward(inst.net, inst.y)) <= 1e-6);
        for (std::size_t j = 4; j < inst.x.size(); ++j) CHECK(res.z[j] == inst.x[j]);
    }
    CHECK(successes >= (total * 3) / 4);
}

TEST_CASE("reflection failures of the square walk dissolve with a spare coordinate") {
    AttackConfig cfg;
    cfg.seed = 7;
    int reflections = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        Instance inst = make_instance(seed + 300);
        AttackResult basic = follow_basic(inst.net, inst.x, inst.y, {0, 1, 2}, cfg);
        if (basic.failure_kind != FailureKind::Reflection) continue;
        ++reflections;
        AttackConfig icfg = cfg;
        icfg.delta = 1;
        AttackResult improved = follow_improved(inst.net, inst.x, inst.y, {0, 1, 2, 3}, icfg);
        const bool resolved =
            improved.success || improved.failure_kind == FailureKind::Sinkhole;
        CHECK(resolved);
    }
    INFO("reflection failures seen: " << reflections);
}

TEST_CASE("iteration caps surface as explicit failures") {
    Instance inst = make_instance(17);
    AttackConfig cfg;
    cfg.delta = 1;
    cfg.max_iters = 1;
    AttackResult res = follow_improved(inst.net, inst.x, inst.y, {0, 1, 2, 3}, cfg);
    if (!res.success) {  // one step can finish only on trivial paths
        CHECK(res.failure_kind != FailureKind::None);
        CHECK(res.iterations <= 1);
    }
}

TEST_CASE("subset validation rejects bad index lists") {
    Instance inst = make_instance(21);
    AttackConfig cfg;
    CHECK_THROWS_AS(follow_basic(inst.net, inst.x, inst.y, {0, 1}, cfg),
                    std::invalid_argument);  // needs output_dim entries
    CHECK_THROWS_AS(follow_basic(inst.net, inst.x, inst.y, {0, 1, 99}, cfg),
                    std::invalid_argument);  // out of range
    CHECK_THROWS_AS(follow_basic(inst.net, inst.x, inst.y, {0, 1, 1}, cfg),
                    std::invalid_argument);  // duplicate
    cfg.delta = 2;
    CHECK_THROWS_AS(follow_improved(inst.net, inst.x, inst.y, {0, 1, 2, 3}, cfg),
                    std::invalid_argument);  // needs output_dim + delta entries
}

TEST_CASE("recorded traces carry the walk history") {
    AttackConfig cfg;
    cfg.delta = 1;
    cfg.record_trace = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Instance inst = make_instance(seed + 400);
        AttackResult res = follow_improved(inst.net, inst.x, inst.y, {0, 1, 2, 3}, cfg);
        if (!res.success) continue;
        REQUIRE(!res.trace.steps.empty());
        CHECK(res.trace.steps.front().event == TraceEvent::Start);
        CHECK(res.trace.steps.front().progress == 0.0);
        CHECK(res.trace.input_length > 0.0);
        // progress snapshots never exceed the full arc length
        OutputPath path = build_path(inst.net, inst.x, inst.y);
        for (const TraceStep& s : res.trace.steps)
            CHECK(s.progress <= path.arc_length * (1.0 + 1e-9));
        return;
    }
    FAIL("no traced success found");
}

TEST_CASE("run_attack drives a trained classifier into every other class") {
    // six dimensions, classes separated in the first two
    std::mt19937_64 rng(55);
    std::normal_distribution<double> noise(0.0, 0.25);
    LabeledDataset train;
    train.dim = 6;
    for (int i = 0; i < 300; ++i) {
        const int label = i % 3;
        RealVector v(6);
        for (double& e : v) e = noise(rng);
        if (label == 1) v[0] += 1.5;
        if (label == 2) v[1] += 1.5;
        train.images.push_back(v);
        train.labels.push_back(label);
    }
    TrainConfig tcfg;
    tcfg.width = 10;
    tcfg.epochs = 40;
    tcfg.batch = 20;
    tcfg.lr = 0.05;
    tcfg.seed = 2;
    MlpNetwork net = train_mlp(train, tcfg);
    REQUIRE(accuracy(net, train) >= 0.9);

    RealVector x = train.images[0];  // class 0 example
    RealVector scores = forward(net, x);
    const int source = int(std::max_element(scores.begin(), scores.end()) - scores.begin());
    REQUIRE(source == 0);

    AttackConfig cfg;
    cfg.delta = 1;
    cfg.seed = 11;
    cfg.restarts = 64;
    for (int target = 1; target <= 2; ++target) {
        AttackRunSummary sum = run_attack(net, train, x, target, cfg);
        CHECK(sum.source_class == 0);
        CHECK(sum.target_class == target);
        REQUIRE(sum.subset.size() == net.output_dim() + cfg.delta);
        CHECK(sum.target_output == forward(net, sum.target_input));

        REQUIRE(sum.result.success);
        CHECK(sum.result.hamming <= sum.subset.size());
        CHECK(dist_inf(sum.result.final_output, sum.target_output) <= 1e-6);
        RealVector adv_scores = sum.result.final_output;
        const int cls =
            int(std::max_element(adv_scores.begin(), adv_scores.end()) - adv_scores.begin());
        CHECK(cls == target);

        // coordinates off the subset stay bit-identical
        std::vector<bool> in_subset(6, false);
        for (std::size_t j : sum.subset) in_subset[j] = true;
        for (std::size_t j = 0; j < 6; ++j)
            if (!in_subset[j]) CHECK(sum.result.z[j] == x[j]);

        // bit-identical rerun
        AttackRunSummary again = run_attack(net, train, x, target, cfg);
        CHECK(again.result.z == sum.result.z);
        CHECK(again.result.iterations == sum.result.iterations);
        CHECK(again.restarts_used == sum.restarts_used);
    }
}

TEST_CASE("run_attack subset modes pick the promised coordinates") {
    std::mt19937_64 rng(56);
    std::normal_distribution<double> noise(0.0, 0.2);
    LabeledDataset train;
    train.dim = 5;
    for (int i = 0; i < 120; ++i) {
        const int label = i % 2;
        RealVector v(5, 0.0);
        v[0] = noise(rng) + (label ? 1.0 : -1.0);
        v[1] = noise(rng);
        v[2] = 2.5 * noise(rng);  // widest spread after v[0]'s label split
        train.images.push_back(v);
        train.labels.push_back(label);
    }
    TrainConfig tcfg;
    tcfg.width = 6;
    tcfg.epochs = 30;
    tcfg.batch = 12;
    tcfg.lr = 0.05;
    tcfg.seed = 3;
    MlpNetwork net = train_mlp(train, tcfg);

    AttackConfig cfg;
    cfg.delta = 1;
    cfg.restarts = 32;
    cfg.subset_mode = SubsetMode::UserList;
    cfg.subset = {0, 2, 4};
    AttackRunSummary sum = run_attack(net, train, train.images[0], 1, cfg);
    CHECK(sum.subset == std::vector<std::size_t>{0, 2, 4});

    cfg.subset_mode = SubsetMode::LargestStd;
    cfg.subset.clear();
    sum = run_attack(net, train, train.images[0], 1, cfg);
    CHECK(sum.subset == select_pixels(train, 3));

    cfg.subset_mode = SubsetMode::Random;
    cfg.seed = 99;
    sum = run_attack(net, train, train.images[0], 1, cfg);
    REQUIRE(sum.subset.size() == 3);
    for (std::size_t j = 1; j < sum.subset.size(); ++j)
        CHECK(sum.subset[j] > sum.subset[j - 1]);  // sorted, distinct
    CHECK(sum.subset.back() < 5);
}
