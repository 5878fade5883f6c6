#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hamming/oracle.hpp"
#include "support.hpp"

using namespace hamming;
using testsupport::random_net;
using testsupport::random_vector;

TEST_CASE("fd_jacobian recovers hand-computed affine coefficients") {
    // all units strongly active at the origin: f(x) = 2 x0 + 3 x1 + 50
    MlpNetwork net;
    net.layers.resize(2);
    net.layers[0].w = Matrix(2, 2);
    net.layers[0].w.data = {1, 0, 0, 1};
    net.layers[0].b = {10, 10};
    net.layers[1].w = Matrix(1, 2);
    net.layers[1].w.data = {2, 3};
    net.layers[1].b = {0};

    Matrix jac = fd_jacobian(net, {0, 0}, {0, 1});
    REQUIRE(jac.rows == 1);
    REQUIRE(jac.cols == 2);
    CHECK(jac.at(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(jac.at(0, 1) == doctest::Approx(3.0).epsilon(1e-6));

    Matrix sub = fd_jacobian(net, {0, 0}, {1});
    REQUIRE(sub.cols == 1);
    CHECK(sub.at(0, 0) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("fd_jacobian refuses probes that straddle a boundary") {
    // single unit with pre-activation x - 1
    MlpNetwork net;
    net.layers.resize(2);
    net.layers[0].w = Matrix(1, 1);
    net.layers[0].w.data = {1};
    net.layers[0].b = {-1};
    net.layers[1].w = Matrix(1, 1);
    net.layers[1].w.data = {1};
    net.layers[1].b = {0};

    // the +h probe flips the unit on
    CHECK_THROWS_AS(fd_jacobian(net, {1.0 - 0.5 * FD_STEP}, {0}), BoundaryTooCloseError);
    // well inside the inactive region both probes are fine
    Matrix jac = fd_jacobian(net, {0.5}, {0});
    CHECK(jac.at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("mc_orthant_sample on one vector finds exactly the two orientations") {
    std::vector<SignVector> got = mc_orthant_sample({{1.0, -2.0, 3.0}}, 500, 9);
    REQUIRE(got.size() == 2);
    std::set<SignVector> s(got.begin(), got.end());
    CHECK(s.count({1, -1, 1}) == 1);
    CHECK(s.count({-1, 1, -1}) == 1);
    CHECK(std::is_sorted(got.begin(), got.end()));
}

TEST_CASE("mc_orthant_sample stays inside the enumerated pair orthants") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RealVector g = random_vector(seed, 6);
        RealVector h = random_vector(seed + 40, 6);
        PairOrthants po;
        try {
            po = orthants_of_pair(g, h);
        } catch (const DegeneratePairError&) {
            continue;
        }
        std::set<SignVector> allowed(po.orthants.begin(), po.orthants.end());
        std::vector<SignVector> got = mc_orthant_sample({g, h}, 5000, seed);
        CHECK(got.size() <= 2 * 6);
        for (const SignVector& s : got) CHECK(allowed.count(s) == 1);
        // plenty of samples: expect most of the 12 orthants to show up
        CHECK(got.size() >= 8);
    }
}

TEST_CASE("enumerate_regions respects the arrangement cell bound") {
    MlpNetwork net = random_net(31, 4, 6, 2);
    RegionCatalog cat = enumerate_regions(net, REGION_BOX_RADIUS, 4000, 17);
    CHECK(!cat.regions.empty());
    CHECK(cat.regions.size() <= max_cells(6, 4));

    std::set<ActivationPattern> seen;
    for (const RegionRecord& rec : cat.regions) {
        CHECK(seen.insert(rec.pattern).second);  // all patterns distinct
        CHECK(activation_pattern(net, rec.witness) == rec.pattern);
        CHECK(rec.map.c == forward(net, rec.witness));
        CHECK(rec.map.a.rows == net.output_dim());
        CHECK(rec.map.a.cols == net.input_dim());
    }
}

TEST_CASE("enumerate_regions is deterministic and respects the hidden-unit cap") {
    MlpNetwork net = random_net(32, 3, 5, 2);
    RegionCatalog a = enumerate_regions(net, 5.0, 1500, 3);
    RegionCatalog b = enumerate_regions(net, 5.0, 1500, 3);
    REQUIRE(a.regions.size() == b.regions.size());
    for (std::size_t i = 0; i < a.regions.size(); ++i) {
        CHECK(a.regions[i].pattern == b.regions[i].pattern);
        CHECK(a.regions[i].witness == b.regions[i].witness);
    }

    MlpNetwork wide = random_net(33, 3, REGION_MAX_HIDDEN + 1, 2);
    CHECK_THROWS_AS(enumerate_regions(wide, 5.0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(enumerate_regions(net, -1.0, 10, 1), std::invalid_argument);
}

TEST_CASE("verification_suite passes on the real implementation") {
    std::vector<VerifyCheck> checks = verification_suite(10, 2024);
    REQUIRE(!checks.empty());
    for (const VerifyCheck& c : checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.pass);
    }
}

TEST_CASE("verification_suite spot-checks a provided network") {
    MlpNetwork net = random_net(77, 12, 10, 3);
    std::vector<VerifyCheck> checks = verification_suite(8, 5, &net);
    bool found = false;
    for (const VerifyCheck& c : checks)
        if (c.name == "network_local_maps") {
            found = true;
            CHECK(c.pass);
        }
    CHECK(found);
}

TEST_CASE("verification_suite catches a deliberately broken local map") {
    LocalMapFn broken = [](const MlpNetwork& net, const RealVector& x,
                           const std::vector<std::size_t>& subset) {
        LocalAffineMap lam = local_affine_map(net, x, subset);
        for (double& v : lam.a.data) v *= 1.01;  // one percent skew
        return lam;
    };
    std::vector<VerifyCheck> checks = verification_suite(10, 2024, nullptr, broken);
    bool caught = false;
    for (const VerifyCheck& c : checks)
        if (c.name == "local_map_vs_fd") caught = !c.pass;
    CHECK(caught);
}
