#include "hamming/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace hamming {

RegionCatalog enumerate_regions(const MlpNetwork& net, double box_radius,
                                std::size_t samples, std::uint64_t seed) {
    net.validate();
    if (net.hidden_count() > REGION_MAX_HIDDEN)
        throw std::invalid_argument("enumerate_regions: more than " +
                                    std::to_string(REGION_MAX_HIDDEN) + " hidden units");
    if (!(box_radius > 0.0)) throw std::invalid_argument("enumerate_regions: box_radius must be positive");

    std::vector<std::size_t> all(net.input_dim());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-box_radius, box_radius);
    RegionCatalog cat;
    std::map<ActivationPattern, std::size_t> seen;
    RealVector x(net.input_dim());
    for (std::size_t i = 0; i < samples; ++i) {
        for (double& v : x) v = uni(rng);
        ActivationPattern pat;
        try {
            pat = activation_pattern(net, x);
        } catch (const OnBoundaryError&) {
            continue;
        }
        if (seen.emplace(pat, cat.regions.size()).second) {
            RegionRecord rec;
            rec.pattern = std::move(pat);
            rec.witness = x;
            rec.map = local_affine_map(net, x, all);
            cat.regions.push_back(std::move(rec));
        }
    }
    return cat;
}

Matrix fd_jacobian(const MlpNetwork& net, const RealVector& x,
                   const std::vector<std::size_t>& subset, double h) {
    net.validate();
    if (!(h > 0.0)) throw std::invalid_argument("fd_jacobian: h must be positive");
    for (std::size_t j : subset)
        if (j >= net.input_dim()) throw std::invalid_argument("fd_jacobian: subset index out of range");

    const ActivationPattern center = activation_pattern(net, x);
    Matrix jac(net.output_dim(), subset.size());
    RealVector probe = x;
    for (std::size_t j = 0; j < subset.size(); ++j) {
        const std::size_t c = subset[j];
        probe[c] = x[c] + h;
        if (activation_pattern(net, probe) != center)
            throw BoundaryTooCloseError("fd_jacobian: +h probe crosses a boundary at coordinate " +
                                        std::to_string(c));
        RealVector fp = forward(net, probe);
        probe[c] = x[c] - h;
        if (activation_pattern(net, probe) != center)
            throw BoundaryTooCloseError("fd_jacobian: -h probe crosses a boundary at coordinate " +
                                        std::to_string(c));
        RealVector fm = forward(net, probe);
        probe[c] = x[c];
        for (std::size_t i = 0; i < jac.rows; ++i) jac.at(i, j) = (fp[i] - fm[i]) / (2.0 * h);
    }
    return jac;
}

std::vector<SignVector> mc_orthant_sample(const std::vector<RealVector>& vectors,
                                          std::size_t samples, std::uint64_t seed) {
    if (vectors.empty()) throw std::invalid_argument("mc_orthant_sample: no vectors");
    const std::size_t m = vectors.front().size();
    for (const RealVector& v : vectors)
        if (v.size() != m) throw std::invalid_argument("mc_orthant_sample: ragged vectors");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::set<SignVector> seen;
    RealVector combo(m);
    const std::size_t attempt_cap = samples * 100 + 1000;
    std::size_t attempts = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        bool clean = false;
        SignVector s(m);
        while (!clean) {
            if (++attempts > attempt_cap)
                throw std::invalid_argument("mc_orthant_sample: every combination hits an axis");
            std::fill(combo.begin(), combo.end(), 0.0);
            for (const RealVector& v : vectors) {
                const double c = gauss(rng);
                for (std::size_t d = 0; d < m; ++d) combo[d] += c * v[d];
            }
            clean = true;
            for (std::size_t d = 0; d < m; ++d) {
                if (combo[d] == 0.0) {
                    clean = false;
                    break;
                }
                s[d] = combo[d] > 0.0 ? 1 : -1;
            }
        }
        seen.insert(s);
    }
    return {seen.begin(), seen.end()};
}

namespace {

MlpNetwork random_tiny_net(std::mt19937_64& rng, std::size_t in, std::size_t hidden,
                           std::size_t out) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    MlpNetwork net;
    net.layers.resize(2);
    net.layers[0].w = Matrix(hidden, in);
    for (double& v : net.layers[0].w.data) v = gauss(rng) / std::sqrt(static_cast<double>(in));
    net.layers[0].b.assign(hidden, 0.0);
    for (double& v : net.layers[0].b) v = 0.1 * gauss(rng);
    net.layers[1].w = Matrix(out, hidden);
    for (double& v : net.layers[1].w.data) v = gauss(rng) / std::sqrt(static_cast<double>(hidden));
    net.layers[1].b.assign(out, 0.0);
    for (double& v : net.layers[1].b) v = 0.1 * gauss(rng);
    return net;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

std::vector<VerifyCheck> verification_suite(std::size_t trials, std::uint64_t seed,
                                            const MlpNetwork* net, const LocalMapFn& local_map_in) {
    if (trials == 0) throw std::invalid_argument("verification_suite: trials must be >= 1");
    const LocalMapFn local_map = local_map_in
        ? local_map_in
        : LocalMapFn([](const MlpNetwork& n, const RealVector& x,
                        const std::vector<std::size_t>& sub) { return local_affine_map(n, x, sub); });

    std::vector<VerifyCheck> out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    {  // square solves land back on the right-hand side
        double worst = 0.0;
        for (std::size_t tr = 0; tr < trials; ++tr) {
            const std::size_t n = 2 + tr % 7;
            Matrix a(n, n);
            for (double& v : a.data) v = gauss(rng);
            RealVector b(n);
            for (double& v : b) v = gauss(rng);
            try {
                RealVector x = solve_square(a, b);
                RealVector r = matvec(a, x);
                for (std::size_t i = 0; i < n; ++i)
                    worst = std::max(worst, std::fabs(r[i] - b[i]) / (1.0 + inf_norm(b)));
            } catch (const SingularMatrixError&) {
            }
        }
        out.push_back({"solver_roundtrip", worst <= RESIDUAL_TOL,
                       "worst relative residual " + fmt(worst)});
    }

    {  // every point of the preimage family maps to the target
        double worst = 0.0;
        std::uniform_real_distribution<double> coef(-3.0, 3.0);
        for (std::size_t tr = 0; tr < trials; ++tr) {
            const std::size_t rows = 2 + tr % 4;
            const std::size_t cols = rows + 1 + tr % 3;
            Matrix a(rows, cols);
            for (double& v : a.data) v = gauss(rng);
            RealVector target(rows);
            for (double& v : target) v = gauss(rng);
            try {
                AffinePreimage pre = preimage_affine(a, target);
                RealVector x = pre.particular;
                for (const RealVector& bv : pre.basis) {
                    const double c = coef(rng);
                    for (std::size_t j = 0; j < cols; ++j) x[j] += c * bv[j];
                }
                RealVector r = matvec(a, x);
                for (std::size_t i = 0; i < rows; ++i)
                    worst = std::max(worst, std::fabs(r[i] - target[i]) / (1.0 + inf_norm(target)));
            } catch (const RankDeficientError&) {
            }
        }
        out.push_back({"preimage_membership", worst <= RESIDUAL_TOL,
                       "worst relative residual " + fmt(worst)});
    }

    {  // pair orthant enumeration: exact 2m count, Monte-Carlo finds no extras
        bool pass = true;
        std::string detail = "all counts exact, no extra orthants";
        for (std::size_t tr = 0; tr < trials && pass; ++tr) {
            const std::size_t m = 3 + tr % 6;
            RealVector g(m), h(m);
            for (double& v : g) v = gauss(rng);
            for (double& v : h) v = gauss(rng);
            PairOrthants po;
            try {
                po = orthants_of_pair(g, h);
            } catch (const DegeneratePairError&) {
                continue;
            }
            if (po.orthants.size() != 2 * m) {
                pass = false;
                detail = "count " + std::to_string(po.orthants.size()) + " != " + std::to_string(2 * m);
                break;
            }
            std::set<SignVector> allowed(po.orthants.begin(), po.orthants.end());
            for (const SignVector& s : mc_orthant_sample({g, h}, 2000, seed ^ (tr + 1)))
                if (!allowed.count(s)) {
                    pass = false;
                    detail = "sampled orthant outside the returned set";
                    break;
                }
        }
        out.push_back({"pair_orthants_vs_mc", pass, detail});
    }

    {  // analytic local maps against central differences, random tiny nets
        double worst = 0.0;
        bool boundary_ok = true;
        for (std::size_t tr = 0; tr < trials; ++tr) {
            const std::size_t in = 6, hidden = 8, outd = 3;
            MlpNetwork tiny = random_tiny_net(rng, in, hidden, outd);
            RealVector x(in);
            for (double& v : x) v = gauss(rng);
            std::vector<std::size_t> sub = {0, 2, 4};
            try {
                LocalAffineMap lam = local_map(tiny, x, sub);
                Matrix jac = fd_jacobian(tiny, x, sub, FD_STEP);
                const double scale = std::max(1.0, max_abs(jac));
                for (std::size_t i = 0; i < jac.rows; ++i)
                    for (std::size_t j = 0; j < jac.cols; ++j)
                        worst = std::max(worst, std::fabs(jac.at(i, j) - lam.a.at(i, j)) / scale);
            } catch (const OnBoundaryError&) {
            } catch (const BoundaryTooCloseError&) {
                boundary_ok = true;  // legitimate refusal, skip the instance
            }
        }
        out.push_back({"local_map_vs_fd", boundary_ok && worst <= 1e-4,
                       "worst relative deviation " + fmt(worst)});
    }

    {  // region catalog maps re-verified at fresh points of the same region
        double worst = 0.0;
        std::mt19937_64 rng2(seed ^ 0xabcdef);
        MlpNetwork tiny = random_tiny_net(rng2, 4, 6, 2);
        RegionCatalog cat = enumerate_regions(tiny, REGION_BOX_RADIUS, 2000, seed ^ 7);
        std::uniform_real_distribution<double> jitter(-1e-4, 1e-4);
        for (const RegionRecord& rec : cat.regions) {
            RealVector z = rec.witness;
            for (double& v : z) v += jitter(rng2);
            try {
                if (activation_pattern(tiny, z) != rec.pattern) continue;
            } catch (const OnBoundaryError&) {
                continue;
            }
            RealVector pred = rec.map.c;
            for (std::size_t i = 0; i < pred.size(); ++i)
                for (std::size_t j = 0; j < z.size(); ++j)
                    pred[i] += rec.map.a.at(i, j) * (z[j] - rec.witness[j]);
            RealVector actual = forward(tiny, z);
            for (std::size_t i = 0; i < pred.size(); ++i)
                worst = std::max(worst,
                                 std::fabs(pred[i] - actual[i]) / (1.0 + std::fabs(actual[i])));
        }
        out.push_back({"region_maps_reverify", worst <= 1e-10,
                       std::to_string(cat.regions.size()) + " regions, worst relative error " + fmt(worst)});
    }

    if (net) {  // spot-check the supplied network's local maps
        net->validate();
        double worst = 0.0;
        std::size_t checked = 0;
        std::uniform_real_distribution<double> uni(0.05, 0.95);
        std::uniform_int_distribution<std::size_t> pick(0, net->input_dim() - 1);
        for (std::size_t tr = 0; tr < trials; ++tr) {
            RealVector x(net->input_dim());
            for (double& v : x) v = uni(rng);
            std::set<std::size_t> subset_set;
            while (subset_set.size() < std::min<std::size_t>(4, net->input_dim()))
                subset_set.insert(pick(rng));
            std::vector<std::size_t> sub(subset_set.begin(), subset_set.end());
            try {
                LocalAffineMap lam = local_map(*net, x, sub);
                Matrix jac = fd_jacobian(*net, x, sub, FD_STEP);
                const double scale = std::max(1.0, max_abs(jac));
                for (std::size_t i = 0; i < jac.rows; ++i)
                    for (std::size_t j = 0; j < jac.cols; ++j)
                        worst = std::max(worst, std::fabs(jac.at(i, j) - lam.a.at(i, j)) / scale);
                ++checked;
            } catch (const OnBoundaryError&) {
            } catch (const BoundaryTooCloseError&) {
            }
        }
        out.push_back({"network_local_maps", checked > 0 && worst <= 1e-4,
                       std::to_string(checked) + " points, worst relative deviation " + fmt(worst)});
    }
    return out;
}

}  // namespace hamming
