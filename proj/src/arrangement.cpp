#include "hamming/arrangement.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>

namespace hamming {

namespace {

// Strict sign; 0 has no sign and is the caller's problem to reject.
inline int8_t strict_sign(double v) { return v > 0.0 ? int8_t{1} : int8_t{-1}; }

SignVector image_signs_or_empty(const HyperplaneArrangement& arr, const RealVector& d) {
    RealVector img = matvec(arr.coeffs, d);
    SignVector s(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (img[i] == 0.0) return {};
        s[i] = strict_sign(img[i]);
    }
    return s;
}

// Checked arithmetic on unsigned 128-bit, so exact counts can reject overflow
// instead of wrapping.
using U128 = unsigned __int128;
constexpr U128 U128_MAX = ~U128{0};

U128 mul_checked(U128 a, U128 b) {
    if (a != 0 && b > U128_MAX / a) throw CountOverflowError("binomial product overflow");
    return a * b;
}

std::uint64_t to_u64_checked(U128 v, const char* what) {
    if (v > U128{UINT64_MAX}) throw CountOverflowError(what);
    return static_cast<std::uint64_t>(v);
}

// Enumerates the orthants crossed by span{g, h} given the finite sign-flip
// parameters of sign(t*g_i + h_i). Shared by the strict API (which has already
// rejected degeneracies) and the coverage experiment (which perturbs them).
PairOrthants enumerate_pair(const RealVector& g, const RealVector& h,
                            std::vector<std::pair<double, std::size_t>>& flips) {
    const std::size_t m = g.size();
    std::sort(flips.begin(), flips.end());

    std::vector<double> probes;
    probes.reserve(flips.size() + 1);
    if (flips.empty()) {
        probes.push_back(0.0);
    } else {
        probes.push_back(flips.front().first - 1.0);
        for (std::size_t j = 1; j < flips.size(); ++j)
            probes.push_back(0.5 * (flips[j - 1].first + flips[j].first));
        probes.push_back(flips.back().first + 1.0);
    }

    PairOrthants out;
    std::set<SignVector> seen;
    for (double t : probes) {
        SignVector s(m);
        for (std::size_t i = 0; i < m; ++i) {
            double v = t * g[i] + h[i];
            if (v == 0.0) throw DegeneratePairError("probe landed on an axis");
            s[i] = strict_sign(v);
        }
        // v > 0 branch: point t*g + h; v < 0 branch: its negation.
        if (seen.insert(s).second) {
            out.orthants.push_back(s);
            out.witnesses.emplace_back(t, 1.0);
        }
        SignVector neg(m);
        for (std::size_t i = 0; i < m; ++i) neg[i] = static_cast<int8_t>(-s[i]);
        if (seen.insert(neg).second) {
            out.orthants.push_back(std::move(neg));
            out.witnesses.emplace_back(-t, -1.0);
        }
    }
    return out;
}

}  // namespace

std::uint32_t pack_signs(const SignVector& s) {
    if (s.size() > 32) throw std::invalid_argument("pack_signs: more than 32 entries");
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] > 0) v |= (std::uint32_t{1} << i);
    return v;
}

SignVector cell_of(const HyperplaneArrangement& arr, const RealVector& x) {
    if (x.size() != arr.n()) throw std::invalid_argument("cell_of: point dimension mismatch");
    RealVector v = matvec(arr.coeffs, x);
    SignVector s(arr.m());
    for (std::size_t i = 0; i < arr.m(); ++i) {
        const double e = v[i] + arr.offsets[i];
        if (std::fabs(e) <= CELL_BOUNDARY_TOL)
            throw OnBoundaryError(0, i, "cell_of: point on hyperplane " + std::to_string(i));
        s[i] = strict_sign(e);
    }
    return s;
}

std::uint64_t max_cells(std::size_t m, std::size_t n) {
    U128 total = 0;
    U128 binom = 1;  // C(m, 0)
    const std::size_t top = std::min(n, m);
    for (std::size_t i = 0; i <= top; ++i) {
        if (i > 0) {
            // C(m, i) = C(m, i-1) * (m - i + 1) / i, exact at every step
            binom = mul_checked(binom, m - i + 1) / i;
        }
        total += binom;
        if (total < binom) throw CountOverflowError("max_cells sum overflow");
    }
    return to_u64_checked(total, "max_cells exceeds 64 bits");
}

PairOrthants orthants_of_pair(const RealVector& g, const RealVector& h) {
    const std::size_t m = g.size();
    if (m == 0 || h.size() != m) throw std::invalid_argument("orthants_of_pair: bad sizes");
    std::vector<std::pair<double, std::size_t>> flips;
    flips.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (g[i] == 0.0 || h[i] == 0.0)
            throw DegeneratePairError("zero entry at coordinate " + std::to_string(i));
        flips.emplace_back(-h[i] / g[i], i);
    }
    std::sort(flips.begin(), flips.end());
    for (std::size_t j = 1; j < m; ++j)
        if (std::fabs(flips[j].first - flips[j - 1].first) <= RATIO_TIE_TOL)
            throw DegeneratePairError("repeated ratio between coordinates " +
                                      std::to_string(flips[j - 1].second) + " and " +
                                      std::to_string(flips[j].second));
    return enumerate_pair(g, h, flips);
}

std::uint64_t orthant_count_formula(std::size_t m, std::size_t k) {
    if (m == 0 || k == 0 || k > m) throw std::invalid_argument("orthant_count_formula: need 1 <= k <= m");
    U128 sum = 0;
    U128 binom = 1;  // C(m-1, 0)
    for (std::size_t d = 0; d < k; ++d) {
        if (d > 0) binom = mul_checked(binom, m - d) / d;
        sum += binom;
        if (sum < binom) throw CountOverflowError("orthant_count_formula overflow");
    }
    return to_u64_checked(mul_checked(sum, 2), "orthant_count_formula exceeds 64 bits");
}

double dimension_bound(std::size_t m, std::size_t k) {
    if (m == 0 || k == 0) throw std::invalid_argument("dimension_bound: need m, k >= 1");
    const double md = static_cast<double>(m), kd = static_cast<double>(k);
    return std::exp2(md / kd) / std::pow(md, (kd - 1.0) / kd);
}

RealVector cross_cell(const HyperplaneArrangement& arr, const RealVector& x,
                      const SignVector& target, const RealVector& d) {
    if (x.size() != arr.n() || d.size() != arr.n())
        throw std::invalid_argument("cross_cell: dimension mismatch");
    if (target.size() != arr.m()) throw std::invalid_argument("cross_cell: target size mismatch");
    if (image_signs_or_empty(arr, d) != target)
        throw std::invalid_argument("cross_cell: direction image signs differ from target");

    for (double c = 1.0; c <= CROSS_CELL_MAX_SCALE; c *= 2.0) {
        RealVector y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + c * d[i];
        try {
            if (cell_of(arr, y) == target) return y;
        } catch (const OnBoundaryError&) {
            // the homogeneous term dominates eventually, keep doubling
        }
    }
    throw NoConvergenceError("cross_cell: no entry into target cell up to scale 1e12");
}

namespace {

// Feasibility of T w > 0 with |w_j| <= 1 via a two-phase tableau simplex:
//   max e  s.t.  T w - e >= 0,  -1 <= w <= 1,  0 <= e <= 1.
// Always feasible (w = 0, e = 0); strict directions exist iff the optimum is
// positive. Bland's rule keeps it from cycling. Returns true and fills w when
// the optimum exceeds eps_min.
bool orthant_feasible(const Matrix& t, RealVector& w, double eps_min) {
    const std::size_t m = t.rows, k = t.cols;
    // substitute w = u - 1 with u in [0, 2]; columns:
    //   u(k), su(k) box slacks, e, se, r(m) surpluses, artificials appended
    const std::size_t col_u = 0, col_su = k, col_e = 2 * k, col_se = 2 * k + 1, col_r = 2 * k + 2;
    const std::size_t base_cols = 2 * k + 2 + m;
    const std::size_t rows = k + 1 + m;

    std::vector<std::size_t> art_rows;
    std::vector<double> q(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += t.at(i, j);
        q[i] = s;
        if (s > 0.0) art_rows.push_back(i);
    }
    const std::size_t ncols = base_cols + art_rows.size();
    Matrix tab(rows, ncols + 1, 0.0);  // last column is the RHS
    std::vector<std::size_t> basis(rows);

    for (std::size_t j = 0; j < k; ++j) {  // u_j + su_j = 2
        tab.at(j, col_u + j) = 1.0;
        tab.at(j, col_su + j) = 1.0;
        tab.at(j, ncols) = 2.0;
        basis[j] = col_su + j;
    }
    tab.at(k, col_e) = 1.0;  // e + se = 1
    tab.at(k, col_se) = 1.0;
    tab.at(k, ncols) = 1.0;
    basis[k] = col_se;

    std::size_t next_art = base_cols;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = k + 1 + i;
        // sum_j T_ij u_j - e - r_i = q_i, negated when q_i <= 0 so the RHS
        // stays nonnegative and r_i can start basic
        const double sgn = (q[i] > 0.0) ? 1.0 : -1.0;
        for (std::size_t j = 0; j < k; ++j) tab.at(r, col_u + j) = sgn * t.at(i, j);
        tab.at(r, col_e) = -sgn;
        tab.at(r, col_r + i) = -sgn;
        tab.at(r, ncols) = sgn * q[i];
        if (q[i] > 0.0) {
            tab.at(r, next_art) = 1.0;
            basis[r] = next_art++;
        } else {
            basis[r] = col_r + i;
        }
    }

    auto pivot = [&](std::size_t pr, std::size_t pc, RealVector& z) {
        const double inv = 1.0 / tab.at(pr, pc);
        for (std::size_t j = 0; j <= ncols; ++j) tab.at(pr, j) *= inv;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == pr) continue;
            const double f = tab.at(i, pc);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= ncols; ++j) tab.at(i, j) -= f * tab.at(pr, j);
        }
        const double fz = z[pc];
        if (fz != 0.0)
            for (std::size_t j = 0; j <= ncols; ++j) z[j] -= fz * tab.at(pr, j);
        basis[pr] = pc;
    };

    // z holds reduced costs of "minimize": phase one minimizes the artificial
    // sum, phase two minimizes -e.
    auto run = [&](RealVector& z, std::size_t usable_cols) -> bool {
        for (std::size_t iter = 0; iter < 20000; ++iter) {
            std::size_t pc = usable_cols;
            for (std::size_t j = 0; j < usable_cols; ++j)  // Bland: first improving column
                if (z[j] < -1e-11) { pc = j; break; }
            if (pc == usable_cols) return true;  // optimal
            std::size_t pr = rows;
            double best_ratio = 0.0;
            for (std::size_t i = 0; i < rows; ++i) {
                const double a = tab.at(i, pc);
                if (a > 1e-11) {
                    const double ratio = tab.at(i, ncols) / a;
                    if (pr == rows || ratio < best_ratio - 1e-14 ||
                        (ratio < best_ratio + 1e-14 && basis[i] < basis[pr])) {
                        pr = i;
                        best_ratio = ratio;
                    }
                }
            }
            if (pr == rows) return false;  // unbounded; cannot happen here
            pivot(pr, pc, z);
        }
        return false;
    };

    if (!art_rows.empty()) {
        RealVector z1(ncols + 1, 0.0);
        for (std::size_t j = base_cols; j < ncols; ++j) z1[j] = 1.0;
        for (std::size_t i = 0; i < rows; ++i)
            if (basis[i] >= base_cols)
                for (std::size_t j = 0; j <= ncols; ++j) z1[j] -= tab.at(i, j);
        if (!run(z1, ncols)) return false;
        if (z1[ncols] < -1e-9) return false;  // artificials stuck positive
        // drive leftover zero-level artificials out of the basis when possible
        for (std::size_t i = 0; i < rows; ++i) {
            if (basis[i] < base_cols) continue;
            std::size_t pc = base_cols;
            for (std::size_t j = 0; j < base_cols; ++j)
                if (std::fabs(tab.at(i, j)) > 1e-9) { pc = j; break; }
            if (pc < base_cols) pivot(i, pc, z1);
        }
    }

    RealVector z2(ncols + 1, 0.0);
    z2[col_e] = -1.0;  // minimize -e
    for (std::size_t i = 0; i < rows; ++i) {
        if (z2[basis[i]] == 0.0) continue;
        const double f = z2[basis[i]];
        for (std::size_t j = 0; j <= ncols; ++j) z2[j] -= f * tab.at(i, j);
        z2[basis[i]] = 0.0;
    }
    if (!run(z2, base_cols)) return false;

    RealVector u(k, 0.0);
    double e = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (basis[i] >= col_u && basis[i] < col_u + k) u[basis[i] - col_u] = tab.at(i, ncols);
        if (basis[i] == col_e) e = tab.at(i, ncols);
    }
    if (e <= eps_min) return false;
    w.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) w[j] = u[j] - 1.0;
    return true;
}

}  // namespace

RealVector sparse_direction(const HyperplaneArrangement& arr, const SignVector& target,
                            std::size_t k, std::uint64_t seed, std::size_t budget) {
    const std::size_t m = arr.m(), n = arr.n();
    if (target.size() != m) throw std::invalid_argument("sparse_direction: target size mismatch");
    for (int8_t s : target)
        if (s != 1 && s != -1) throw std::invalid_argument("sparse_direction: target entries must be +-1");
    if (k == 0) throw std::invalid_argument("sparse_direction: k must be >= 1");
    k = std::min(k, n);

    auto column = [&](std::size_t j) {
        RealVector c(m);
        for (std::size_t i = 0; i < m; ++i) c[i] = arr.coeffs.at(i, j);
        return c;
    };
    auto embedded_if_valid = [&](const std::vector<std::size_t>& subset,
                                 const RealVector& w) -> RealVector {
        RealVector d(n, 0.0);
        for (std::size_t j = 0; j < subset.size(); ++j) d[subset[j]] = w[j];
        if (image_signs_or_empty(arr, d) == target) return d;
        return {};
    };

    // single columns first: they are k <= anything solutions
    for (std::size_t j = 0; j < n; ++j) {
        RealVector c = column(j);
        SignVector s(m), neg(m);
        bool ok = true;
        for (std::size_t i = 0; i < m && ok; ++i) {
            if (c[i] == 0.0) ok = false;
            else { s[i] = strict_sign(c[i]); neg[i] = static_cast<int8_t>(-s[i]); }
        }
        if (!ok) continue;
        if (s == target) { RealVector d(n, 0.0); d[j] = 1.0; return d; }
        if (neg == target) { RealVector d(n, 0.0); d[j] = -1.0; return d; }
    }
    if (k == 1) return {};

    if (k == 2) {
        for (std::size_t a = 0; a + 1 < n; ++a) {
            RealVector g = column(a);
            for (std::size_t b = a + 1; b < n; ++b) {
                RealVector h = column(b);
                PairOrthants po;
                try {
                    po = orthants_of_pair(g, h);
                } catch (const DegeneratePairError&) {
                    continue;
                }
                for (std::size_t q = 0; q < po.orthants.size(); ++q) {
                    if (po.orthants[q] != target) continue;
                    RealVector d(n, 0.0);
                    d[a] = po.witnesses[q].first;
                    d[b] = po.witnesses[q].second;
                    return d;
                }
            }
        }
        return {};
    }

    // k >= 3: random subsets under a trial budget
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    RealVector target_real(m);
    for (std::size_t i = 0; i < m; ++i) target_real[i] = static_cast<double>(target[i]);

    for (std::size_t trial = 0; trial < budget; ++trial) {
        for (std::size_t j = 0; j < k; ++j) {  // partial Fisher-Yates
            std::uniform_int_distribution<std::size_t> pick(j, n - 1);
            std::swap(idx[j], idx[pick(rng)]);
        }
        std::vector<std::size_t> subset(idx.begin(), idx.begin() + k);
        std::sort(subset.begin(), subset.end());
        Matrix sub(m, k);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) sub.at(i, j) = arr.coeffs.at(i, subset[j]);

        if (k >= m) {
            try {
                RealVector w;
                if (k == m) {
                    w = solve_square(sub, target_real);
                } else {
                    w = preimage_affine(sub, target_real).particular;
                }
                RealVector d = embedded_if_valid(subset, w);
                if (!d.empty()) return d;
            } catch (const SingularMatrixError&) {
            } catch (const RankDeficientError&) {
            }
            continue;
        }

        Matrix t(m, k);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) t.at(i, j) = target[i] * sub.at(i, j);
        RealVector w;
        if (orthant_feasible(t, w, 1e-9)) {
            RealVector d = embedded_if_valid(subset, w);
            if (!d.empty()) return d;
        }
    }
    return {};
}

CoverageReport coverage_experiment(std::size_t m, std::size_t n, std::size_t k,
                                   std::uint64_t seed) {
    if (m == 0 || m > COVERAGE_MAX_M)
        throw std::invalid_argument("coverage_experiment: need 1 <= m <= " + std::to_string(COVERAGE_MAX_M));
    if (k != 1 && k != 2) throw std::invalid_argument("coverage_experiment: k must be 1 or 2");
    if (n == 0) throw std::invalid_argument("coverage_experiment: need n >= 1");

    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix mat(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) mat.at(i, j) = gauss(rng);

    const std::uint64_t total = std::uint64_t{1} << m;
    const std::size_t words = static_cast<std::size_t>(total / 64 + 1);
    std::vector<std::uint64_t> bitmap(words, 0);
    std::atomic<std::uint64_t> degenerate{0};

    auto mark = [m](std::vector<std::uint64_t>& bits, const SignVector& s) {
        const std::uint32_t p = pack_signs(s);
        bits[p >> 6] |= (std::uint64_t{1} << (p & 63));
        const std::uint32_t q = ~p & static_cast<std::uint32_t>((std::uint64_t{1} << m) - 1);
        bits[q >> 6] |= (std::uint64_t{1} << (q & 63));
    };

    auto column = [&](std::size_t j) {
        RealVector c(m);
        for (std::size_t i = 0; i < m; ++i) c[i] = mat.at(i, j);
        return c;
    };

    if (k == 1) {
        for (std::size_t j = 0; j < n; ++j) {
            RealVector c = column(j);
            SignVector s(m);
            for (std::size_t i = 0; i < m; ++i) s[i] = strict_sign(c[i]);
            mark(bitmap, s);
        }
    } else {
        // enumerate one pair, perturbing tied flip parameters instead of
        // throwing; standard-normal entries make ties measure-zero but the
        // experiment must never abort
        auto mark_pair = [&](std::vector<std::uint64_t>& bits, const RealVector& g,
                             const RealVector& h) {
            std::vector<std::pair<double, std::size_t>> flips;
            flips.reserve(m);
            for (std::size_t i = 0; i < m; ++i)
                if (g[i] != 0.0) flips.emplace_back(-h[i] / g[i], i);
            std::sort(flips.begin(), flips.end());
            bool perturbed = false;
            if (!flips.empty()) {
                const double spread =
                    std::max(flips.back().first - flips.front().first, 1.0);
                for (std::size_t j = 1; j < flips.size(); ++j)
                    if (flips[j].first - flips[j - 1].first <= RATIO_TIE_TOL) {
                        flips[j].first = flips[j - 1].first + 1e-9 * spread;
                        perturbed = true;
                    }
            }
            if (perturbed || flips.size() < m) degenerate.fetch_add(1, std::memory_order_relaxed);
            PairOrthants po;
            try {
                po = enumerate_pair(g, h, flips);
            } catch (const DegeneratePairError&) {
                degenerate.fetch_add(1, std::memory_order_relaxed);
                return;
            }
            for (const SignVector& s : po.orthants) mark(bits, s);
        };

        const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
        const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(worker_count(), 1),
                                                          static_cast<std::size_t>(pairs) + 1);
        std::vector<std::vector<std::uint64_t>> local(workers, std::vector<std::uint64_t>(words, 0));
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                const std::uint64_t lo = pairs * w / workers;
                const std::uint64_t hi = pairs * (w + 1) / workers;
                for (std::uint64_t p = lo; p < hi; ++p) {
                    // unrank pair index p -> (a, b), a < b
                    std::uint64_t a = 0, remaining = p;
                    while (remaining >= n - 1 - a) { remaining -= n - 1 - a; ++a; }
                    const std::uint64_t b = a + 1 + remaining;
                    mark_pair(local[w], column(a), column(b));
                }
            });
        }
        for (auto& th : pool) th.join();
        for (std::size_t w = 0; w < workers; ++w)
            for (std::size_t i = 0; i < words; ++i) bitmap[i] |= local[w][i];
    }

    CoverageReport rep;
    rep.m = m;
    rep.n = n;
    rep.k = k;
    rep.seed = seed;
    rep.total = total;
    for (std::size_t i = 0; i < words; ++i) rep.covered += std::popcount(bitmap[i]);
    rep.fraction = static_cast<double>(rep.covered) / static_cast<double>(total);
    const double td = static_cast<double>(total);
    if (k == 1) {
        rep.independence_estimate = 1.0 - std::pow(1.0 - 2.0 / td, static_cast<double>(n));
    } else {
        const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
        rep.independence_estimate = 1.0 - std::pow(1.0 - 2.0 * static_cast<double>(m) / td, pairs);
    }
    rep.degenerate_pairs = degenerate.load();
    rep.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace hamming
