#include "hamming/pathfollow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>

namespace hamming {

namespace {

double dist2(const RealVector& a, const RealVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double dist_inf(const RealVector& a, const RealVector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

std::vector<std::size_t> checked_subset(const MlpNetwork& net, std::vector<std::size_t> subset,
                                        std::size_t required) {
    if (subset.size() != required)
        throw std::invalid_argument("subset size " + std::to_string(subset.size()) +
                                    " does not match required " + std::to_string(required));
    std::sort(subset.begin(), subset.end());
    for (std::size_t j = 0; j < subset.size(); ++j) {
        if (subset[j] >= net.input_dim()) throw std::invalid_argument("subset index out of range");
        if (j > 0 && subset[j] == subset[j - 1]) throw std::invalid_argument("duplicate subset index");
    }
    return subset;
}

// Everything a run needs that depends only on (net, x, subset): the first
// layer splits into a frozen part (folded into base_pre) and the subset
// columns, so evaluating a candidate point costs O(width * |subset|) instead
// of a full first-layer pass.
struct SubsetContext {
    const MlpNetwork* net = nullptr;
    std::vector<std::size_t> subset;
    RealVector x0;
    RealVector base_pre;  // W_0 x0 + b_0
    Matrix w0_sub;        // first-layer columns restricted to the subset
};

SubsetContext make_context(const MlpNetwork& net, const RealVector& x,
                           const std::vector<std::size_t>& subset) {
    SubsetContext ctx;
    ctx.net = &net;
    ctx.subset = subset;
    ctx.x0 = x;
    ctx.base_pre = matvec(net.layers[0].w, x);
    for (std::size_t u = 0; u < ctx.base_pre.size(); ++u) ctx.base_pre[u] += net.layers[0].b[u];
    ctx.w0_sub = Matrix(net.layers[0].w.rows, subset.size());
    for (std::size_t u = 0; u < ctx.w0_sub.rows; ++u)
        for (std::size_t j = 0; j < subset.size(); ++j)
            ctx.w0_sub.at(u, j) = net.layers[0].w.at(u, subset[j]);
    return ctx;
}

struct EvalState {
    std::vector<RealVector> pre;                 // hidden pre-activations per layer
    std::vector<std::vector<std::uint8_t>> mask;  // 1 = active
    RealVector out;
    bool on_boundary = false;
};

EvalState eval_at(const SubsetContext& ctx, const RealVector& offset) {
    const MlpNetwork& net = *ctx.net;
    const std::size_t depth = net.layers.size();
    EvalState st;
    st.pre.resize(depth - 1);
    st.mask.resize(depth - 1);

    RealVector cur = ctx.base_pre;
    for (std::size_t u = 0; u < cur.size(); ++u) {
        const double* wr = ctx.w0_sub.row(u);
        double s = 0.0;
        for (std::size_t j = 0; j < offset.size(); ++j) s += wr[j] * offset[j];
        cur[u] += s;
    }
    for (std::size_t l = 0; l + 1 < depth; ++l) {
        if (l > 0) {
            cur = matvec(net.layers[l].w, cur);
            for (std::size_t u = 0; u < cur.size(); ++u) cur[u] += net.layers[l].b[u];
        }
        st.pre[l] = cur;
        st.mask[l].resize(cur.size());
        for (std::size_t u = 0; u < cur.size(); ++u) {
            if (std::fabs(cur[u]) <= ACTIVATION_BOUNDARY_TOL) st.on_boundary = true;
            st.mask[l][u] = cur[u] > 0.0 ? 1 : 0;
            cur[u] = cur[u] > 0.0 ? cur[u] : 0.0;
        }
    }
    st.out = matvec(net.layers[depth - 1].w, cur);
    for (std::size_t u = 0; u < st.out.size(); ++u) st.out[u] += net.layers[depth - 1].b[u];
    return st;
}

// Directional rates of every hidden pre-activation (and the output) along a
// subset-supported direction, within the frozen pattern of `st`.
struct RateState {
    std::vector<RealVector> pre;
    RealVector out;
};

RateState rates_at(const SubsetContext& ctx, const EvalState& st, const RealVector& dir_sub) {
    const MlpNetwork& net = *ctx.net;
    const std::size_t depth = net.layers.size();
    RateState rs;
    rs.pre.resize(depth - 1);

    RealVector cur(ctx.w0_sub.rows, 0.0);
    for (std::size_t u = 0; u < cur.size(); ++u) {
        const double* wr = ctx.w0_sub.row(u);
        double s = 0.0;
        for (std::size_t j = 0; j < dir_sub.size(); ++j) s += wr[j] * dir_sub[j];
        cur[u] = s;
    }
    for (std::size_t l = 0; l + 1 < depth; ++l) {
        if (l > 0) cur = matvec(net.layers[l].w, cur);
        rs.pre[l] = cur;
        for (std::size_t u = 0; u < cur.size(); ++u)
            if (!st.mask[l][u]) cur[u] = 0.0;
    }
    rs.out = matvec(net.layers[depth - 1].w, cur);
    return rs;
}

Matrix local_map_at(const SubsetContext& ctx, const EvalState& st) {
    const MlpNetwork& net = *ctx.net;
    Matrix chain = ctx.w0_sub;
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        for (std::size_t u = 0; u < chain.rows; ++u)
            if (!st.mask[l][u])
                for (std::size_t j = 0; j < chain.cols; ++j) chain.at(u, j) = 0.0;
        chain = matmul(net.layers[l + 1].w, chain);
    }
    return chain;
}

struct Crossing {
    double tau = 0.0;
    std::size_t layer = 0;
    std::size_t unit = 0;
};

std::optional<Crossing> first_crossing(const EvalState& st, const RateState& rs, double tau_max) {
    double best = std::numeric_limits<double>::infinity();
    Crossing c;
    bool found = false;
    for (std::size_t l = 0; l < st.pre.size(); ++l)
        for (std::size_t u = 0; u < st.pre[l].size(); ++u) {
            const double rate = rs.pre[l][u];
            if (rate == 0.0) continue;
            const double tau = -st.pre[l][u] / rate;
            if (tau > 0.0 && tau <= tau_max && (!found || tau < best - STEP_TIE_TOL)) {
                best = tau;
                c = Crossing{tau, l, u};
                found = true;
            }
        }
    if (!found) return std::nullopt;
    return c;
}

struct EngineParams {
    const SubsetContext* ctx = nullptr;
    const OutputPath* path = nullptr;
    double eps_target = 0.0;
    double eps_progress = 0.0;
    std::size_t max_iters = 2000;
    std::size_t delta = 0;
    FarSideMode far_side = FarSideMode::Ray;
    bool reflections_fatal = false;
    bool record_trace = false;
    std::uint64_t rng_seed = 0;
    const std::vector<double>* watermark = nullptr;  // progress to beat, indexed by iteration
    double kill_margin = 0.0;
};

struct EngineOutput {
    AttackResult res;
    std::vector<double> curve;  // progress after every iteration
    bool rank_deficient = false;
};

// moves allowed without a meaningful arc gain before the walk counts as
// stalled; the gain bar is a fraction of the whole arc so that micro-gains
// around a blocked fold do not keep a doomed walk alive
constexpr std::size_t STALL_WINDOW = 256;
constexpr double STALL_GAIN_FRAC = 1e-3;
// stalled randomized walks get this many fresh climbs from the start before
// the run is called a sinkhole; each climb must beat the best progress so far
// to keep going
constexpr std::size_t RESET_MAX = 6;
// a guarded plane stays pinned while the walk stands within this fraction
// of the layer scale of it
constexpr double GUARD_NEAR_FRAC = 1e-4;
// smallest workable fraction of the segment target; below it the move backs
// away from the fold instead of inching into the pinch
constexpr double MU_USEFUL = 1e-2;

EngineOutput engine_run(const EngineParams& p) {
    const SubsetContext& ctx = *p.ctx;
    const OutputPath& path = *p.path;
    const MlpNetwork& net = *ctx.net;
    const std::size_t s = ctx.subset.size();
    const std::size_t vcount = path.vertices.size();
    std::mt19937_64 rng(p.rng_seed);

    EngineOutput eo;
    AttackResult& res = eo.res;
    eo.curve.reserve(p.max_iters + 1);
    eo.curve.push_back(0.0);

    RealVector offset(s, 0.0);
    EvalState st = eval_at(ctx, offset);
    RealVector out = st.out;
    std::size_t t = 1;      // index of the vertex currently steered for
    double progress = 0.0;  // arc position of the output point along the path

    double best = 0.0;  // highest arc position reached over the whole run

    auto fill_point = [&]() {
        res.z = ctx.x0;
        for (std::size_t j = 0; j < s; ++j) res.z[ctx.subset[j]] = ctx.x0[ctx.subset[j]] + offset[j];
        res.hamming = 0;
        for (std::size_t j = 0; j < s; ++j)
            if (res.z[ctx.subset[j]] != ctx.x0[ctx.subset[j]]) ++res.hamming;
        res.final_output = forward(net, res.z);
        res.progress = std::max(progress, best);
    };
    auto fail = [&](FailureKind kind, std::size_t iters) {
        res.success = false;
        res.failure_kind = kind;
        res.iterations = iters;
        fill_point();
        return eo;
    };
    auto finish_success = [&](std::size_t iters) {
        res.success = true;
        res.failure_kind = FailureKind::None;
        res.iterations = iters;
        fill_point();
        return eo;
    };
    if (st.on_boundary) return fail(FailureKind::Singular, 0);

    // every move aims at a point of the current segment (forward or, when
    // backing out of a fold, backward), so the output point stays on the
    // polyline and its arc position is its projection onto the segment; a
    // boundary nudge can land a hair past either end, which the loops treat
    // as the corner being reached
    auto seg_pos = [&](std::size_t ti) {
        const RealVector& a0 = path.vertices[ti - 1];
        const RealVector& a1 = path.vertices[ti];
        double d = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) d += (out[i] - a0[i]) * (a1[i] - a0[i]);
        return d / (path.prefix_len[ti] - path.prefix_len[ti - 1]);
    };
    auto sync_position = [&]() {
        while (t + 1 < vcount &&
               seg_pos(t) >= (path.prefix_len[t] - path.prefix_len[t - 1]) * (1.0 - 1e-12))
            ++t;
        while (t > 1 && seg_pos(t) < 0.0) --t;
        progress = std::min(path.prefix_len[t - 1] + std::max(seg_pos(t), 0.0),
                            path.arc_length);
        best = std::max(best, progress);
    };
    auto record = [&](TraceEvent ev) {
        if (p.record_trace) res.trace.steps.push_back(TraceStep{out, progress, ev});
    };
    auto succeeded = [&]() { return dist_inf(out, path.vertices.back()) <= p.eps_target; };

    sync_position();
    record(TraceEvent::Start);
    if (succeeded()) return finish_success(0);

    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // planes crossed most recently, newest first; while the walk is still
    // close to one of them, every sampled destination keeps the current side
    // of it, and pre-activations are affine along the move, so the move
    // cannot bounce straight back over a fresh crossing
    constexpr std::size_t GUARD_RING = 1;
    std::array<Crossing, GUARD_RING> ring{};
    std::size_t ring_count = 0;
    auto ring_push = [&](const Crossing& c) {
        std::size_t at = ring_count;
        for (std::size_t i = 0; i < ring_count; ++i)
            if (ring[i].layer == c.layer && ring[i].unit == c.unit) {
                at = i;
                break;
            }
        if (at == ring_count) ring_count = std::min(ring_count + 1, GUARD_RING);
        for (std::size_t i = std::min(at, GUARD_RING - 1); i > 0; --i) ring[i] = ring[i - 1];
        ring[0] = c;
    };

    const double stall_gain = std::max(p.eps_progress, STALL_GAIN_FRAC * path.arc_length);
    double recorded = 0.0;      // progress at the last recorded trace step
    double stall_mark = 0.0;    // progress at the last stall-counter reset
    std::size_t stall = 0;      // moves since the last meaningful gain
    std::size_t resets_left = RESET_MAX;
    bool just_crossed = false;  // previous move ended on a boundary crossing

    for (std::size_t iter = 1; iter <= p.max_iters; ++iter) {
        if (p.watermark && iter - 1 < p.watermark->size() &&
            best < (*p.watermark)[iter - 1] - p.kill_margin)
            return fail(FailureKind::IterationCap, iter);

        RealVector w(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) w[i] = path.vertices[t][i] - out[i];

        Matrix a = local_map_at(ctx, st);
        RealVector dir;
        RateState rs;

        if (p.delta == 0) {
            if (condition_estimate(a) > CONDITION_LIMIT) return fail(FailureKind::Singular, iter);
            try {
                dir = solve_square(a, w);
            } catch (const SingularMatrixError&) {
                return fail(FailureKind::Singular, iter);
            }
            rs = rates_at(ctx, st, dir);
        } else {
            AffinePreimage pre;
            try {
                pre = preimage_affine(a, w);
            } catch (const RankDeficientError&) {
                eo.rank_deficient = true;
                return fail(FailureKind::Singular, iter);
            }
            std::vector<RealVector> basis = std::move(pre.basis);
            for (RealVector& v : basis) {
                const double n2 = dist2(v, RealVector(s, 0.0));
                if (n2 > 0.0)
                    for (double& e : v) e /= n2;
            }
            const RateState part_rate = rates_at(ctx, st, pre.particular);
            std::vector<RateState> brates(basis.size());
            for (std::size_t bq = 0; bq < basis.size(); ++bq)
                brates[bq] = rates_at(ctx, st, basis[bq]);

            const double plen = dist2(pre.particular, RealVector(s, 0.0));
            const double seg = path.prefix_len[t] - path.prefix_len[t - 1];
            const double cmax = 128.0 * std::max(seg, 2.0 * plen) + 1e-12;

            // guarded planes the walk still stands close to; the destination
            // of this move must keep the current side of each
            struct SidePin {
                double g = 0.0, ra = 0.0, kappa = 0.0;
                std::vector<double> rb;
            };
            std::vector<SidePin> pins;
            if (p.far_side == FarSideMode::Ray) {
                for (std::size_t ri = 0; ri < ring_count; ++ri) {
                    const std::size_t l = ring[ri].layer, u = ring[ri].unit;
                    const double pg = st.pre[l][u];
                    const double scale = 1.0 + inf_norm(st.pre[l]);
                    if (std::fabs(pg) > GUARD_NEAR_FRAC * scale) continue;
                    const double sgn = pg > 0.0 ? 1.0 : -1.0;
                    SidePin q;
                    q.g = sgn * pg;
                    q.kappa = std::min(1e-12 * scale, 0.5 * q.g);
                    q.ra = sgn * part_rate.pre[l][u];
                    q.rb.resize(basis.size());
                    for (std::size_t bq = 0; bq < basis.size(); ++bq)
                        q.rb[bq] = sgn * brates[bq].pre[l][u];
                    pins.push_back(std::move(q));
                }
            }

            double mu = 1.0;
            std::vector<double> cs(basis.size(), 0.0);
            bool picked = false;
            if (basis.size() > 1) {
                // uniform over the feasible box slice by rejection
                for (int attempt = 0; attempt < 64 && !picked; ++attempt) {
                    for (double& cj : cs) cj = (2.0 * unit(rng) - 1.0) * cmax;
                    picked = true;
                    for (const SidePin& q : pins) {
                        double v = q.g - q.kappa + q.ra;
                        for (std::size_t bq = 0; bq < basis.size(); ++bq) v += cs[bq] * q.rb[bq];
                        if (v < q.kappa) {
                            picked = false;
                            break;
                        }
                    }
                }
            }
            if (!picked && !basis.empty()) {
                // one line of the null space: the whole space when delta = 1,
                // a random direction through it otherwise
                std::vector<double> eta(basis.size(), 1.0);
                if (basis.size() > 1) {
                    std::normal_distribution<double> gauss(0.0, 1.0);
                    double n2 = 0.0;
                    for (double& e : eta) {
                        e = gauss(rng);
                        n2 += e * e;
                    }
                    n2 = std::max(std::sqrt(n2), 1e-300);
                    for (double& e : eta) e /= n2;
                }
                std::vector<double> rbe(pins.size(), 0.0);
                for (std::size_t qi = 0; qi < pins.size(); ++qi)
                    for (std::size_t bq = 0; bq < basis.size(); ++bq)
                        rbe[qi] += eta[bq] * pins[qi].rb[bq];

                double lo = -cmax, hi = cmax;
                auto interval_at = [&](double m) {
                    lo = -cmax;
                    hi = cmax;
                    for (std::size_t qi = 0; qi < pins.size(); ++qi) {
                        const SidePin& q = pins[qi];
                        const double base = q.g - q.kappa + m * q.ra;
                        const double tol =
                            1e-14 * (std::fabs(q.g) + std::fabs(m * q.ra) + std::fabs(rbe[qi]) + 1.0);
                        if (rbe[qi] > tol) lo = std::max(lo, -base / rbe[qi]);
                        else if (rbe[qi] < -tol) hi = std::min(hi, -base / rbe[qi]);
                        else if (base < 0.0) return false;
                    }
                    return lo <= hi;
                };
                if (!interval_at(1.0)) {
                    // the preimage of the full target leaves no room on the
                    // kept sides; find the largest workable fraction of the
                    // segment to aim for instead
                    double fl = 0.0, fh = 1.0;  // mu = 0 is feasible by construction
                    for (int half = 0; half < 48; ++half) {
                        const double mid = 0.5 * (fl + fh);
                        if (interval_at(mid)) fl = mid;
                        else fh = mid;
                    }
                    if (fl >= MU_USEFUL) {
                        mu = fl * (0.5 + 0.4 * unit(rng));
                    } else {
                        // a fold pinches out forward motion, and near it the
                        // null line is squeezed between the pinned planes;
                        // back away along the segment, which regrows the
                        // clearances, and approach again from the freshly
                        // randomized preimage point of a later move
                        const double wn = dist2(w, RealVector(w.size(), 0.0));
                        const double pos = progress - path.prefix_len[t - 1];
                        const double room = wn > 0.0 ? std::min(1.0, pos / wn) : 0.0;
                        mu = -room * (0.1 + 0.9 * unit(rng));
                        for (int half = 0; half < 8 && !interval_at(mu); ++half) mu *= 0.5;
                    }
                    if (!interval_at(mu)) {
                        mu = 0.0;
                        lo = 0.0;
                        hi = 0.0;
                    }
                }
                // sample away from the interval ends: an endpoint puts the
                // destination exactly on a pinned plane, within the boundary
                // tolerance of the evaluator
                const double pad = 0.05 * (hi - lo);
                const double clo = lo + pad, chi = hi - pad;
                // log-uniform magnitude across the feasible sides: fold escape
                // wants nearly lateral moves while homing near the target
                // wants nearly pure advance, and both scales must stay likely
                const double mfloor = 1e-3 * (std::max(seg, 2.0 * plen) + 1e-12);
                double c = 0.5 * (clo + chi);
                if (chi > clo) {
                    const double neg = std::max(0.0, -clo), pos = std::max(0.0, chi);
                    const double side =
                        (neg > 0.0 && pos > 0.0)
                            ? (unit(rng) < neg / (neg + pos) ? -1.0 : 1.0)
                            : (pos > 0.0 ? 1.0 : -1.0);
                    const double cap = side > 0.0 ? pos : neg;
                    if (cap > mfloor)
                        c = side * std::exp(std::log(mfloor) +
                                            unit(rng) * (std::log(cap) - std::log(mfloor)));
                    if (c < clo || c > chi) c = clo + (chi - clo) * unit(rng);
                }
                for (std::size_t bq = 0; bq < basis.size(); ++bq) cs[bq] = c * eta[bq];
            }

            dir.assign(s, 0.0);
            for (std::size_t j = 0; j < s; ++j) {
                double v = mu * pre.particular[j];
                for (std::size_t bq = 0; bq < basis.size(); ++bq) v += cs[bq] * basis[bq][j];
                dir[j] = v;
            }
            // rates combine linearly, and reusing the pin arithmetic keeps
            // first_crossing consistent with the side constraints
            rs.pre.resize(st.pre.size());
            for (std::size_t l = 0; l < st.pre.size(); ++l) {
                rs.pre[l].assign(st.pre[l].size(), 0.0);
                for (std::size_t u = 0; u < st.pre[l].size(); ++u) {
                    double v = mu * part_rate.pre[l][u];
                    for (std::size_t bq = 0; bq < basis.size(); ++bq)
                        v += cs[bq] * brates[bq].pre[l][u];
                    rs.pre[l][u] = v;
                }
            }
            rs.out.assign(out.size(), 0.0);
            for (std::size_t i = 0; i < out.size(); ++i) {
                double v = mu * part_rate.out[i];
                for (std::size_t bq = 0; bq < basis.size(); ++bq) v += cs[bq] * brates[bq].out[i];
                rs.out[i] = v;
            }
        }

        std::optional<Crossing> cross = first_crossing(st, rs, 1.0);

        // bouncing straight back over the boundary just crossed: the recross
        // shows up as the very next crossing of the same unit at a tau on the
        // nudge scale, long before any real share of the move
        if (cross && p.reflections_fatal && just_crossed && ring_count > 0 &&
            cross->layer == ring[0].layer && cross->unit == ring[0].unit && cross->tau <= 1e-3)
            return fail(FailureKind::Reflection, iter);

        const double step_tau = cross ? cross->tau + BOUNDARY_NUDGE : 1.0;
        double moved2 = 0.0;
        for (std::size_t j = 0; j < s; ++j) {
            const double d = step_tau * dir[j];
            offset[j] += d;
            moved2 += d * d;
        }
        res.trace.input_length += std::sqrt(moved2);

        st = eval_at(ctx, offset);
        for (int tries = 0; st.on_boundary && tries < 3; ++tries) {
            for (std::size_t j = 0; j < s; ++j) offset[j] += BOUNDARY_NUDGE * dir[j];
            st = eval_at(ctx, offset);
        }
        if (st.on_boundary) return fail(FailureKind::Singular, iter);
        out = st.out;

        just_crossed = cross.has_value();
        if (cross) ring_push(*cross);

        const std::size_t t_before = t;
        sync_position();
        eo.curve.push_back(progress);

        if (succeeded()) return finish_success(iter);

        const TraceEvent ev = cross ? TraceEvent::BoundaryCross
                                    : (t != t_before ? TraceEvent::PathCorner : TraceEvent::Advance);
        if (progress - recorded >= p.eps_progress) {
            record(ev);
            recorded = progress;
        }
        if (progress - stall_mark >= stall_gain) {
            stall_mark = progress;
            stall = 0;
        } else if (++stall > STALL_WINDOW) {
            // the walk keeps circling the same blocked ground; the basic
            // walk is deterministic and would only retrace itself, but a
            // randomized walk gets fresh climbs from the start, which
            // explore independent branches of the preimage
            if (p.delta == 0 || resets_left == 0) return fail(FailureKind::Sinkhole, iter);
            --resets_left;
            offset.assign(s, 0.0);
            st = eval_at(ctx, offset);
            out = st.out;
            t = 1;
            just_crossed = false;
            ring_count = 0;
            stall = 0;
            sync_position();
            stall_mark = progress;
        }
    }
    // a budget that runs out on a walk that has stalled before, or that is no
    // longer closing the remaining arc at a healthy rate, is a walk
    // converging short of the end; IterationCap is kept for walks cut while
    // still climbing fast
    double best_old = 0.0;
    const std::size_t upto = eo.curve.size() > STALL_WINDOW ? eo.curve.size() - STALL_WINDOW : 1;
    for (std::size_t i = 0; i < upto; ++i) best_old = std::max(best_old, eo.curve[i]);
    const bool closing = path.arc_length - best <= 0.5 * (path.arc_length - best_old);
    return fail(resets_left < RESET_MAX || !closing ? FailureKind::Sinkhole
                                                    : FailureKind::IterationCap,
                p.max_iters);
}

double resolve_eps_target(const AttackConfig& cfg, const RealVector& target_out) {
    if (cfg.epsilon_target) {
        if (*cfg.epsilon_target <= 0.0) throw std::invalid_argument("epsilon_target must be positive");
        return *cfg.epsilon_target;
    }
    return 1e-6 * (1.0 + inf_norm(target_out));
}

double resolve_eps_progress(const AttackConfig& cfg, const OutputPath& path) {
    if (cfg.epsilon_progress) {
        if (*cfg.epsilon_progress <= 0.0) throw std::invalid_argument("epsilon_progress must be positive");
        return *cfg.epsilon_progress;
    }
    return 1e-9 * path.arc_length;
}

AttackResult follow_with(const MlpNetwork& net, const RealVector& x, const RealVector& y,
                         const std::vector<std::size_t>& subset_in, const AttackConfig& cfg,
                         std::size_t delta) {
    net.validate();
    const std::vector<std::size_t> subset =
        checked_subset(net, subset_in, net.output_dim() + delta);
    const OutputPath path = build_path(net, x, y);
    const SubsetContext ctx = make_context(net, x, subset);
    EngineParams p;
    p.ctx = &ctx;
    p.path = &path;
    p.eps_target = resolve_eps_target(cfg, path.vertices.back());
    p.eps_progress = resolve_eps_progress(cfg, path);
    p.max_iters = cfg.max_iters;
    p.delta = delta;
    p.far_side = cfg.far_side;
    p.reflections_fatal = (delta == 0);
    p.record_trace = cfg.record_trace;
    p.rng_seed = cfg.seed;
    EngineOutput out = engine_run(p);
    // a rank-deficient local map depends on where the random preimage choices
    // led; rerun with fresh randomness until the iteration budget runs out
    std::size_t spent = out.res.iterations;
    for (std::uint64_t attempt = 1; out.rank_deficient && spent < cfg.max_iters; ++attempt) {
        p.max_iters = cfg.max_iters - spent;
        p.rng_seed = cfg.seed + 0x9e3779b97f4a7c15ULL * attempt;
        out = engine_run(p);
        spent += std::max<std::size_t>(out.res.iterations, 1);
    }
    AttackResult res = std::move(out.res);
    res.iterations = std::min(spent, cfg.max_iters);
    if (!cfg.record_trace) res.trace.steps.clear();
    return res;
}

}  // namespace

OutputPath build_path(const MlpNetwork& net, const RealVector& x, const RealVector& y) {
    net.validate();
    if (x.size() != net.input_dim() || y.size() != net.input_dim())
        throw std::invalid_argument("build_path: endpoint dimension mismatch");
    if (x == y) throw DegenerateSegmentError("build_path: endpoints coincide");

    RealVector dir(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dir[i] = y[i] - x[i];

    OutputPath path;
    path.vertices.push_back(forward(net, x));
    path.alphas.push_back(0.0);

    double alpha = 0.0;
    auto point_at = [&](double a) {
        RealVector p(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) p[i] = x[i] + a * dir[i];
        return p;
    };

    // the nudge size caps the vertex count: at most 1/BOUNDARY_NUDGE crossings
    while (alpha < 1.0) {
        std::optional<BoundaryHit> hit;
        try {
            hit = step_to_boundary(net, point_at(alpha), dir, 1.0 - alpha);
        } catch (const OnBoundaryError&) {
            if (alpha == 0.0) throw;  // caller handed us a boundary point
            alpha += BOUNDARY_NUDGE;
            continue;
        }
        if (!hit) break;
        const double av = alpha + hit->tau;
        RealVector v = forward(net, point_at(av));
        // skip output-identical kinks so consecutive vertices stay distinct
        if (dist_inf(v, path.vertices.back()) > 1e-12 * (1.0 + inf_norm(path.vertices.back()))) {
            path.vertices.push_back(std::move(v));
            path.alphas.push_back(av);
        }
        alpha = av + BOUNDARY_NUDGE;
    }

    RealVector last = forward(net, y);
    if (dist_inf(last, path.vertices.back()) >
        1e-12 * (1.0 + inf_norm(path.vertices.back()))) {
        path.vertices.push_back(std::move(last));
        path.alphas.push_back(1.0);
    } else if (path.vertices.size() == 1) {
        throw DegenerateSegmentError("build_path: endpoint outputs coincide");
    } else {
        path.alphas.back() = 1.0;
        path.vertices.back() = std::move(last);
    }

    path.prefix_len.resize(path.vertices.size(), 0.0);
    for (std::size_t i = 1; i < path.vertices.size(); ++i)
        path.prefix_len[i] = path.prefix_len[i - 1] + dist2(path.vertices[i], path.vertices[i - 1]);
    path.arc_length = path.prefix_len.back();
    if (!(path.arc_length > 0.0))
        throw DegenerateSegmentError("build_path: zero arc length");
    return path;
}

AttackResult follow_basic(const MlpNetwork& net, const RealVector& x, const RealVector& y,
                          const std::vector<std::size_t>& subset, const AttackConfig& cfg) {
    return follow_with(net, x, y, subset, cfg, 0);
}

AttackResult follow_improved(const MlpNetwork& net, const RealVector& x, const RealVector& y,
                             const std::vector<std::size_t>& subset, const AttackConfig& cfg) {
    return follow_with(net, x, y, subset, cfg, cfg.delta);
}

AttackRunSummary run_attack(const MlpNetwork& net, const LabeledDataset& train,
                            const RealVector& x, int target_class, const AttackConfig& cfg) {
    net.validate();
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= net.output_dim())
        throw std::invalid_argument("run_attack: target class out of range");
    if (x.size() != net.input_dim()) throw std::invalid_argument("run_attack: input size mismatch");

    AttackRunSummary sum;
    sum.target_class = target_class;
    {
        RealVector out = forward(net, x);
        sum.source_class = static_cast<int>(
            std::max_element(out.begin(), out.end()) - out.begin());
    }

    // anchor: first correctly-classified training image of the target class
    // with the largest score margin over the runner-up
    double best_margin = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = train.images.size();
    for (std::size_t i = 0; i < train.images.size(); ++i) {
        if (train.labels[i] != target_class) continue;
        RealVector out = forward(net, train.images[i]);
        const std::size_t arg = static_cast<std::size_t>(
            std::max_element(out.begin(), out.end()) - out.begin());
        if (arg != static_cast<std::size_t>(target_class)) continue;
        double second = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < out.size(); ++c)
            if (c != arg) second = std::max(second, out[c]);
        const double margin = out[arg] - second;
        if (margin > best_margin) {
            best_margin = margin;
            best_idx = i;
        }
    }
    if (best_idx == train.images.size())
        throw std::invalid_argument("run_attack: no correctly classified anchor for class " +
                                    std::to_string(target_class));
    sum.target_input = train.images[best_idx];
    sum.target_output = forward(net, sum.target_input);

    const std::size_t subset_size = net.output_dim() + cfg.delta;
    switch (cfg.subset_mode) {
        case SubsetMode::LargestStd:
            sum.subset = select_pixels(train, subset_size);
            break;
        case SubsetMode::UserList:
            sum.subset = checked_subset(net, cfg.subset, subset_size);
            break;
        case SubsetMode::Random: {
            std::mt19937_64 rng(cfg.seed);
            std::vector<std::size_t> idx(net.input_dim());
            std::iota(idx.begin(), idx.end(), 0);
            for (std::size_t j = 0; j < subset_size; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, idx.size() - 1);
                std::swap(idx[j], idx[pick(rng)]);
            }
            sum.subset.assign(idx.begin(), idx.begin() + subset_size);
            std::sort(sum.subset.begin(), sum.subset.end());
            break;
        }
    }

    if (sum.target_input == x) {  // already there, nothing to perturb
        sum.result.success = true;
        sum.result.z = x;
        sum.result.final_output = forward(net, x);
        sum.result.failure_kind = FailureKind::None;
        sum.restarts_used = 0;
        return sum;
    }

    const OutputPath path = build_path(net, x, sum.target_input);
    const SubsetContext ctx = make_context(net, x, sum.subset);
    const double eps_target = resolve_eps_target(cfg, path.vertices.back());
    const double eps_progress = resolve_eps_progress(cfg, path);

    constexpr std::size_t WAVE = 16;
    const std::size_t restarts = std::max<std::size_t>(cfg.restarts, 1);
    std::vector<double> watermark;  // best progress per iteration, frozen per wave
    const double kill_margin = 0.05 * path.arc_length;

    AttackResult best_failure;
    best_failure.progress = -1.0;

    for (std::size_t wave_start = 0; wave_start < restarts; wave_start += WAVE) {
        const std::size_t wave_end = std::min(wave_start + WAVE, restarts);
        const std::size_t count = wave_end - wave_start;
        std::vector<EngineOutput> results(count);
        const std::size_t workers = std::min(worker_count(), count);
        std::vector<std::thread> pool;
        auto body = [&](std::size_t slot) {
            for (std::size_t i = slot; i < count; i += workers) {
                EngineParams p;
                p.ctx = &ctx;
                p.path = &path;
                p.eps_target = eps_target;
                p.eps_progress = eps_progress;
                p.max_iters = cfg.max_iters;
                p.delta = cfg.delta;
                p.far_side = cfg.far_side;
                p.reflections_fatal = (cfg.delta == 0);
                p.record_trace = cfg.record_trace;
                p.rng_seed = cfg.seed + 0x9e3779b97f4a7c15ULL * (wave_start + i + 1);
                p.watermark = watermark.empty() ? nullptr : &watermark;
                p.kill_margin = kill_margin;
                results[i] = engine_run(p);
            }
        };
        if (workers <= 1) {
            body(0);
        } else {
            for (std::size_t wk = 0; wk < workers; ++wk) pool.emplace_back(body, wk);
            for (auto& th : pool) th.join();
        }

        for (std::size_t i = 0; i < count; ++i) {
            if (results[i].res.success) {
                sum.result = std::move(results[i].res);
                sum.restarts_used = wave_end;
                return sum;
            }
            if (results[i].res.progress > best_failure.progress)
                best_failure = results[i].res;  // strict > keeps the lowest index on ties
        }
        if (watermark.size() < cfg.max_iters + 1) watermark.resize(cfg.max_iters + 1, 0.0);
        for (std::size_t i = 0; i < count; ++i) {
            const std::vector<double>& curve = results[i].curve;
            double last = curve.empty() ? 0.0 : curve.back();
            for (std::size_t it = 0; it < watermark.size(); ++it) {
                const double v = it < curve.size() ? curve[it] : last;
                watermark[it] = std::max(watermark[it], v);
            }
        }
    }
    sum.result = std::move(best_failure);
    sum.restarts_used = restarts;
    return sum;
}

}  // namespace hamming
