#include "hamming/relunet.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace hamming {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<const RowMat>;
using EVec = Eigen::VectorXd;

MapMat wmap(const Layer& l) {
    return MapMat(l.w.data.data(), static_cast<Eigen::Index>(l.w.rows),
                  static_cast<Eigen::Index>(l.w.cols));
}

Eigen::Map<const EVec> bmap(const Layer& l) {
    return Eigen::Map<const EVec>(l.b.data(), static_cast<Eigen::Index>(l.b.size()));
}

}  // namespace

std::size_t MlpNetwork::hidden_count() const {
    std::size_t t = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) t += layers[l].w.rows;
    return t;
}

void MlpNetwork::validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& lay = layers[l];
        if (lay.w.rows == 0 || lay.w.cols == 0)
            throw std::invalid_argument("layer " + std::to_string(l) + " has empty weights");
        if (lay.w.data.size() != lay.w.rows * lay.w.cols)
            throw std::invalid_argument("layer " + std::to_string(l) + " weight buffer size mismatch");
        if (lay.b.size() != lay.w.rows)
            throw std::invalid_argument("layer " + std::to_string(l) + " bias size mismatch");
        if (l > 0 && lay.w.cols != layers[l - 1].w.rows)
            throw std::invalid_argument("layer " + std::to_string(l) + " input width breaks the chain");
        for (double v : lay.w.data)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite weight in layer " + std::to_string(l));
        for (double v : lay.b)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite bias in layer " + std::to_string(l));
    }
}

RealVector forward(const MlpNetwork& net, const RealVector& x) {
    if (x.size() != net.input_dim()) throw std::invalid_argument("forward: input size mismatch");
    RealVector cur = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        RealVector next = matvec(net.layers[l].w, cur);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += net.layers[l].b[i];
        if (l + 1 < net.layers.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cur = std::move(next);
    }
    return cur;
}

ActivationPattern activation_pattern(const MlpNetwork& net, const RealVector& x) {
    if (x.size() != net.input_dim()) throw std::invalid_argument("activation_pattern: input size mismatch");
    ActivationPattern pat;
    RealVector cur = x;
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        RealVector pre = matvec(net.layers[l].w, cur);
        std::vector<std::uint8_t> bits(pre.size());
        for (std::size_t u = 0; u < pre.size(); ++u) {
            pre[u] += net.layers[l].b[u];
            if (std::fabs(pre[u]) <= ACTIVATION_BOUNDARY_TOL)
                throw OnBoundaryError(l, u, "pre-activation within tolerance of zero at layer " +
                                                std::to_string(l) + " unit " + std::to_string(u));
            bits[u] = pre[u] > 0.0 ? 1 : 0;
        }
        pat.push_back(std::move(bits));
        for (double& v : pre) v = v > 0.0 ? v : 0.0;
        cur = std::move(pre);
    }
    return pat;
}

LocalAffineMap local_affine_map(const MlpNetwork& net, const RealVector& x,
                                const std::vector<std::size_t>& subset) {
    if (subset.empty()) throw std::invalid_argument("local_affine_map: empty subset");
    for (std::size_t j : subset)
        if (j >= net.input_dim()) throw std::invalid_argument("local_affine_map: subset index out of range");

    LocalAffineMap out;
    out.subset = subset;
    out.pattern = activation_pattern(net, x);
    out.c = forward(net, x);

    // chain = d forward / d x restricted to subset columns, masked layer by
    // layer with the activation pattern at x
    Matrix chain(net.layers[0].w.rows, subset.size());
    for (std::size_t i = 0; i < chain.rows; ++i)
        for (std::size_t j = 0; j < subset.size(); ++j)
            chain.at(i, j) = net.layers[0].w.at(i, subset[j]);
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        for (std::size_t u = 0; u < chain.rows; ++u)
            if (!out.pattern[l][u])
                for (std::size_t j = 0; j < chain.cols; ++j) chain.at(u, j) = 0.0;
        chain = matmul(net.layers[l + 1].w, chain);
    }
    out.a = std::move(chain);
    return out;
}

std::optional<BoundaryHit> step_to_boundary(const MlpNetwork& net, const RealVector& x,
                                            const RealVector& dir, double tau_max) {
    if (dir.size() != net.input_dim()) throw std::invalid_argument("step_to_boundary: dir size mismatch");
    if (!(tau_max > 0.0)) throw std::invalid_argument("step_to_boundary: tau_max must be positive");

    // values and rates through the frozen pattern; exact until the first
    // crossing, which is all we report
    RealVector val = x;
    RealVector rate = dir;
    double best_tau = std::numeric_limits<double>::infinity();
    std::size_t best_layer = 0, best_unit = 0;
    bool found = false;

    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        RealVector pre = matvec(net.layers[l].w, val);
        RealVector prate = matvec(net.layers[l].w, rate);
        for (std::size_t u = 0; u < pre.size(); ++u) {
            pre[u] += net.layers[l].b[u];
            if (std::fabs(pre[u]) <= ACTIVATION_BOUNDARY_TOL)
                throw OnBoundaryError(l, u, "step_to_boundary: start point on boundary");
            if (prate[u] != 0.0) {
                const double tau = -pre[u] / prate[u];
                if (tau > 0.0 && tau <= tau_max) {
                    // lexicographic tie-break keeps crossings reproducible
                    if (!found || tau < best_tau - STEP_TIE_TOL) {
                        best_tau = tau;
                        best_layer = l;
                        best_unit = u;
                        found = true;
                    }
                }
            }
        }
        RealVector nval(pre.size()), nrate(pre.size());
        for (std::size_t u = 0; u < pre.size(); ++u) {
            const bool active = pre[u] > 0.0;
            nval[u] = active ? pre[u] : 0.0;
            nrate[u] = active ? prate[u] : 0.0;
        }
        val = std::move(nval);
        rate = std::move(nrate);
    }
    if (!found) return std::nullopt;
    return BoundaryHit{best_tau, best_layer, best_unit};
}

double batch_loss_grad(const MlpNetwork& net, const LabeledDataset& data,
                       const std::vector<std::size_t>& batch, std::vector<Layer>& grads) {
    const std::size_t bsz = batch.size();
    const std::size_t depth = net.layers.size();
    if (bsz == 0) throw std::invalid_argument("batch_loss_grad: empty batch");

    grads.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        grads[l].w = Matrix(net.layers[l].w.rows, net.layers[l].w.cols, 0.0);
        grads[l].b.assign(net.layers[l].b.size(), 0.0);
    }

    RowMat x(bsz, net.input_dim());
    for (std::size_t i = 0; i < bsz; ++i)
        for (std::size_t j = 0; j < net.input_dim(); ++j) x(i, j) = data.images[batch[i]][j];

    // forward, keeping post-activation values per layer
    std::vector<RowMat> act(depth + 1);
    act[0] = std::move(x);
    for (std::size_t l = 0; l < depth; ++l) {
        act[l + 1].noalias() = act[l] * wmap(net.layers[l]).transpose();
        act[l + 1].rowwise() += bmap(net.layers[l]).transpose();
        if (l + 1 < depth) act[l + 1] = act[l + 1].cwiseMax(0.0);
    }

    // softmax cross-entropy, numerically shifted per row
    RowMat p = act[depth];
    double loss = 0.0;
    for (std::size_t i = 0; i < bsz; ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        const double z = p.row(i).sum();
        p.row(i) /= z;
        const int lab = data.labels[batch[i]];
        loss -= std::log(std::max(p(i, lab), 1e-300));
    }
    loss /= static_cast<double>(bsz);

    RowMat delta = p;  // d loss / d scores, mean over the batch
    for (std::size_t i = 0; i < bsz; ++i) delta(i, data.labels[batch[i]]) -= 1.0;
    delta /= static_cast<double>(bsz);

    for (std::size_t li = depth; li-- > 0;) {
        Eigen::Map<RowMat> gw(grads[li].w.data.data(), static_cast<Eigen::Index>(grads[li].w.rows),
                              static_cast<Eigen::Index>(grads[li].w.cols));
        gw.noalias() = delta.transpose() * act[li];
        Eigen::Map<EVec> gb(grads[li].b.data(), static_cast<Eigen::Index>(grads[li].b.size()));
        gb = delta.colwise().sum().transpose();
        if (li > 0) {
            RowMat back = delta * wmap(net.layers[li]);
            delta = back.cwiseProduct((act[li].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

MlpNetwork train_mlp(const LabeledDataset& train, const TrainConfig& cfg,
                     const std::function<void(std::size_t, double, double)>& on_epoch) {
    if (train.images.empty()) throw std::invalid_argument("train_mlp: empty dataset");
    if (train.images.size() != train.labels.size())
        throw std::invalid_argument("train_mlp: image/label count mismatch");
    std::size_t classes = cfg.classes;
    if (classes == 0) {
        int mx = 0;
        for (int l : train.labels) mx = std::max(mx, l);
        classes = static_cast<std::size_t>(mx) + 1;
    }
    const std::size_t dim = train.dim;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MlpNetwork net;
    net.layers.resize(2);
    auto he_init = [&](Layer& l, std::size_t rows, std::size_t cols) {
        l.w = Matrix(rows, cols);
        const double s = std::sqrt(2.0 / static_cast<double>(cols));
        for (double& v : l.w.data) v = s * gauss(rng);
        l.b.assign(rows, 0.0);
    };
    he_init(net.layers[0], cfg.width, dim);
    he_init(net.layers[1], classes, cfg.width);

    std::vector<std::size_t> order(train.images.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Layer> grads;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr * std::pow(cfg.lr_decay,
                                            static_cast<double>(epoch / cfg.decay_every));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(start + cfg.batch, order.size());
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
            epoch_loss += batch_loss_grad(net, train, batch, grads);
            ++batches;
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                double* w = net.layers[l].w.data.data();
                const double* g = grads[l].w.data.data();
                const std::size_t nw = net.layers[l].w.data.size();
                for (std::size_t i = 0; i < nw; ++i) w[i] -= lr * g[i];
                for (std::size_t i = 0; i < net.layers[l].b.size(); ++i)
                    net.layers[l].b[i] -= lr * grads[l].b[i];
            }
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(batches), lr);
    }
    return net;
}

double accuracy(const MlpNetwork& net, const LabeledDataset& data) {
    if (data.images.empty()) throw std::invalid_argument("accuracy: empty dataset");
    const std::size_t chunk = 512;
    std::size_t correct = 0;
    RowMat x;
    for (std::size_t start = 0; start < data.images.size(); start += chunk) {
        const std::size_t end = std::min(start + chunk, data.images.size());
        x.resize(static_cast<Eigen::Index>(end - start), static_cast<Eigen::Index>(data.dim));
        for (std::size_t i = start; i < end; ++i)
            for (std::size_t j = 0; j < data.dim; ++j)
                x(static_cast<Eigen::Index>(i - start), static_cast<Eigen::Index>(j)) = data.images[i][j];
        RowMat cur = std::move(x);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            RowMat next = cur * wmap(net.layers[l]).transpose();
            next.rowwise() += bmap(net.layers[l]).transpose();
            if (l + 1 < net.layers.size()) next = next.cwiseMax(0.0);
            cur = std::move(next);
        }
        for (Eigen::Index i = 0; i < cur.rows(); ++i) {
            Eigen::Index arg = 0;
            cur.row(i).maxCoeff(&arg);
            if (static_cast<int>(arg) == data.labels[start + static_cast<std::size_t>(i)]) ++correct;
        }
        x = RowMat();
    }
    return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

std::vector<std::size_t> select_pixels(const LabeledDataset& data, std::size_t count) {
    if (data.images.empty()) throw std::invalid_argument("select_pixels: empty dataset");
    if (count == 0 || count > data.dim) throw std::invalid_argument("select_pixels: bad count");
    const double n = static_cast<double>(data.images.size());
    std::vector<double> sum(data.dim, 0.0), sumsq(data.dim, 0.0);
    for (const RealVector& img : data.images)
        for (std::size_t j = 0; j < data.dim; ++j) {
            sum[j] += img[j];
            sumsq[j] += img[j] * img[j];
        }
    std::vector<std::pair<double, std::size_t>> ranked(data.dim);
    for (std::size_t j = 0; j < data.dim; ++j) {
        const double mean = sum[j] / n;
        ranked[j] = {std::sqrt(std::max(sumsq[j] / n - mean * mean, 0.0)), j};
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = ranked[i].second;
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace hamming
