#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "owdl/rng.hpp"
#include "owdl/types.hpp"

namespace owdl {

struct TrainConfig {
    double learning_rate = 0.2;
    int epochs = 40;
    int batch_size = 32;
    double temperature = 2.0;  // tau for the distillation soft targets
    double alpha = 0.5;        // weight of the distillation term
    std::uint64_t seed = 0;

    void check() const {
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be > 0");
        if (epochs <= 0) throw std::invalid_argument("epochs must be > 0");
        if (batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
        if (temperature <= 0) throw std::invalid_argument("temperature must be > 0");
        if (alpha < 0 || alpha > 1) throw std::invalid_argument("alpha must be in [0,1]");
    }
};

// One-hidden-layer dense classifier: input N -> ReLU(H) -> logits C.
// Scalar is templated so experiments run in float while numerical
// validation (gradient checks) can instantiate double.
template <typename S>
struct DenseNetworkT {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    std::array<int, 3> layer_dims{0, 0, 0};  // N, H, C
    Mat w1, w2;                              // H x N, C x H
    Col b1, b2;                              // H, C

    int input_dim() const { return layer_dims[0]; }
    int hidden_dim() const { return layer_dims[1]; }
    int num_classes() const { return layer_dims[2]; }

    bool finite() const {
        return w1.allFinite() && w2.allFinite() && b1.allFinite() && b2.allFinite();
    }

    // Glorot-uniform init, fully determined by the seed.
    static DenseNetworkT init(int n, int h, int c, std::uint64_t seed) {
        if (n <= 0 || h <= 0 || c <= 0)
            throw std::invalid_argument("layer dims must be positive");
        DenseNetworkT net;
        net.layer_dims = {n, h, c};
        SplitMix64 rng(mix_seed(seed, 0x6e657477ull));
        auto fill = [&rng](Mat& m, int rows, int cols, int fan_in, int fan_out) {
            const double a = std::sqrt(6.0 / (fan_in + fan_out));
            m.resize(rows, cols);
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i)
                    m(i, j) = static_cast<S>(rng.next_uniform(-a, a));
        };
        fill(net.w1, h, n, n, h);
        fill(net.w2, c, h, h, c);
        net.b1 = Col::Zero(h);
        net.b2 = Col::Zero(c);
        return net;
    }

    // Batched forward pass; X has one sample per column.
    Mat forward_batch(const Mat& x) const {
        if (x.rows() != input_dim())
            throw std::invalid_argument("forward: input dim mismatch");
        Mat hidden = ((w1 * x).colwise() + b1).cwiseMax(S(0));
        return (w2 * hidden).colwise() + b2;
    }

    Col forward(const Col& x) const { return forward_batch(x); }
};

using DenseNetwork = DenseNetworkT<float>;

// Logits of a single RrfVector (float networks only).
inline Eigen::VectorXf forward(const DenseNetwork& net, const RrfVector& x) {
    if (x.dim() != net.input_dim())
        throw std::invalid_argument("forward: RrfVector dim mismatch");
    return net.forward(x.values);
}

// Temperature softmax with max-subtraction for stability.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
softmax_temp_vec(const Eigen::MatrixBase<Derived>& logits, double tau) {
    using S = typename Derived::Scalar;
    if (tau <= 0) throw std::invalid_argument("softmax_temp: tau must be > 0");
    Eigen::Matrix<S, Eigen::Dynamic, 1> z = logits / static_cast<S>(tau);
    z.array() -= z.maxCoeff();
    Eigen::Matrix<S, Eigen::Dynamic, 1> e = z.array().exp();
    return e / e.sum();
}

inline ProbabilityMap softmax_temp(const Eigen::VectorXf& logits, double tau) {
    if (!logits.allFinite()) throw std::invalid_argument("softmax_temp: non-finite logits");
    return ProbabilityMap{softmax_temp_vec(logits, tau)};
}

// Re-softens stored probabilities to temperature tau: softmax(z/tau) with
// p = softmax(z) is proportional to p^(1/tau).
inline ProbabilityMap temper(const ProbabilityMap& p, double tau) {
    if (tau <= 0) throw std::invalid_argument("temper: tau must be > 0");
    Eigen::ArrayXf a = p.values.array().max(1e-30f).pow(static_cast<float>(1.0 / tau));
    return ProbabilityMap{Vec(a / a.sum())};
}

// Argmax with ties broken toward the lowest class index.
template <typename Derived>
int argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

inline int predict_class(const DenseNetwork& net, const RrfVector& x) {
    return argmax_lowest(forward(net, x));
}

namespace detail {

template <typename S>
struct Gradients {
    typename DenseNetworkT<S>::Mat w1, w2;
    typename DenseNetworkT<S>::Col b1, b2;

    S squared_norm() const {
        return w1.squaredNorm() + w2.squaredNorm() + b1.squaredNorm() + b2.squaredNorm();
    }
};

// Column-wise temperature softmax.
template <typename S>
typename DenseNetworkT<S>::Mat softmax_cols(typename DenseNetworkT<S>::Mat z, double tau) {
    z /= static_cast<S>(tau);
    for (int j = 0; j < z.cols(); ++j) {
        z.col(j).array() -= z.col(j).maxCoeff();
        z.col(j) = z.col(j).array().exp();
        z.col(j) /= z.col(j).sum();
    }
    return z;
}

// Loss and parameter gradients for a minibatch.
//
// Per sample: L = alpha * tau^2 * KL(q_tau || p_tau) + ce_weight * CE(y, p)
// where q_tau is the tempered teacher map. Samples without a soft target
// (soft_mask 0) contribute the plain student loss with weight 1. Passing
// alpha = 0 and no soft targets gives plain cross-entropy training.
template <typename S>
std::pair<S, Gradients<S>> loss_and_grad(const DenseNetworkT<S>& net,
                                         const typename DenseNetworkT<S>::Mat& x,
                                         const std::vector<int>& labels,
                                         const typename DenseNetworkT<S>::Mat* soft_tau,
                                         const std::vector<char>* soft_mask,
                                         double tau, double alpha) {
    using Mat = typename DenseNetworkT<S>::Mat;
    const int m = static_cast<int>(x.cols());
    const S inv_m = S(1) / static_cast<S>(m);

    Mat z1 = (net.w1 * x).colwise() + net.b1;
    Mat a1 = z1.cwiseMax(S(0));
    Mat z2 = (net.w2 * a1).colwise() + net.b2;

    Mat p = softmax_cols<S>(z2, 1.0);
    S loss = 0;
    Mat gz = Mat::Zero(z2.rows(), m);  // dL/dz2, already averaged over the batch

    for (int j = 0; j < m; ++j) {
        const bool has_soft = soft_tau && soft_mask && (*soft_mask)[j];
        const S ce_w = has_soft ? static_cast<S>(1.0 - alpha) : S(1);
        loss -= ce_w * std::log(std::max(p(labels[j], j), S(1e-30)));
        gz.col(j) = ce_w * p.col(j);
        gz(labels[j], j) -= ce_w;
    }

    if (soft_tau && soft_mask) {
        Mat p_tau = softmax_cols<S>(z2, tau);
        const S kl_w = static_cast<S>(alpha * tau * tau);
        const S kl_gw = static_cast<S>(alpha * tau);  // tau^2 * (1/tau) chain factor
        for (int j = 0; j < m; ++j) {
            if (!(*soft_mask)[j]) continue;
            const auto& q = soft_tau->col(j);
            for (int c = 0; c < q.size(); ++c)
                if (q(c) > S(0))
                    loss += kl_w * q(c) * (std::log(q(c)) - std::log(std::max(p_tau(c, j), S(1e-30))));
            gz.col(j) += kl_gw * (p_tau.col(j) - q);
        }
    }

    loss *= inv_m;
    gz *= inv_m;

    Gradients<S> g;
    g.w2 = gz * a1.transpose();
    g.b2 = gz.rowwise().sum();
    Mat da1 = net.w2.transpose() * gz;
    Mat dz1 = (z1.array() > S(0)).select(da1, Mat::Zero(da1.rows(), da1.cols()));
    g.w1 = dz1 * x.transpose();
    g.b1 = dz1.rowwise().sum();
    return {loss, std::move(g)};
}

template <typename S>
void sgd_step(DenseNetworkT<S>& net, const Gradients<S>& g, double lr) {
    const S eta = static_cast<S>(lr);
    net.w1 -= eta * g.w1;
    net.b1 -= eta * g.b1;
    net.w2 -= eta * g.w2;
    net.b2 -= eta * g.b2;
}

// Packs Samples into column matrices; soft targets are tempered here once.
template <typename S>
struct PackedData {
    typename DenseNetworkT<S>::Mat x;
    std::vector<int> labels;
    typename DenseNetworkT<S>::Mat soft_tau;
    std::vector<char> soft_mask;
    bool any_soft = false;
};

template <typename S>
PackedData<S> pack(const DenseNetworkT<S>& net, const std::vector<Sample>& data, double tau) {
    PackedData<S> d;
    const int m = static_cast<int>(data.size());
    d.x.resize(net.input_dim(), m);
    d.labels.resize(m);
    d.soft_mask.assign(m, 0);
    for (int j = 0; j < m; ++j) {
        if (data[j].x.dim() != net.input_dim())
            throw std::invalid_argument("train: sample dim mismatch");
        if (data[j].y < 0 || data[j].y >= net.num_classes())
            throw std::invalid_argument("train: label out of range");
        d.x.col(j) = data[j].x.values.template cast<S>();
        d.labels[j] = data[j].y;
        if (data[j].soft_label) d.any_soft = true;
    }
    if (d.any_soft) {
        d.soft_tau.setZero(net.num_classes(), m);
        for (int j = 0; j < m; ++j) {
            if (!data[j].soft_label) continue;
            const auto& sl = *data[j].soft_label;
            if (!sl.valid())
                throw std::invalid_argument("train: invalid soft label");
            d.soft_tau.col(j) = temper(sl, tau).values.template cast<S>();
            d.soft_mask[j] = 1;
        }
    }
    return d;
}

// Shared minibatch SGD loop. Reports (first epoch loss, last epoch loss).
template <typename S>
std::pair<double, double> run_training(DenseNetworkT<S>& net, const PackedData<S>& d,
                                       const TrainConfig& cfg, bool use_soft,
                                       double alpha) {
    const int m = static_cast<int>(d.x.cols());
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle_rng(mix_seed(cfg.seed, 0x736866ull));

    using Mat = typename DenseNetworkT<S>::Mat;
    double first_loss = 0, last_loss = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0;
        for (int start = 0; start < m; start += cfg.batch_size) {
            const int bs = std::min(cfg.batch_size, m - start);
            Mat xb(d.x.rows(), bs);
            std::vector<int> yb(bs);
            Mat sb;
            std::vector<char> mb;
            if (use_soft) {
                sb.resize(d.soft_tau.rows(), bs);
                mb.resize(bs);
            }
            for (int j = 0; j < bs; ++j) {
                const int src = order[start + j];
                xb.col(j) = d.x.col(src);
                yb[j] = d.labels[src];
                if (use_soft) {
                    sb.col(j) = d.soft_tau.col(src);
                    mb[j] = d.soft_mask[src];
                }
            }
            auto [loss, grads] =
                loss_and_grad<S>(net, xb, yb, use_soft ? &sb : nullptr,
                                 use_soft ? &mb : nullptr, cfg.temperature, alpha);
            if (!std::isfinite(static_cast<double>(loss)))
                throw std::runtime_error("training aborted: non-finite loss at epoch " +
                                         std::to_string(epoch));
            sgd_step(net, grads, cfg.learning_rate);
            epoch_loss += static_cast<double>(loss) * bs;
        }
        epoch_loss /= m;
        if (epoch == 0) first_loss = epoch_loss;
        last_loss = epoch_loss;
    }
    return {first_loss, last_loss};
}

}  // namespace detail

// Cross-entropy training on hard labels.
template <typename S>
DenseNetworkT<S> train_supervised(DenseNetworkT<S> net, const std::vector<Sample>& data,
                                  const TrainConfig& cfg) {
    cfg.check();
    if (data.empty()) throw std::invalid_argument("train_supervised: empty dataset");
    auto packed = detail::pack<S>(net, data, cfg.temperature);
    detail::run_training(net, packed, cfg, /*use_soft=*/false, /*alpha=*/0.0);
    return net;
}

// Hinton-style distillation: tempered-KL term against teacher soft labels
// plus cross-entropy on the hard (pseudo) labels. Samples without a soft
// label fall back to the plain student loss.
template <typename S>
DenseNetworkT<S> distill(DenseNetworkT<S> student, const std::vector<Sample>& transfer_set,
                         const TrainConfig& cfg) {
    cfg.check();
    if (transfer_set.empty()) throw std::invalid_argument("distill: empty transfer set");
    auto packed = detail::pack<S>(student, transfer_set, cfg.temperature);
    const bool use_soft = packed.any_soft && cfg.alpha > 0.0;
    detail::run_training(student, packed, cfg, use_soft, cfg.alpha);
    return student;
}

// Compares backprop gradients against central finite differences on a
// random subset of parameters; returns the worst relative error.
template <typename S>
double gradient_check(const DenseNetworkT<S>& net, const Sample& sample,
                      std::uint64_t seed = 1, int num_probes = 40,
                      double step = 1e-4) {
    using Mat = typename DenseNetworkT<S>::Mat;
    Mat x(net.input_dim(), 1);
    x.col(0) = sample.x.values.template cast<S>();
    std::vector<int> labels{sample.y};

    auto loss_at = [&](const DenseNetworkT<S>& n) {
        return static_cast<double>(
            detail::loss_and_grad<S>(n, x, labels, nullptr, nullptr, 1.0, 0.0).first);
    };
    auto [loss0, g] = detail::loss_and_grad<S>(net, x, labels, nullptr, nullptr, 1.0, 0.0);
    (void)loss0;

    struct Slot { S* param; S grad; };
    DenseNetworkT<S> probe = net;
    std::vector<Slot> slots;
    auto add = [&](Mat& pm, const Mat& gm) {
        for (int i = 0; i < pm.size(); ++i) slots.push_back({pm.data() + i, gm(i)});
    };
    add(probe.w1, g.w1);
    add(probe.w2, g.w2);
    for (int i = 0; i < probe.b1.size(); ++i) slots.push_back({probe.b1.data() + i, g.b1(i)});
    for (int i = 0; i < probe.b2.size(); ++i) slots.push_back({probe.b2.data() + i, g.b2(i)});

    SplitMix64 rng(mix_seed(seed, 0x676364ull));
    double worst = 0;
    for (int t = 0; t < num_probes; ++t) {
        Slot& s = slots[rng.next_below(slots.size())];
        const S saved = *s.param;
        *s.param = saved + static_cast<S>(step);
        const double lp = loss_at(probe);
        *s.param = saved - static_cast<S>(step);
        const double lm = loss_at(probe);
        *s.param = saved;
        const double fd = (lp - lm) / (2 * step);
        const double bp = static_cast<double>(s.grad);
        const double denom = std::max(1e-6, std::abs(fd) + std::abs(bp));
        worst = std::max(worst, std::abs(fd - bp) / denom);
    }
    return worst;
}

// Gradient L2 norm at a single sample, for minimum-of-loss checks.
template <typename S>
double gradient_norm(const DenseNetworkT<S>& net, const Sample& sample) {
    using Mat = typename DenseNetworkT<S>::Mat;
    Mat x(net.input_dim(), 1);
    x.col(0) = sample.x.values.template cast<S>();
    std::vector<int> labels{sample.y};
    auto [loss, g] = detail::loss_and_grad<S>(net, x, labels, nullptr, nullptr, 1.0, 0.0);
    (void)loss;
    return std::sqrt(static_cast<double>(g.squared_norm()));
}

// --- snapshot serialization -------------------------------------------------
// Binary record: magic+version, layer dims, then parameters row-major as
// little-endian doubles. Round-trips exactly for float and double networks.

inline constexpr char kNetMagic[8] = {'O', 'W', 'D', 'L', 'N', 'E', 'T', '1'};

template <typename S>
void save_network(const DenseNetworkT<S>& net, std::ostream& out) {
    out.write(kNetMagic, 8);
    for (int d : net.layer_dims) {
        std::int32_t v = d;
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    auto dump = [&out](const auto& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) {
                double v = static_cast<double>(m(i, j));
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
    };
    dump(net.w1);
    dump(net.b1);
    dump(net.w2);
    dump(net.b2);
    if (!out) throw std::runtime_error("save_network: write failed");
}

template <typename S>
DenseNetworkT<S> load_network(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kNetMagic))
        throw std::runtime_error("load_network: bad magic/version");
    std::int32_t dims[3];
    in.read(reinterpret_cast<char*>(dims), 12);
    if (!in || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
        throw std::runtime_error("load_network: bad dims");
    DenseNetworkT<S> net;
    net.layer_dims = {dims[0], dims[1], dims[2]};
    net.w1.resize(dims[1], dims[0]);
    net.b1.resize(dims[1]);
    net.w2.resize(dims[2], dims[1]);
    net.b2.resize(dims[2]);
    auto slurp = [&in](auto& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) {
                double v;
                in.read(reinterpret_cast<char*>(&v), 8);
                m(i, j) = static_cast<S>(v);
            }
    };
    slurp(net.w1);
    slurp(net.b1);
    slurp(net.w2);
    slurp(net.b2);
    if (!in) throw std::runtime_error("load_network: truncated record");
    return net;
}

}  // namespace owdl
