#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nplb/error.hpp"
#include "nplb/losses.hpp"
#include "nplb/matrix.hpp"
#include "nplb/model.hpp"
#include "nplb/random.hpp"

namespace nplb {

struct TrainConfig {
    double lr = 0.001;
    double gamma = 0.95;       // exponential decay factor
    size_t decay_every = 50;   // epochs between decay steps
    size_t epochs = 1000;
    Margin margin{1.0};
    LossKind loss = LossKind::nplb();
    size_t batch_size = 256;
    size_t n_triplets = 20000;
    uint64_t seed = 0;

    // Network shape; defaults follow the reference chain.
    size_t embed_dim = 32;
    size_t hidden1 = 512;
    size_t hidden2 = 256;
    double dropout_rate = 0.1;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
        if (!(margin.epsilon > 0.0) || !std::isfinite(margin.epsilon)) {
            throw ConfigError("margin must be finite and positive");
        }
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (n_triplets < 1) throw ConfigError("n_triplets must be >= 1");
        if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
    }
};

struct TripletIndices {
    size_t anchor;
    size_t positive;
    size_t negative;
};

using TripletIndexBatch = std::vector<TripletIndices>;

// Offline triplet construction from labels: anchor uniform over records whose
// class has a positive available, positive uniform over the same class
// (excluding the anchor), negative uniform over all other classes.
inline TripletIndexBatch sample_triplets(std::span<const int> labels, size_t n, RandomSource& rng) {
    const size_t total = labels.size();
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < total; ++i) by_class[labels[i]].push_back(i);
    if (by_class.size() < 2) throw SamplingError("need at least 2 classes to form triplets");

    bool any_eligible = false;
    for (const auto& [label, members] : by_class) {
        if (members.size() >= 2) any_eligible = true;
    }
    if (!any_eligible) throw SamplingError("no class has >= 2 members; no valid positive exists");

    TripletIndexBatch out;
    out.reserve(n);
    for (size_t t = 0; t < n; ++t) {
        // Rejection on singleton anchor classes; an eligible class exists.
        size_t anchor;
        const std::vector<size_t>* cls = nullptr;
        do {
            anchor = rng.index(total);
            cls = &by_class[labels[anchor]];
        } while (cls->size() < 2);

        // Uniform over the class minus the anchor: draw among the first
        // size-1 positions and remap a hit on the anchor to the last slot.
        size_t positive = (*cls)[rng.index(cls->size() - 1)];
        if (positive == anchor) positive = cls->back();

        size_t negative_rank = rng.index(total - cls->size());
        size_t negative = total;  // resolved below
        size_t skipped = 0;
        for (const auto& [label, members] : by_class) {
            if (label == labels[anchor]) continue;
            if (negative_rank < skipped + members.size()) {
                negative = members[negative_rank - skipped];
                break;
            }
            skipped += members.size();
        }
        out.push_back({anchor, positive, negative});
    }
    return out;
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Gradients m;
    Gradients v;
    size_t t = 0;
    AdamConfig config;

    static AdamState for_params(const ModelParams& params, AdamConfig cfg = {}) {
        return {Gradients::zeros_like(params), Gradients::zeros_like(params), 0, cfg};
    }
};

namespace detail {

inline void adam_update_span(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                             std::span<double> v, double lr_now, double bc1, double bc2,
                             const AdamConfig& cfg) {
    for (size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= lr_now * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

}  // namespace detail

// One bias-corrected Adam step over every parameter tensor.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr_now) {
    if (grads.weights.size() != params.weights.size()) throw DimensionError("adam_step: gradient shape mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.t));
    for (size_t l = 0; l < params.weights.size(); ++l) {
        if (grads.weights[l].rows() != params.weights[l].rows() ||
            grads.weights[l].cols() != params.weights[l].cols() ||
            grads.biases[l].size() != params.biases[l].size()) {
            throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
        }
        detail::adam_update_span(params.weights[l].data(), grads.weights[l].data(), state.m.weights[l].data(),
                                 state.v.weights[l].data(), lr_now, bc1, bc2, state.config);
        detail::adam_update_span(params.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l],
                                 lr_now, bc1, bc2, state.config);
        detail::adam_update_span({&params.prelu_slopes[l], 1}, {&grads.prelu_slopes[l], 1},
                                 {&state.m.prelu_slopes[l], 1}, {&state.v.prelu_slopes[l], 1}, lr_now, bc1,
                                 bc2, state.config);
    }
}

// lr * gamma^floor(epoch / decay_every)
inline double lr_schedule(const TrainConfig& config, size_t epoch) {
    return config.lr * std::pow(config.gamma, static_cast<double>(epoch / config.decay_every));
}

struct EpochLog {
    size_t epoch;
    double lr;
    double mean_loss;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
};

namespace detail {

// Mean batch loss plus gradients w.r.t. the three embedding matrices.
inline double batch_loss_and_embedding_grads(const LossKind& kind, const Margin& margin, const Matrix& emb_a,
                                             const Matrix& emb_p, const Matrix& emb_n, Matrix& grad_a,
                                             Matrix& grad_p, Matrix& grad_n) {
    const size_t batch = emb_a.rows();
    const double inv = 1.0 / static_cast<double>(batch);
    double loss_sum = 0.0;
    grad_a = Matrix(batch, emb_a.cols());
    grad_p = Matrix(batch, emb_a.cols());
    grad_n = Matrix(batch, emb_a.cols());
    for (size_t i = 0; i < batch; ++i) {
        const auto geom = TripletGeometry::from_points(emb_a.row(i), emb_p.row(i), emb_n.row(i));
        loss_sum += triplet_loss(kind, geom, margin);
        const TripletGradient g = loss_gradient(kind, emb_a.row(i), emb_p.row(i), emb_n.row(i), margin);
        for (size_t c = 0; c < emb_a.cols(); ++c) {
            grad_a(i, c) = g.anchor[c] * inv;
            grad_p(i, c) = g.positive[c] * inv;
            grad_n(i, c) = g.negative[c] * inv;
        }
    }
    return loss_sum * inv;
}

inline void accumulate(Gradients& into, const Gradients& other) {
    for (size_t l = 0; l < into.weights.size(); ++l) {
        for (size_t i = 0; i < into.weights[l].size(); ++i) {
            into.weights[l].data()[i] += other.weights[l].data()[i];
        }
        for (size_t i = 0; i < into.biases[l].size(); ++i) into.biases[l][i] += other.biases[l][i];
        into.prelu_slopes[l] += other.prelu_slopes[l];
    }
}

inline Matrix gather_rows(const Matrix& features, const TripletIndexBatch& triplets, size_t begin, size_t end,
                          size_t TripletIndices::* member) {
    Matrix out(end - begin, features.cols());
    for (size_t i = begin; i < end; ++i) out.set_row(i - begin, features.row(triplets[i].*member));
    return out;
}

}  // namespace detail

// End-to-end training: offline triplets sampled once, iterated in a fresh
// shuffled order each epoch; each step forwards anchors/positives/negatives
// with dropout, backpropagates the batch loss, and applies one Adam step.
// Fully determined by config.seed.
inline TrainResult train(const Matrix& features, std::span<const int> labels, const TrainConfig& config) {
    config.validate();
    if (features.rows() == 0) throw DataError("train: empty dataset");
    if (features.rows() != labels.size()) throw DimensionError("train: labels/rows mismatch");

    RandomSource init_rng = RandomSource(config.seed).derive(1);
    RandomSource triplet_rng = RandomSource(config.seed).derive(2);
    RandomSource shuffle_rng = RandomSource(config.seed).derive(3);
    RandomSource dropout_rng = RandomSource(config.seed).derive(4);

    TrainResult result;
    result.params = build_model(features.cols(), config.embed_dim, init_rng, config.hidden1, config.hidden2,
                                config.dropout_rate);
    if (config.epochs == 0) return result;

    const TripletIndexBatch triplets = sample_triplets(labels, config.n_triplets, triplet_rng);
    AdamState adam = AdamState::for_params(result.params);

    std::vector<size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    TripletIndexBatch epoch_triplets(triplets.size());

    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr_now = lr_schedule(config, epoch);
        // Fisher-Yates with our own rng for reproducibility.
        for (size_t i = order.size(); i-- > 1;) {
            std::swap(order[i], order[shuffle_rng.index(i + 1)]);
        }
        for (size_t i = 0; i < order.size(); ++i) epoch_triplets[i] = triplets[order[i]];

        double loss_sum = 0.0;
        for (size_t begin = 0; begin < epoch_triplets.size(); begin += config.batch_size) {
            const size_t end = std::min(begin + config.batch_size, epoch_triplets.size());
            Matrix batch_a = detail::gather_rows(features, epoch_triplets, begin, end, &TripletIndices::anchor);
            Matrix batch_p = detail::gather_rows(features, epoch_triplets, begin, end, &TripletIndices::positive);
            Matrix batch_n = detail::gather_rows(features, epoch_triplets, begin, end, &TripletIndices::negative);

            auto [emb_a, trace_a] = forward(result.params, batch_a, true, dropout_rng);
            auto [emb_p, trace_p] = forward(result.params, batch_p, true, dropout_rng);
            auto [emb_n, trace_n] = forward(result.params, batch_n, true, dropout_rng);

            Matrix grad_a, grad_p, grad_n;
            const double batch_loss = detail::batch_loss_and_embedding_grads(
                config.loss, config.margin, emb_a, emb_p, emb_n, grad_a, grad_p, grad_n);
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(begin / config.batch_size));
            }
            loss_sum += batch_loss * static_cast<double>(end - begin);

            Gradients grads = backward(result.params, trace_a, grad_a);
            detail::accumulate(grads, backward(result.params, trace_p, grad_p));
            detail::accumulate(grads, backward(result.params, trace_n, grad_n));
            adam_step(result.params, grads, adam, lr_now);
        }
        result.log.push_back({epoch, lr_now, loss_sum / static_cast<double>(epoch_triplets.size())});
    }
    return result;
}

}  // namespace nplb
