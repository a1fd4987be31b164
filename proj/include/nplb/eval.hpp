#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nplb/distance.hpp"
#include "nplb/error.hpp"
#include "nplb/losses.hpp"
#include "nplb/matrix.hpp"
#include "nplb/random.hpp"
#include "nplb/trainer.hpp"

namespace nplb {

// Majority vote over the k Euclidean-nearest training points. Ties broken by
// the smallest summed distance among tied labels, then by label order.
inline std::vector<int> knn_predict(const Matrix& train_embeddings, std::span<const int> train_labels,
                                    const Matrix& query_embeddings, size_t k) {
    if (train_embeddings.rows() != train_labels.size()) throw DimensionError("knn: labels/rows mismatch");
    if (k < 1 || k > train_embeddings.rows()) {
        throw ConfigError("knn: k=" + std::to_string(k) + " outside [1, train size " +
                          std::to_string(train_embeddings.rows()) + "]");
    }
    if (train_embeddings.cols() != query_embeddings.cols()) throw DimensionError("knn: embedding dim mismatch");

    std::vector<int> predictions(query_embeddings.rows());
    std::vector<std::pair<double, size_t>> dists(train_embeddings.rows());
    for (size_t q = 0; q < query_embeddings.rows(); ++q) {
        for (size_t t = 0; t < train_embeddings.rows(); ++t) {
            dists[t] = {euclidean_distance(query_embeddings.row(q), train_embeddings.row(t)), t};
        }
        std::partial_sort(dists.begin(), dists.begin() + static_cast<long>(k), dists.end());
        std::map<int, std::pair<size_t, double>> votes;  // label -> (count, summed distance)
        for (size_t i = 0; i < k; ++i) {
            auto& v = votes[train_labels[dists[i].second]];
            v.first += 1;
            v.second += dists[i].first;
        }
        int best_label = votes.begin()->first;
        std::pair<size_t, double> best = votes.begin()->second;
        for (const auto& [label, v] : votes) {
            if (v.first > best.first || (v.first == best.first && v.second < best.second)) {
                best_label = label;
                best = v;
            }
        }
        predictions[q] = best_label;
    }
    return predictions;
}

struct F1Scores {
    double weighted = 0.0;
    double micro = 0.0;
    std::map<int, double> per_class;
};

// Per-class F1 = 2PR/(P+R) (0 when undefined); weighted = support-weighted
// mean over true classes; micro = F1 of the pooled counts.
inline F1Scores f1_scores(std::span<const int> true_labels, std::span<const int> predicted_labels) {
    if (true_labels.size() != predicted_labels.size()) throw DimensionError("f1: length mismatch");
    if (true_labels.empty()) throw DataError("f1: empty input");

    struct Counts {
        size_t tp = 0, fp = 0, fn = 0, support = 0;
    };
    std::map<int, Counts> counts;
    for (size_t i = 0; i < true_labels.size(); ++i) {
        counts[true_labels[i]].support += 1;
        if (true_labels[i] == predicted_labels[i]) {
            counts[true_labels[i]].tp += 1;
        } else {
            counts[true_labels[i]].fn += 1;
            counts[predicted_labels[i]].fp += 1;
        }
    }

    F1Scores out;
    size_t tp_all = 0, fp_all = 0, fn_all = 0;
    for (const auto& [label, c] : counts) {
        const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
        const double f1 = denom > 0.0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
        out.per_class[label] = f1;
        out.weighted += f1 * static_cast<double>(c.support);
        tp_all += c.tp;
        fp_all += c.fp;
        fn_all += c.fn;
    }
    out.weighted /= static_cast<double>(true_labels.size());
    const double micro_denom = static_cast<double>(2 * tp_all + fp_all + fn_all);
    out.micro = micro_denom > 0.0 ? 2.0 * static_cast<double>(tp_all) / micro_denom : 0.0;
    return out;
}

// --- synthetic benchmark data -----------------------------------------------

// Anisotropic Gaussian blobs with overlapping classes: random unit-ish
// centers scaled by center_scale, per-class per-dimension stddevs drawn
// uniformly from [std_min, std_max].
struct BlobSpec {
    size_t n_classes = 3;
    size_t per_class = 200;
    size_t dim = 20;
    double center_scale = 3.0;
    double std_min = 0.75;
    double std_max = 1.75;
};

struct LabeledData {
    Matrix features;
    std::vector<int> labels;
};

inline LabeledData make_blobs(const BlobSpec& spec, RandomSource& rng) {
    if (spec.n_classes < 1 || spec.per_class < 1 || spec.dim < 1) throw ConfigError("make_blobs: bad spec");
    Matrix centers(spec.n_classes, spec.dim);
    for (double& v : centers.data()) v = rng.normal() * spec.center_scale / std::sqrt(static_cast<double>(spec.dim));
    Matrix stds(spec.n_classes, spec.dim);
    for (double& v : stds.data()) v = rng.uniform(spec.std_min, spec.std_max);

    LabeledData out;
    out.features = Matrix(spec.n_classes * spec.per_class, spec.dim);
    out.labels.resize(spec.n_classes * spec.per_class);
    size_t row = 0;
    for (size_t c = 0; c < spec.n_classes; ++c) {
        for (size_t i = 0; i < spec.per_class; ++i, ++row) {
            for (size_t d = 0; d < spec.dim; ++d) {
                out.features(row, d) = centers(c, d) + stds(c, d) * rng.normal();
            }
            out.labels[row] = static_cast<int>(c);
        }
    }
    return out;
}

// Stratified index split; every class contributes round(fraction * n) rows to
// the first side (clamped so both sides stay non-empty when n >= 2).
inline std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split_indices(
    std::span<const int> labels, double fraction, RandomSource& rng) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
    std::map<int, std::vector<size_t>> strata;
    for (size_t i = 0; i < labels.size(); ++i) strata[labels[i]].push_back(i);
    std::pair<std::vector<size_t>, std::vector<size_t>> out;
    for (auto& [label, indices] : strata) {
        for (size_t i = indices.size(); i-- > 1;) std::swap(indices[i], indices[rng.index(i + 1)]);
        const size_t n = indices.size();
        size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
        if (n >= 2) k = std::clamp<size_t>(k, 1, n - 1);
        for (size_t i = 0; i < n; ++i) (i < k ? out.first : out.second).push_back(indices[i]);
    }
    return out;
}

// --- multi-seed benchmark -----------------------------------------------------

struct BenchmarkSpec {
    BlobSpec data;
    std::vector<LossKind> losses = {LossKind::traditional(), LossKind::distance_swap(), LossKind::nplb()};
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    size_t knn_k = 50;
    double train_fraction = 0.8;
    TrainConfig train;  // shared across losses; seed overridden per run

    void validate() const {
        if (seeds.empty()) throw ConfigError("benchmark needs at least one seed");
        if (losses.empty()) throw ConfigError("benchmark needs at least one loss kind");
        if (knn_k < 1) throw ConfigError("knn k must be >= 1");
    }
};

// Desk-scale defaults: small network, few epochs, minutes not hours.
inline BenchmarkSpec default_benchmark_spec() {
    BenchmarkSpec spec;
    spec.train.epochs = 40;
    spec.train.n_triplets = 2000;
    spec.train.batch_size = 128;
    spec.train.hidden1 = 64;
    spec.train.hidden2 = 32;
    spec.train.embed_dim = 8;
    return spec;
}

struct BenchmarkEntry {
    LossKind loss;
    std::vector<double> weighted_f1;  // per seed
    std::vector<double> micro_f1;
    std::vector<double> mean_unif;

    double mean(const std::vector<double>& v) const {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    // Population std; a single seed reports 0.
    double std(const std::vector<double>& v) const {
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size()));
    }
};

// One run per (seed, loss): generate blobs, stratified split, train with the
// shared config, embed both sides in inference mode, kNN-classify the test
// side, and score. Identical seeds feed every loss so rows are comparable.
inline std::vector<BenchmarkEntry> run_benchmark(const BenchmarkSpec& spec) {
    spec.validate();
    spec.train.validate();
    std::vector<BenchmarkEntry> entries;
    for (const LossKind& loss : spec.losses) entries.push_back({loss, {}, {}, {}});

    for (uint64_t seed : spec.seeds) {
        RandomSource data_rng = RandomSource(seed).derive(100);
        const LabeledData data = make_blobs(spec.data, data_rng);
        RandomSource split_rng = RandomSource(seed).derive(101);
        const auto [train_idx, test_idx] = stratified_split_indices(data.labels, spec.train_fraction, split_rng);
        if (spec.knn_k > train_idx.size()) {
            throw ConfigError("benchmark: knn k exceeds train split size " + std::to_string(train_idx.size()));
        }

        Matrix train_x(train_idx.size(), data.features.cols());
        std::vector<int> train_y(train_idx.size());
        for (size_t i = 0; i < train_idx.size(); ++i) {
            train_x.set_row(i, data.features.row(train_idx[i]));
            train_y[i] = data.labels[train_idx[i]];
        }
        Matrix test_x(test_idx.size(), data.features.cols());
        std::vector<int> test_y(test_idx.size());
        for (size_t i = 0; i < test_idx.size(); ++i) {
            test_x.set_row(i, data.features.row(test_idx[i]));
            test_y[i] = data.labels[test_idx[i]];
        }

        for (size_t li = 0; li < spec.losses.size(); ++li) {
            TrainConfig config = spec.train;
            config.loss = spec.losses[li];
            config.seed = seed;
            const TrainResult result = train(train_x, train_y, config);

            const Matrix train_emb = infer(result.params, train_x);
            const Matrix test_emb = infer(result.params, test_x);
            const std::vector<int> predicted = knn_predict(train_emb, train_y, test_emb, spec.knn_k);
            const F1Scores scores = f1_scores(test_y, predicted);

            entries[li].weighted_f1.push_back(scores.weighted);
            entries[li].micro_f1.push_back(scores.micro);
            entries[li].mean_unif.push_back(mean_uniformity(class_density_metrics(test_emb, test_y)));
        }
    }
    return entries;
}

// loss kind x {weighted_f1_mean, weighted_f1_std, micro_f1_mean, micro_f1_std, mean_unif}
inline void write_benchmark_report(std::ostream& os, const std::vector<BenchmarkEntry>& entries) {
    os << "loss,weighted_f1_mean,weighted_f1_std,micro_f1_mean,micro_f1_std,mean_unif\n";
    char buf[160];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", e.loss.name().c_str(),
                      e.mean(e.weighted_f1), e.std(e.weighted_f1), e.mean(e.micro_f1), e.std(e.micro_f1),
                      e.mean(e.mean_unif));
        os << buf;
    }
}

}  // namespace nplb
