#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nplb/cohort.hpp"
#include "nplb/distance.hpp"
#include "nplb/error.hpp"
#include "nplb/matrix.hpp"
#include "nplb/model.hpp"
#include "nplb/stats.hpp"

namespace nplb {

enum class RiskGroup { Normal, LowerRisk, HigherRisk, Unassigned };

inline std::string to_string(RiskGroup g) {
    switch (g) {
        case RiskGroup::Normal: return "Normal";
        case RiskGroup::LowerRisk: return "LowerRisk";
        case RiskGroup::HigherRisk: return "HigherRisk";
        case RiskGroup::Unassigned: return "Unassigned";
    }
    return "?";
}

// Closed distance interval derived from the inner-q percent of the reference
// population.
struct ThresholdInterval {
    double t_lower = 0.0;
    double t_upper = 0.0;
    double q = 0.0;

    bool contains(double score) const { return score >= t_lower && score <= t_upper; }
};

// s_q(p) = d(reference, patient) for the backend metric.
inline double health_score(std::span<const double> patient_repr, std::span<const double> reference) {
    return euclidean_distance(reference, patient_repr);
}

template <typename Metric>
double health_score(std::span<const double> patient_repr, std::span<const double> reference, Metric&& metric) {
    return metric(reference, patient_repr);
}

inline double similarity(std::span<const double> x, std::span<const double> y) {
    return similarity_from_distance(euclidean_distance(x, y));
}

template <typename Metric>
double similarity(std::span<const double> x, std::span<const double> y, Metric&& metric) {
    return similarity_from_distance(metric(x, y));
}

// Distance backends of the risk framework: Euclidean on raw features,
// Mahalanobis on raw features (per-cell covariance), Euclidean on the P0
// subset, and Euclidean on learned embeddings.
struct DistanceBackend {
    enum class Kind { RawEuclidean, Mahalanobis, P0Euclidean, EmbeddingEuclidean };

    Kind kind = Kind::RawEuclidean;
    std::vector<std::string> feature_subset;  // P0Euclidean
    std::optional<ModelParams> model;         // EmbeddingEuclidean

    static DistanceBackend raw_euclidean() { return {Kind::RawEuclidean, {}, {}}; }
    static DistanceBackend mahalanobis() { return {Kind::Mahalanobis, {}, {}}; }

    static DistanceBackend p0_euclidean(std::vector<std::string> features = p0_feature_names()) {
        if (features.empty()) throw ConfigError("P0 backend needs a non-empty feature subset");
        return {Kind::P0Euclidean, std::move(features), {}};
    }

    static DistanceBackend embedding_euclidean(ModelParams model) {
        return {Kind::EmbeddingEuclidean, {}, std::move(model)};
    }

    std::string name() const {
        switch (kind) {
            case Kind::RawEuclidean: return "raw";
            case Kind::Mahalanobis: return "mahalanobis";
            case Kind::P0Euclidean: return "p0";
            case Kind::EmbeddingEuclidean: return "embedding";
        }
        return "?";
    }

    // Maps a raw feature vector (aligned with the cohort's feature names)
    // into the backend's representation space.
    std::vector<double> representation(const Cohort& cohort, std::span<const double> raw_features) const {
        switch (kind) {
            case Kind::RawEuclidean:
            case Kind::Mahalanobis: return {raw_features.begin(), raw_features.end()};
            case Kind::P0Euclidean: {
                std::vector<double> out;
                out.reserve(feature_subset.size());
                for (const auto& name : feature_subset) out.push_back(raw_features[cohort.feature_index(name)]);
                return out;
            }
            case Kind::EmbeddingEuclidean: {
                if (!model) throw ConfigError("embedding backend has no model loaded");
                return infer_one(*model, raw_features);
            }
        }
        throw ConfigError("unknown backend");
    }
};

struct ReferenceCell {
    bool available = false;
    std::vector<double> reference;  // backend-space representation of the raw median
    ThresholdInterval normal;       // q = 95
    ThresholdInterval lower_risk;   // q = 98
    std::optional<Matrix> cov_cholesky;  // Mahalanobis only
    size_t population = 0;
};

// Per (sex, age group) references; cells with too few bona fide members are
// marked unavailable and their patients map to Unassigned.
struct ReferenceSet {
    std::map<std::pair<int, int>, ReferenceCell> cells;
    static constexpr size_t kMinCellPopulation = 4;

    const ReferenceCell* find(Sex sex, const AgeGroup& group) const {
        auto it = cells.find({static_cast<int>(sex), group.index()});
        if (it == cells.end() || !it->second.available) return nullptr;
        return &it->second;
    }
};

namespace detail {

inline double cell_distance(const DistanceBackend& backend, const ReferenceCell& cell,
                            std::span<const double> repr) {
    if (backend.kind == DistanceBackend::Kind::Mahalanobis) {
        if (!cell.cov_cholesky) throw ConfigError("mahalanobis cell has no covariance factor");
        // Factor precomputed at build time; solve against the stored L.
        if (repr.size() != cell.reference.size()) throw DimensionError("cell_distance: dim mismatch");
        std::vector<double> diff(repr.size());
        for (size_t i = 0; i < repr.size(); ++i) diff[i] = repr[i] - cell.reference[i];
        const std::vector<double> solved = cholesky_solve(*cell.cov_cholesky, diff);
        double s = 0.0;
        for (size_t i = 0; i < diff.size(); ++i) s += diff[i] * solved[i];
        return std::sqrt(std::max(s, 0.0));
    }
    return euclidean_distance(cell.reference, repr);
}

inline Matrix sample_covariance_with_ridge(const Matrix& rows) {
    const size_t n = rows.rows();
    const size_t d = rows.cols();
    std::vector<double> mu(d, 0.0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < d; ++c) mu[c] += rows(r, c);
    }
    for (double& v : mu) v /= static_cast<double>(n);
    Matrix cov(d, d);
    for (size_t r = 0; r < n; ++r) {
        for (size_t i = 0; i < d; ++i) {
            const double di = rows(r, i) - mu[i];
            for (size_t j = 0; j <= i; ++j) cov(i, j) += di * (rows(r, j) - mu[j]);
        }
    }
    const double denom = static_cast<double>(n > 1 ? n - 1 : 1);
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            cov(i, j) /= denom;
            cov(j, i) = cov(i, j);
        }
    }
    double trace = 0.0;
    for (size_t i = 0; i < d; ++i) trace += cov(i, i);
    const double ridge = 1e-6 * trace / static_cast<double>(d);
    for (size_t i = 0; i < d; ++i) cov(i, i) += ridge;
    return cov;
}

}  // namespace detail

// Builds per-(sex, age group) references from the bona fide records of the
// cohort. Percentile vectors are computed coordinate-wise on raw features and
// then mapped through the backend. N comes from the inner 95% (percentiles
// 2.5/97.5), LR from the inner 98% (1/99), both as distances to the mapped
// median.
inline ReferenceSet build_reference_set(const Cohort& cohort, const DistanceBackend& backend) {
    std::map<std::pair<int, int>, std::vector<size_t>> members;
    for (size_t i = 0; i < cohort.records.size(); ++i) {
        const auto& rec = cohort.records[i];
        if (rec.label != HealthLabel::BonaFideHealthy) continue;
        members[{static_cast<int>(rec.sex), AgeGroup::of(rec.age).index()}].push_back(i);
    }

    ReferenceSet refs;
    for (int sex = 0; sex < 2; ++sex) {
        for (int group = 0; group < AgeGroup::kCount; ++group) {
            ReferenceCell cell;
            auto it = members.find({sex, group});
            if (it != members.end() && it->second.size() >= ReferenceSet::kMinCellPopulation) {
                Matrix rows(it->second.size(), cohort.feature_names.size());
                for (size_t r = 0; r < it->second.size(); ++r) {
                    const auto& rec = cohort.records[it->second[r]];
                    for (size_t c = 0; c < rec.features.size(); ++c) {
                        if (is_missing(rec.features[c])) {
                            throw DataError("reference record " + rec.id + " has missing values");
                        }
                        rows(r, c) = rec.features[c];
                    }
                }
                cell.population = rows.rows();
                cell.reference = backend.representation(cohort, columnwise_percentile(rows, 50.0));
                if (backend.kind == DistanceBackend::Kind::Mahalanobis) {
                    cell.cov_cholesky = cholesky(detail::sample_covariance_with_ridge(rows));
                }
                auto interval_from = [&](double q_low, double q_high, double q) {
                    const double lo = detail::cell_distance(
                        backend, cell, backend.representation(cohort, columnwise_percentile(rows, q_low)));
                    const double hi = detail::cell_distance(
                        backend, cell, backend.representation(cohort, columnwise_percentile(rows, q_high)));
                    // A nonlinear backend can reorder the two ends.
                    return ThresholdInterval{std::min(lo, hi), std::max(lo, hi), q};
                };
                cell.normal = interval_from(2.5, 97.5, 95.0);
                cell.lower_risk = interval_from(1.0, 99.0, 98.0);
                // N must stay nested inside LR even when the backend is nonlinear.
                cell.lower_risk.t_lower = std::min(cell.lower_risk.t_lower, cell.normal.t_lower);
                cell.lower_risk.t_upper = std::max(cell.lower_risk.t_upper, cell.normal.t_upper);
                cell.available = true;
            }
            refs.cells[{sex, group}] = std::move(cell);
        }
    }
    return refs;
}

struct RiskAssignment {
    RiskGroup group = RiskGroup::Unassigned;
    std::optional<double> score;
};

struct RiskOptions {
    // The literal interval rule leaves scores below t_lower of N outside
    // Normal; this flag replaces both lower bounds with 0.
    bool clamp_lower_bound = false;
};

inline RiskAssignment assign_risk(const PatientRecord& record, const Cohort& cohort, const ReferenceSet& refs,
                                  const DistanceBackend& backend, const RiskOptions& options = {}) {
    const ReferenceCell* cell = refs.find(record.sex, AgeGroup::of(record.age));
    if (cell == nullptr) return {RiskGroup::Unassigned, std::nullopt};
    for (double v : record.features) {
        if (is_missing(v)) throw DataError("assign_risk: record " + record.id + " has missing values");
    }
    const std::vector<double> repr = backend.representation(cohort, record.features);
    const double score = detail::cell_distance(backend, *cell, repr);

    ThresholdInterval normal = cell->normal;
    ThresholdInterval lower = cell->lower_risk;
    if (options.clamp_lower_bound) {
        normal.t_lower = 0.0;
        lower.t_lower = 0.0;
    }
    if (normal.contains(score)) return {RiskGroup::Normal, score};
    if (lower.contains(score)) return {RiskGroup::LowerRisk, score};
    return {RiskGroup::HigherRisk, score};
}

// --- cohort-level reports ------------------------------------------------------

struct GroupShares {
    size_t counts[3] = {0, 0, 0};  // Normal, LowerRisk, HigherRisk
    size_t unassigned = 0;

    size_t assigned() const { return counts[0] + counts[1] + counts[2]; }

    std::optional<double> percent(RiskGroup g) const {
        if (assigned() == 0) return std::nullopt;
        return 100.0 * static_cast<double>(counts[static_cast<int>(g)]) / static_cast<double>(assigned());
    }
};

// Percentage of each label's population assigned to each risk group.
inline std::map<HealthLabel, GroupShares> risk_distribution(const Cohort& cohort, const ReferenceSet& refs,
                                                            const DistanceBackend& backend,
                                                            const RiskOptions& options = {}) {
    std::map<HealthLabel, GroupShares> out;
    out[HealthLabel::ApparentlyHealthy] = {};
    out[HealthLabel::Unhealthy] = {};
    for (const auto& rec : cohort.records) {
        if (rec.label == HealthLabel::BonaFideHealthy) continue;
        auto& shares = out[rec.label];
        const RiskAssignment a = assign_risk(rec, cohort, refs, backend, options);
        if (a.group == RiskGroup::Unassigned) {
            ++shares.unassigned;
        } else {
            ++shares.counts[static_cast<int>(a.group)];
        }
    }
    return out;
}

struct ConversionCell {
    size_t group_size = 0;
    size_t converted = 0;

    // Undefined (not 0) when the group is empty.
    std::optional<double> rate_percent() const {
        if (group_size == 0) return std::nullopt;
        return 100.0 * static_cast<double>(converted) / static_cast<double>(group_size);
    }
};

using ConversionTable = std::map<std::string, std::map<RiskGroup, ConversionCell>>;

// For each condition and risk group: the fraction of apparently-healthy
// patients in that group who develop the condition at follow-up.
inline ConversionTable future_risk_validation(const Cohort& cohort, const ReferenceSet& refs,
                                              const DistanceBackend& backend, const RiskOptions& options = {}) {
    std::set<std::string> conditions;
    size_t annotated = 0;
    for (const auto& rec : cohort.records) {
        if (rec.label == HealthLabel::ApparentlyHealthy && rec.future) {
            conditions.insert(rec.future->condition);
            ++annotated;
        }
    }
    if (annotated == 0) throw DataError("future_risk_validation: no apparently-healthy record has follow-up");

    ConversionTable table;
    static constexpr RiskGroup kGroups[] = {RiskGroup::Normal, RiskGroup::LowerRisk, RiskGroup::HigherRisk};
    for (const auto& condition : conditions) {
        for (RiskGroup g : kGroups) table[condition][g] = {};
    }
    for (const auto& rec : cohort.records) {
        if (rec.label != HealthLabel::ApparentlyHealthy) continue;
        const RiskAssignment a = assign_risk(rec, cohort, refs, backend, options);
        if (a.group == RiskGroup::Unassigned) continue;
        for (const auto& condition : conditions) {
            auto& cell = table[condition][a.group];
            ++cell.group_size;
            if (rec.future && rec.future->condition == condition) ++cell.converted;
        }
    }
    return table;
}

struct PseudotimeResult {
    size_t n = 0;
    std::optional<double> r;  // absent when fewer than 3 converting patients
};

// Pearson correlation between health score and years-until-diagnosis among
// converting apparently-healthy patients, per condition.
inline std::map<std::string, PseudotimeResult> pseudotime_correlation(const Cohort& cohort,
                                                                      const ReferenceSet& refs,
                                                                      const DistanceBackend& backend,
                                                                      const RiskOptions& options = {}) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> samples;
    for (const auto& rec : cohort.records) {
        if (rec.label != HealthLabel::ApparentlyHealthy || !rec.future) continue;
        const RiskAssignment a = assign_risk(rec, cohort, refs, backend, options);
        if (!a.score) continue;
        samples[rec.future->condition].first.push_back(*a.score);
        samples[rec.future->condition].second.push_back(rec.future->years_until);
    }
    std::map<std::string, PseudotimeResult> out;
    for (const auto& [condition, xy] : samples) {
        PseudotimeResult res;
        res.n = xy.first.size();
        if (res.n >= 3) res.r = pearson_correlation(xy.first, xy.second);
        out[condition] = res;
    }
    return out;
}

// --- report writer --------------------------------------------------------------
// Structured text, stable field order, one block per backend.

namespace detail {

inline std::string format_rate(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

}  // namespace detail

inline void write_risk_block(std::ostream& os, const DistanceBackend& backend, const ReferenceSet& refs,
                             const std::map<HealthLabel, GroupShares>& distribution,
                             const ConversionTable* conversions, const RiskOptions& options) {
    size_t available = 0;
    for (const auto& [key, cell] : refs.cells) {
        if (cell.available) ++available;
    }
    os << "backend " << backend.name() << " clamp_lower_bound " << (options.clamp_lower_bound ? 1 : 0)
       << "\n";
    os << "cells available " << available << " unavailable " << refs.cells.size() - available << "\n";
    static constexpr RiskGroup kGroups[] = {RiskGroup::Normal, RiskGroup::LowerRisk, RiskGroup::HigherRisk};
    for (const auto& [label, shares] : distribution) {
        os << "distribution label " << to_string(label) << " assigned " << shares.assigned() << " unassigned "
           << shares.unassigned << "\n";
        for (RiskGroup g : kGroups) {
            os << "group " << to_string(g) << " count " << shares.counts[static_cast<int>(g)] << " pct "
               << detail::format_rate(shares.percent(g)) << "\n";
        }
    }
    if (conversions != nullptr) {
        for (const auto& [condition, by_group] : *conversions) {
            os << "future condition " << condition << "\n";
            for (RiskGroup g : kGroups) {
                const ConversionCell& cell = by_group.at(g);
                os << "group " << to_string(g) << " n " << cell.group_size << " converted " << cell.converted
                   << " rate " << detail::format_rate(cell.rate_percent()) << "\n";
            }
        }
    }
}

}  // namespace nplb
