#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nplb/error.hpp"
#include "nplb/matrix.hpp"
#include "nplb/random.hpp"
#include "nplb/stats.hpp"

namespace nplb {

enum class Sex { Female, Male };

enum class HealthLabel { BonaFideHealthy, ApparentlyHealthy, Unhealthy };

inline std::string to_string(Sex s) { return s == Sex::Female ? "female" : "male"; }

inline Sex sex_from_string(const std::string& s) {
    if (s == "female") return Sex::Female;
    if (s == "male") return Sex::Male;
    throw DataError("unknown sex '" + s + "'");
}

inline std::string to_string(HealthLabel l) {
    switch (l) {
        case HealthLabel::BonaFideHealthy: return "bona_fide_healthy";
        case HealthLabel::ApparentlyHealthy: return "apparently_healthy";
        case HealthLabel::Unhealthy: return "unhealthy";
    }
    return "?";
}

inline HealthLabel label_from_string(const std::string& s) {
    if (s == "bona_fide_healthy") return HealthLabel::BonaFideHealthy;
    if (s == "apparently_healthy") return HealthLabel::ApparentlyHealthy;
    if (s == "unhealthy") return HealthLabel::Unhealthy;
    throw DataError("unknown label '" + s + "'");
}

// Six age groups partitioning [36, 75]; fractional ages bucket by the next
// group's lower edge, so group k covers [lower_k, lower_{k+1}).
class AgeGroup {
public:
    static constexpr int kCount = 6;

    static AgeGroup of(double age) {
        if (!(age >= 36.0 && age <= 75.0)) {
            throw DataError("age " + std::to_string(age) + " outside [36,75]");
        }
        static constexpr double lower[] = {36, 46, 51, 56, 61, 66};
        int idx = 0;
        for (int k = 1; k < kCount; ++k) {
            if (age >= lower[k]) idx = k;
        }
        return AgeGroup(idx);
    }

    int index() const { return index_; }

    std::string name() const {
        static const char* names[] = {"[36,45]", "[46,50]", "[51,55]", "[56,60]", "[61,65]", "[66,75]"};
        return names[index_];
    }

    bool operator==(const AgeGroup&) const = default;
    auto operator<=>(const AgeGroup&) const = default;

private:
    explicit AgeGroup(int index) : index_(index) {}
    int index_;
};

struct FutureDiagnosis {
    std::string condition;
    double years_until = 0.0;
};

struct PatientRecord {
    std::string id;
    Sex sex = Sex::Female;
    double age = 50.0;
    HealthLabel label = HealthLabel::ApparentlyHealthy;
    std::vector<double> features;  // NaN marks a missing value
    std::optional<FutureDiagnosis> future;

    bool synthetic() const { return id.rfind("syn:", 0) == 0; }
};

inline bool is_missing(double v) { return std::isnan(v); }

// Closed/open interval with optional infinite endpoints.
struct Interval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_strict = false;
    bool upper_strict = false;

    bool contains(double v) const {
        if (lower_strict ? !(v > lower) : !(v >= lower)) return false;
        if (upper_strict ? !(v < upper) : !(v <= upper)) return false;
        return true;
    }

    std::string to_string() const {
        auto fmt = [](double v) {
            if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
            char buf[40];
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip
            return std::string(buf, end);
        };
        return std::string(lower_strict ? "(" : "[") + fmt(lower) + "," + fmt(upper) +
               (upper_strict ? ")" : "]");
    }

    static Interval parse(const std::string& text) {
        if (text.size() < 5 || (text.front() != '[' && text.front() != '(') ||
            (text.back() != ']' && text.back() != ')')) {
            throw DataError("malformed interval '" + text + "'");
        }
        const size_t comma = text.find(',');
        if (comma == std::string::npos) throw DataError("malformed interval '" + text + "'");
        auto parse_num = [&](const std::string& tok) {
            if (tok == "inf") return std::numeric_limits<double>::infinity();
            if (tok == "-inf") return -std::numeric_limits<double>::infinity();
            return std::strtod(tok.c_str(), nullptr);
        };
        Interval iv;
        iv.lower = parse_num(text.substr(1, comma - 1));
        iv.upper = parse_num(text.substr(comma + 1, text.size() - comma - 2));
        iv.lower_strict = text.front() == '(';
        iv.upper_strict = text.back() == ')';
        if (iv.lower > iv.upper) throw DataError("interval lower > upper in '" + text + "'");
        return iv;
    }
};

// Per (condition, feature) acceptance intervals; conditions are free-form
// names ("bfh_female", "bfh_male", ...). Units carried per feature.
struct FeatureBounds {
    std::map<std::string, std::map<std::string, Interval>> conditions;
    std::map<std::string, std::string> units;

    const Interval* find(const std::string& condition, const std::string& feature) const {
        auto cond_it = conditions.find(condition);
        if (cond_it == conditions.end()) return nullptr;
        auto feat_it = cond_it->second.find(feature);
        if (feat_it == cond_it->second.end()) return nullptr;
        return &feat_it->second;
    }
};

inline std::string bfh_condition_name(Sex sex) {
    return sex == Sex::Female ? "bfh_female" : "bfh_male";
}

inline const std::vector<std::string>& p0_feature_names() {
    static const std::vector<std::string> names = {"total_cholesterol", "hdl", "ldl", "triglycerides",
                                                   "glucose", "hba1c", "crp"};
    return names;
}

// Clinically-normal ranges for the P0 markers; HDL is sex-specific.
inline FeatureBounds default_feature_bounds() {
    const double inf = std::numeric_limits<double>::infinity();
    FeatureBounds b;
    for (Sex sex : {Sex::Female, Sex::Male}) {
        auto& row = b.conditions[bfh_condition_name(sex)];
        row["total_cholesterol"] = {-inf, 5.18, true, false};
        row["hdl"] = {sex == Sex::Female ? 1.3 : 1.0, inf, false, true};
        row["ldl"] = {-inf, 3.3, true, false};
        row["triglycerides"] = {-inf, 1.7, true, false};
        row["glucose"] = {70.0, 100.0, false, false};
        row["hba1c"] = {-inf, 42.0, true, true};
        row["crp"] = {-inf, 10.0, true, true};
    }
    b.units = {{"total_cholesterol", "mmol/L"}, {"hdl", "mmol/L"},   {"ldl", "mmol/L"},
               {"triglycerides", "mmol/L"},    {"glucose", "mg/dL"}, {"hba1c", "mmol/mol"},
               {"crp", "mg/L"}};
    return b;
}

struct Cohort {
    std::vector<PatientRecord> records;
    std::vector<std::string> feature_names;

    size_t feature_index(const std::string& name) const {
        for (size_t i = 0; i < feature_names.size(); ++i) {
            if (feature_names[i] == name) return i;
        }
        throw DataError("cohort has no feature '" + name + "'");
    }

    void validate() const {
        std::set<std::string> ids;
        for (const auto& rec : records) {
            if (rec.features.size() != feature_names.size()) {
                throw DataError("record " + rec.id + " has wrong feature arity");
            }
            if (!(rec.age >= 36.0 && rec.age <= 75.0)) {
                throw DataError("record " + rec.id + " has age outside [36,75]");
            }
            if (!ids.insert(rec.id).second) throw DataError("duplicate record id " + rec.id);
        }
    }

    // Dense matrix of the records' features; requires complete records.
    Matrix feature_matrix() const {
        Matrix m(records.size(), feature_names.size());
        for (size_t r = 0; r < records.size(); ++r) {
            for (size_t c = 0; c < feature_names.size(); ++c) {
                if (is_missing(records[r].features[c])) {
                    throw DataError("record " + records[r].id + " has a missing value; preprocess first");
                }
                m(r, c) = records[r].features[c];
            }
        }
        return m;
    }

    std::vector<int> labels_as_int() const {
        std::vector<int> out(records.size());
        for (size_t i = 0; i < records.size(); ++i) out[i] = static_cast<int>(records[i].label);
        return out;
    }
};

// True iff every P0 marker is present and inside its clinically-normal range
// for the record's sex. Missing P0 values are an error, not a "no".
inline bool is_bona_fide(const PatientRecord& record, const Cohort& cohort, const FeatureBounds& bounds) {
    const std::string condition = bfh_condition_name(record.sex);
    for (const std::string& name : p0_feature_names()) {
        const Interval* iv = bounds.find(condition, name);
        if (iv == nullptr) throw DataError("bounds missing row (" + condition + ", " + name + ")");
        const double value = record.features[cohort.feature_index(name)];
        if (is_missing(value)) throw DataError("record " + record.id + " is missing P0 feature " + name);
        if (!iv->contains(value)) return false;
    }
    return true;
}

// --- synthetic cohort generation ---------------------------------------------

struct LabelBlock {
    size_t count = 0;
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct GeneratorConfig {
    std::vector<std::string> feature_names = p0_feature_names();
    LabelBlock bona_fide;
    LabelBlock apparently;  // means are the severity-0 end of the continuum
    LabelBlock unhealthy;
    double future_fraction = 0.3;  // expected conversion rate among apparently-healthy
    std::vector<std::string> conditions = {"cancer", "diabetes", "other_serious"};
    double max_years = 10.0;  // follow-up horizon; years_until shrinks with severity
    double missing_rate = 0.0;
    size_t rejection_cap = 100000;
};

inline GeneratorConfig default_generator_config(size_t n_bfh = 240, size_t n_apparently = 800,
                                                size_t n_unhealthy = 800) {
    GeneratorConfig cfg;
    cfg.bona_fide = {n_bfh, {4.5, 1.6, 2.5, 1.2, 85.0, 35.0, 3.0}, {0.4, 0.15, 0.4, 0.25, 7.0, 3.0, 2.0}};
    cfg.apparently = {n_apparently, {5.0, 1.45, 3.0, 1.5, 92.0, 38.0, 4.0}, {0.7, 0.25, 0.7, 0.5, 10.0, 4.0, 3.0}};
    cfg.unhealthy = {n_unhealthy, {6.5, 1.0, 4.5, 2.6, 115.0, 50.0, 12.0}, {0.8, 0.25, 0.8, 0.6, 12.0, 6.0, 5.0}};
    return cfg;
}

namespace detail {

inline double draw_in_interval(RandomSource& rng, double mu, double sigma, const Interval& iv,
                               size_t cap, const std::string& feature) {
    if (sigma == 0.0) {
        if (iv.contains(mu)) return mu;
        throw DataError("infeasible bounds for feature " + feature + ": sigma=0 with mean outside " +
                        iv.to_string());
    }
    for (size_t attempt = 0; attempt < cap; ++attempt) {
        const double z = rng.normal(mu, sigma);
        if (iv.contains(z)) return z;
    }
    throw DataError("rejection cap exceeded for feature " + feature + " with bounds " + iv.to_string());
}

}  // namespace detail

// Synthetic labeled cohort. Bona fide records are rejection-sampled inside
// the clinical bounds; unhealthy records must violate at least one bound;
// apparently-healthy records carry a latent severity in [0,1] that shifts
// their features toward the unhealthy means, drives conversion probability,
// and shortens years_until.
inline Cohort generate_cohort(const GeneratorConfig& cfg, const FeatureBounds& bounds, RandomSource& rng) {
    const size_t n_feat = cfg.feature_names.size();
    for (const LabelBlock* block : {&cfg.bona_fide, &cfg.apparently, &cfg.unhealthy}) {
        if (block->count == 0) continue;
        if (block->mean.size() != n_feat || block->stddev.size() != n_feat) {
            throw ConfigError("generator block mean/std arity != feature count");
        }
        for (double s : block->stddev) {
            if (!(s > 0.0)) throw ConfigError("generator stddev must be > 0");
        }
    }

    Cohort cohort;
    cohort.feature_names = cfg.feature_names;
    size_t serial = 0;
    auto base_record = [&](HealthLabel label, const char* prefix) {
        PatientRecord rec;
        rec.id = prefix + std::to_string(++serial);
        rec.label = label;
        rec.sex = serial % 2 == 0 ? Sex::Male : Sex::Female;
        rec.age = static_cast<double>(36 + rng.index(40));  // integer years in [36, 75]
        rec.features.assign(n_feat, 0.0);
        return rec;
    };

    for (size_t i = 0; i < cfg.bona_fide.count; ++i) {
        PatientRecord rec = base_record(HealthLabel::BonaFideHealthy, "bfh");
        const std::string condition = bfh_condition_name(rec.sex);
        for (size_t j = 0; j < n_feat; ++j) {
            const Interval* iv = bounds.find(condition, cfg.feature_names[j]);
            if (iv != nullptr) {
                rec.features[j] = detail::draw_in_interval(rng, cfg.bona_fide.mean[j], cfg.bona_fide.stddev[j],
                                                           *iv, cfg.rejection_cap, cfg.feature_names[j]);
            } else {
                rec.features[j] = rng.normal(cfg.bona_fide.mean[j], cfg.bona_fide.stddev[j]);
            }
        }
        cohort.records.push_back(std::move(rec));
    }

    for (size_t i = 0; i < cfg.apparently.count; ++i) {
        PatientRecord rec = base_record(HealthLabel::ApparentlyHealthy, "ah");
        const double severity = rng.uniform();
        for (size_t j = 0; j < n_feat; ++j) {
            const double mu =
                (1.0 - severity) * cfg.apparently.mean[j] + severity * cfg.unhealthy.mean[j];
            rec.features[j] = rng.normal(mu, cfg.apparently.stddev[j]);
        }
        // Conversion probability is linear in severity with the configured mean.
        const double p_convert = std::clamp(cfg.future_fraction * 2.0 * severity, 0.0, 1.0);
        if (!cfg.conditions.empty() && rng.uniform() < p_convert) {
            FutureDiagnosis fd;
            fd.condition = cfg.conditions[rng.index(cfg.conditions.size())];
            fd.years_until = cfg.max_years * (1.0 - severity) + 0.25 * rng.uniform();
            rec.future = fd;
        }
        cohort.records.push_back(std::move(rec));
    }

    for (size_t i = 0; i < cfg.unhealthy.count; ++i) {
        PatientRecord rec = base_record(HealthLabel::Unhealthy, "uh");
        const std::string condition = bfh_condition_name(rec.sex);
        bool violates = false;
        for (size_t attempt = 0; attempt < cfg.rejection_cap && !violates; ++attempt) {
            for (size_t j = 0; j < n_feat; ++j) {
                rec.features[j] = rng.normal(cfg.unhealthy.mean[j], cfg.unhealthy.stddev[j]);
            }
            for (size_t j = 0; j < n_feat && !violates; ++j) {
                const Interval* iv = bounds.find(condition, cfg.feature_names[j]);
                if (iv != nullptr && !iv->contains(rec.features[j])) violates = true;
            }
        }
        if (!violates) {
            throw DataError("rejection cap exceeded: unhealthy draws never violate any clinical bound");
        }
        cohort.records.push_back(std::move(rec));
    }

    if (cfg.missing_rate > 0.0) {
        // Bona fide records stay complete so they always pass is_bona_fide.
        for (auto& rec : cohort.records) {
            if (rec.label == HealthLabel::BonaFideHealthy) continue;
            for (double& v : rec.features) {
                if (rng.uniform() < cfg.missing_rate) v = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    cohort.validate();
    return cohort;
}

// --- preprocessing -----------------------------------------------------------

struct PreprocessOptions {
    double min_completeness = 0.75;
    bool normalize = true;  // rank-based inverse-normal transform per feature within sex
};

struct PreprocessReport {
    std::vector<std::string> dropped_features;
    std::vector<std::string> dropped_record_ids;
    size_t kept_female = 0;
    size_t kept_male = 0;
};

struct PreprocessResult {
    Cohort female;
    Cohort male;
    PreprocessReport report;

    Cohort combined() const {
        Cohort out = female;
        out.records.insert(out.records.end(), male.records.begin(), male.records.end());
        return out;
    }
};

inline PreprocessResult preprocess(const Cohort& cohort, const PreprocessOptions& options = {}) {
    if (cohort.records.empty()) throw DataError("preprocess: empty cohort");
    const size_t n = cohort.records.size();

    PreprocessResult result;
    std::vector<size_t> kept_features;
    for (size_t j = 0; j < cohort.feature_names.size(); ++j) {
        size_t complete = 0;
        for (const auto& rec : cohort.records) {
            if (!is_missing(rec.features[j])) ++complete;
        }
        if (static_cast<double>(complete) / static_cast<double>(n) >= options.min_completeness) {
            kept_features.push_back(j);
        } else {
            result.report.dropped_features.push_back(cohort.feature_names[j]);
        }
    }
    if (kept_features.empty()) throw DataError("preprocess: every feature dropped by completeness filter");

    result.female.feature_names.reserve(kept_features.size());
    for (size_t j : kept_features) result.female.feature_names.push_back(cohort.feature_names[j]);
    result.male.feature_names = result.female.feature_names;

    for (const auto& rec : cohort.records) {
        PatientRecord kept = rec;
        kept.features.clear();
        bool complete = true;
        for (size_t j : kept_features) {
            if (is_missing(rec.features[j])) complete = false;
            kept.features.push_back(rec.features[j]);
        }
        if (!complete) {
            result.report.dropped_record_ids.push_back(rec.id);
            continue;
        }
        (rec.sex == Sex::Female ? result.female : result.male).records.push_back(std::move(kept));
    }
    result.report.kept_female = result.female.records.size();
    result.report.kept_male = result.male.records.size();
    if (result.female.records.empty() && result.male.records.empty()) {
        throw DataError("preprocess: every record dropped");
    }

    if (options.normalize) {
        for (Cohort* side : {&result.female, &result.male}) {
            if (side->records.empty()) continue;
            for (size_t j = 0; j < side->feature_names.size(); ++j) {
                std::vector<double> column(side->records.size());
                for (size_t r = 0; r < side->records.size(); ++r) column[r] = side->records[r].features[j];
                const std::vector<double> transformed = inverse_normal_transform(column);
                for (size_t r = 0; r < side->records.size(); ++r) side->records[r].features[j] = transformed[r];
            }
        }
    }
    return result;
}

// Rank-based inverse-normal transform applied per feature within each sex,
// in place. Identical to the normalization step inside preprocess; exposed so
// pipelines can normalize after augmentation.
inline void quantile_normalize_per_sex(Cohort& cohort) {
    for (Sex sex : {Sex::Female, Sex::Male}) {
        std::vector<size_t> rows;
        for (size_t i = 0; i < cohort.records.size(); ++i) {
            if (cohort.records[i].sex == sex) rows.push_back(i);
        }
        if (rows.empty()) continue;
        for (size_t j = 0; j < cohort.feature_names.size(); ++j) {
            std::vector<double> column(rows.size());
            for (size_t r = 0; r < rows.size(); ++r) column[r] = cohort.records[rows[r]].features[j];
            const std::vector<double> transformed = inverse_normal_transform(column);
            for (size_t r = 0; r < rows.size(); ++r) cohort.records[rows[r]].features[j] = transformed[r];
        }
    }
}

// --- augmentation (rejection sampling inside clinical bounds) ----------------

// For every existing bona fide record, appends `fold` synthetic siblings whose
// features are drawn from the empirical BFH Gaussian, redrawn until they land
// inside the clinical bounds for the source record's sex. Existing records are
// never modified.
inline Cohort augment_bona_fide(const Cohort& cohort, size_t fold, const FeatureBounds& bounds,
                                RandomSource& rng, size_t rejection_cap = 100000) {
    Cohort out = cohort;
    if (fold == 0) return out;

    std::vector<const PatientRecord*> bfh;
    for (const auto& rec : cohort.records) {
        if (rec.label == HealthLabel::BonaFideHealthy) bfh.push_back(&rec);
    }
    if (bfh.size() < 2) {
        throw DataError("augment_bona_fide: need >= 2 bona fide records to estimate mean/std, have " +
                        std::to_string(bfh.size()));
    }

    const size_t n_feat = cohort.feature_names.size();
    std::vector<double> mu(n_feat), sigma(n_feat);
    for (size_t j = 0; j < n_feat; ++j) {
        std::vector<double> column;
        for (const auto* rec : bfh) {
            if (!is_missing(rec->features[j])) column.push_back(rec->features[j]);
        }
        if (column.size() < 2) {
            throw DataError("augment_bona_fide: fewer than 2 observed values for feature " +
                            cohort.feature_names[j]);
        }
        mu[j] = mean(column);
        sigma[j] = stddev(column);
    }

    size_t serial = 0;
    for (const auto* source : bfh) {
        for (size_t k = 0; k < fold; ++k) {
            PatientRecord rec;
            rec.id = "syn:" + source->id + ":" + std::to_string(++serial);
            rec.sex = source->sex;
            rec.age = source->age;
            rec.label = HealthLabel::BonaFideHealthy;
            rec.features.assign(n_feat, 0.0);
            const std::string condition = bfh_condition_name(rec.sex);
            for (size_t j = 0; j < n_feat; ++j) {
                const Interval* iv = bounds.find(condition, cohort.feature_names[j]);
                if (iv != nullptr) {
                    rec.features[j] = detail::draw_in_interval(rng, mu[j], sigma[j], *iv, rejection_cap,
                                                               cohort.feature_names[j]);
                } else {
                    rec.features[j] = rng.normal(mu[j], sigma[j]);
                }
            }
            out.records.push_back(std::move(rec));
        }
    }
    out.validate();
    return out;
}

// --- train/test split ---------------------------------------------------------

struct SplitResult {
    Cohort train;
    Cohort test;
    std::vector<std::string> warnings;
};

// Stratified by label. Synthetic records always go to train; evaluations run
// on real data only.
inline SplitResult split_train_test(const Cohort& cohort, double fraction, RandomSource& rng) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
    SplitResult result;
    result.train.feature_names = cohort.feature_names;
    result.test.feature_names = cohort.feature_names;

    std::map<HealthLabel, std::vector<size_t>> strata;
    for (size_t i = 0; i < cohort.records.size(); ++i) {
        if (cohort.records[i].synthetic()) {
            result.train.records.push_back(cohort.records[i]);
        } else {
            strata[cohort.records[i].label].push_back(i);
        }
    }

    for (auto& [label, indices] : strata) {
        for (size_t i = indices.size(); i-- > 1;) std::swap(indices[i], indices[rng.index(i + 1)]);
        const size_t n = indices.size();
        if (n < 2) {
            result.warnings.push_back("stratum " + to_string(label) + " too small to split (" +
                                      std::to_string(n) + " record); sent to train");
            for (size_t i : indices) result.train.records.push_back(cohort.records[i]);
            continue;
        }
        size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
        k = std::clamp<size_t>(k, 1, n - 1);
        for (size_t i = 0; i < n; ++i) {
            (i < k ? result.train : result.test).records.push_back(cohort.records[indices[i]]);
        }
    }
    return result;
}

// --- cohort & bounds file io ---------------------------------------------------
// Cohort: delimiter-separated text with header
//   id,sex,age,label,future_condition,years_until,<feature...>
// Missing values are empty fields. Synthetic records carry the id prefix "syn:".

namespace detail {

// Shortest decimal representation that parses back to the same double.
inline std::string format_full(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace detail

inline void save_cohort(const Cohort& cohort, std::ostream& os) {
    os << "id,sex,age,label,future_condition,years_until";
    for (const auto& name : cohort.feature_names) {
        if (name.find(',') != std::string::npos) throw DataError("feature name contains a comma: " + name);
        os << "," << name;
    }
    os << "\n";
    for (const auto& rec : cohort.records) {
        if (rec.id.find(',') != std::string::npos) throw DataError("record id contains a comma: " + rec.id);
        os << rec.id << "," << to_string(rec.sex) << "," << detail::format_full(rec.age) << ","
           << to_string(rec.label) << ",";
        if (rec.future) os << rec.future->condition;
        os << ",";
        if (rec.future) os << detail::format_full(rec.future->years_until);
        for (double v : rec.features) {
            os << ",";
            if (!is_missing(v)) os << detail::format_full(v);
        }
        os << "\n";
    }
}

inline void save_cohort(const Cohort& cohort, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open cohort file for writing: " + path);
    save_cohort(cohort, os);
    if (!os) throw IoError("failed writing cohort file: " + path);
}

inline Cohort load_cohort(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("cohort file is empty");
    const auto header = detail::split_csv_line(line);
    static const std::vector<std::string> expected = {"id", "sex", "age", "label", "future_condition",
                                                      "years_until"};
    if (header.size() < expected.size()) throw IoError("cohort header too short");
    for (size_t i = 0; i < expected.size(); ++i) {
        if (header[i] != expected[i]) {
            throw IoError("cohort header column " + std::to_string(i) + " is '" + header[i] +
                          "', expected '" + expected[i] + "'");
        }
    }
    Cohort cohort;
    cohort.feature_names.assign(header.begin() + expected.size(), header.end());

    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw IoError("cohort line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(header.size()));
        }
        PatientRecord rec;
        rec.id = fields[0];
        rec.sex = sex_from_string(fields[1]);
        rec.age = std::strtod(fields[2].c_str(), nullptr);
        rec.label = label_from_string(fields[3]);
        if (!fields[4].empty()) {
            rec.future = FutureDiagnosis{fields[4], std::strtod(fields[5].c_str(), nullptr)};
        }
        for (size_t j = expected.size(); j < fields.size(); ++j) {
            rec.features.push_back(fields[j].empty() ? std::numeric_limits<double>::quiet_NaN()
                                                     : std::strtod(fields[j].c_str(), nullptr));
        }
        cohort.records.push_back(std::move(rec));
    }
    cohort.validate();
    return cohort;
}

inline Cohort load_cohort(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open cohort file: " + path);
    return load_cohort(is);
}

// Bounds: versioned structured text, one row per (condition, feature):
//   condition feature interval [unit]
inline void save_bounds(const FeatureBounds& bounds, std::ostream& os) {
    os << "nplb-bounds v1\n";
    os << "# condition feature interval unit\n";
    for (const auto& [condition, features] : bounds.conditions) {
        for (const auto& [feature, interval] : features) {
            os << condition << " " << feature << " " << interval.to_string();
            auto unit_it = bounds.units.find(feature);
            if (unit_it != bounds.units.end()) os << " " << unit_it->second;
            os << "\n";
        }
    }
}

inline void save_bounds(const FeatureBounds& bounds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open bounds file for writing: " + path);
    save_bounds(bounds, os);
    if (!os) throw IoError("failed writing bounds file: " + path);
}

inline FeatureBounds load_bounds(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "nplb-bounds v1") {
        throw IoError("unrecognized bounds file header: '" + line + "'");
    }
    FeatureBounds bounds;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string condition, feature, interval, unit;
        if (!(ss >> condition >> feature >> interval)) throw IoError("malformed bounds line: '" + line + "'");
        bounds.conditions[condition][feature] = Interval::parse(interval);
        if (ss >> unit) bounds.units[feature] = unit;
    }
    return bounds;
}

inline FeatureBounds load_bounds(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open bounds file: " + path);
    return load_bounds(is);
}

}  // namespace nplb
