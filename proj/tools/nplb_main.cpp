// nplb command-line interface: synthetic cohorts, preprocessing, augmentation,
// triplet training, embeddings, risk reports, benchmarks, and pseudotime
// correlation, all reproducible from a single --seed per command.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nplb/nplb.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command, json config) {
    json manifest;
    manifest["command"] = command;
    manifest["generated_at"] = iso_timestamp();  // the only timestamp in any artifact
    manifest["config"] = std::move(config);
    std::ofstream os(out_dir / "manifest.json");
    if (!os) throw nplb::IoError("cannot write manifest in " + out_dir.string());
    os << manifest.dump(2) << "\n";
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw nplb::IoError("cannot create output directory " + out + ": " + ec.message());
    return dir;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Shared preprocessing flags for the pipeline commands.
struct PipelineFlags {
    std::string sex = "both";
    bool no_normalize = false;
    double min_complete = 0.75;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& flags) {
    cmd->add_option("--sex", flags.sex, "Restrict to one sex: female, male, or both")
        ->check(CLI::IsMember({"female", "male", "both"}))
        ->capture_default_str();
    cmd->add_flag("--no-normalize", flags.no_normalize, "Skip the per-sex quantile normalization");
    cmd->add_option("--min-complete", flags.min_complete, "Feature completeness threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
}

nplb::Cohort filter_sex(const nplb::Cohort& cohort, const std::string& sex) {
    if (sex == "both") return cohort;
    nplb::Cohort out;
    out.feature_names = cohort.feature_names;
    const nplb::Sex keep = nplb::sex_from_string(sex);
    for (const auto& rec : cohort.records) {
        if (rec.sex == keep) out.records.push_back(rec);
    }
    if (out.records.empty()) throw nplb::DataError("no records left after --sex " + sex);
    return out;
}

nplb::Cohort drop_synthetic(const nplb::Cohort& cohort) {
    nplb::Cohort out;
    out.feature_names = cohort.feature_names;
    for (const auto& rec : cohort.records) {
        if (!rec.synthetic()) out.records.push_back(rec);
    }
    return out;
}

// Completeness filter + missing-record drop + optional sex restriction.
// Normalization is applied separately so augmentation can run on raw values.
nplb::Cohort prepare_cohort(const nplb::Cohort& input, const PipelineFlags& flags,
                            nplb::PreprocessReport* report = nullptr) {
    const nplb::Cohort filtered = filter_sex(input, flags.sex);
    const nplb::PreprocessResult pre =
        nplb::preprocess(filtered, {.min_completeness = flags.min_complete, .normalize = false});
    if (report != nullptr) *report = pre.report;
    return pre.combined();
}

json pipeline_config_json(const PipelineFlags& flags) {
    return {{"sex", flags.sex}, {"normalize", !flags.no_normalize}, {"min_complete", flags.min_complete}};
}

nplb::LossKind parse_loss(const std::string& name, int p) { return nplb::loss_kind_from_name(name, p); }

void warn_unavailable_cells(const nplb::ReferenceSet& refs, const std::string& backend) {
    for (const auto& [key, cell] : refs.cells) {
        if (cell.available) continue;
        static const char* group_names[] = {"[36,45]", "[46,50]", "[51,55]", "[56,60]", "[61,65]", "[66,75]"};
        std::cerr << "warning: backend " << backend << ": reference cell ("
                  << (key.first == 0 ? "female" : "male") << ", " << group_names[key.second]
                  << ") unavailable; its patients are Unassigned\n";
    }
}

// --- command setup -------------------------------------------------------------

struct GenerateArgs {
    std::string out;
    uint64_t seed = 0;
    size_t bfh = 240, apparently = 800, unhealthy = 800;
    double future_fraction = 0.3;
    double missing_rate = 0.0;
};

int run_generate(const GenerateArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    const nplb::FeatureBounds bounds = nplb::default_feature_bounds();
    nplb::GeneratorConfig cfg = nplb::default_generator_config(args.bfh, args.apparently, args.unhealthy);
    cfg.future_fraction = args.future_fraction;
    cfg.missing_rate = args.missing_rate;

    nplb::RandomSource rng = nplb::RandomSource(args.seed).derive(11);
    const nplb::Cohort cohort = nplb::generate_cohort(cfg, bounds, rng);
    nplb::save_cohort(cohort, (out_dir / "cohort.csv").string());
    nplb::save_bounds(bounds, (out_dir / "bounds.txt").string());
    write_manifest(out_dir, "generate",
                   {{"seed", args.seed},
                    {"sizes", {{"bona_fide", args.bfh}, {"apparently", args.apparently}, {"unhealthy", args.unhealthy}}},
                    {"future_fraction", args.future_fraction},
                    {"missing_rate", args.missing_rate},
                    {"features", cfg.feature_names}});
    std::cout << "wrote " << (out_dir / "cohort.csv").string() << " (" << cohort.records.size()
              << " records)\n";
    return kExitOk;
}

struct PreprocessArgs {
    std::string cohort_file;
    std::string out;
    PipelineFlags flags;
};

int run_preprocess(const PreprocessArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    const nplb::Cohort cohort = filter_sex(nplb::load_cohort(args.cohort_file), args.flags.sex);
    const nplb::PreprocessResult result = nplb::preprocess(
        cohort, {.min_completeness = args.flags.min_complete, .normalize = !args.flags.no_normalize});

    nplb::save_cohort(result.female, (out_dir / "cohort_female.csv").string());
    nplb::save_cohort(result.male, (out_dir / "cohort_male.csv").string());
    std::ofstream report(out_dir / "report.txt");
    report << "dropped_features " << result.report.dropped_features.size() << "\n";
    for (const auto& f : result.report.dropped_features) report << "feature " << f << "\n";
    report << "dropped_records " << result.report.dropped_record_ids.size() << "\n";
    for (const auto& id : result.report.dropped_record_ids) report << "record " << id << "\n";
    report << "kept_female " << result.report.kept_female << "\n";
    report << "kept_male " << result.report.kept_male << "\n";

    json cfg = pipeline_config_json(args.flags);
    cfg["cohort"] = args.cohort_file;
    write_manifest(out_dir, "preprocess", cfg);
    std::cout << "kept " << result.report.kept_female << " female / " << result.report.kept_male
              << " male records; dropped " << result.report.dropped_features.size() << " features\n";
    return kExitOk;
}

struct AugmentArgs {
    std::string cohort_file;
    std::string bounds_file;
    std::string out;
    uint64_t seed = 0;
    size_t fold = 3;
};

int run_augment(const AugmentArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    const nplb::Cohort cohort = nplb::load_cohort(args.cohort_file);
    const nplb::FeatureBounds bounds =
        args.bounds_file.empty() ? nplb::default_feature_bounds() : nplb::load_bounds(args.bounds_file);
    nplb::RandomSource rng = nplb::RandomSource(args.seed).derive(12);
    const nplb::Cohort augmented = nplb::augment_bona_fide(cohort, args.fold, bounds, rng);
    nplb::save_cohort(augmented, (out_dir / "cohort_augmented.csv").string());
    write_manifest(out_dir, "augment",
                   {{"seed", args.seed},
                    {"fold", args.fold},
                    {"cohort", args.cohort_file},
                    {"bounds", args.bounds_file.empty() ? "<default>" : args.bounds_file},
                    {"records_in", cohort.records.size()},
                    {"records_out", augmented.records.size()}});
    std::cout << "appended " << augmented.records.size() - cohort.records.size() << " synthetic records\n";
    return kExitOk;
}

struct TrainArgs {
    std::string cohort_file;
    std::string bounds_file;
    std::string out;
    PipelineFlags flags;
    nplb::TrainConfig config;
    std::string loss_name = "nplb";
    int loss_p = 2;
    size_t fold = 3;
};

int run_train(const TrainArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    nplb::TrainConfig config = args.config;
    config.loss = parse_loss(args.loss_name, args.loss_p);

    const nplb::FeatureBounds bounds =
        args.bounds_file.empty() ? nplb::default_feature_bounds() : nplb::load_bounds(args.bounds_file);
    nplb::PreprocessReport report;
    nplb::Cohort cohort = prepare_cohort(nplb::load_cohort(args.cohort_file), args.flags, &report);
    if (args.fold > 0) {
        nplb::RandomSource aug_rng = nplb::RandomSource(config.seed).derive(13);
        cohort = nplb::augment_bona_fide(cohort, args.fold, bounds, aug_rng);
    }
    if (!args.flags.no_normalize) nplb::quantile_normalize_per_sex(cohort);

    const nplb::Matrix features = cohort.feature_matrix();
    const std::vector<int> labels = cohort.labels_as_int();
    const nplb::TrainResult result = nplb::train(features, labels, config);

    nplb::save_model(result.params, (out_dir / "model.ckpt").string());
    std::ofstream log(out_dir / "loss_log.csv");
    log << "epoch,lr,mean_loss\n";
    char buf[96];
    for (const auto& entry : result.log) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g\n", entry.epoch, entry.lr, entry.mean_loss);
        log << buf;
    }

    json cfg = pipeline_config_json(args.flags);
    cfg["cohort"] = args.cohort_file;
    cfg["bounds"] = args.bounds_file.empty() ? "<default>" : args.bounds_file;
    cfg["loss"] = config.loss.name();
    cfg["p"] = args.loss_p;
    cfg["fold"] = args.fold;
    cfg["epochs"] = config.epochs;
    cfg["lr"] = config.lr;
    cfg["gamma"] = config.gamma;
    cfg["decay_every"] = config.decay_every;
    cfg["margin"] = config.margin.epsilon;
    cfg["batch_size"] = config.batch_size;
    cfg["n_triplets"] = config.n_triplets;
    cfg["seed"] = config.seed;
    cfg["embed_dim"] = config.embed_dim;
    cfg["hidden1"] = config.hidden1;
    cfg["hidden2"] = config.hidden2;
    cfg["dropout"] = config.dropout_rate;
    cfg["train_records"] = cohort.records.size();
    cfg["dropped_features"] = report.dropped_features;
    cfg["dropped_records"] = report.dropped_record_ids.size();
    write_manifest(out_dir, "train", cfg);

    std::cout << "trained " << config.loss.name() << " for " << result.log.size() << " epochs; final loss "
              << (result.log.empty() ? 0.0 : result.log.back().mean_loss) << "\n";
    return kExitOk;
}

struct EmbedArgs {
    std::string cohort_file;
    std::string model_file;
    std::string out;
    PipelineFlags flags;
};

int run_embed(const EmbedArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    const nplb::ModelParams model = nplb::load_model(args.model_file);
    nplb::Cohort cohort = drop_synthetic(prepare_cohort(nplb::load_cohort(args.cohort_file), args.flags));
    if (!args.flags.no_normalize) nplb::quantile_normalize_per_sex(cohort);

    const nplb::Matrix embeddings = nplb::infer(model, cohort.feature_matrix());
    std::ofstream os(out_dir / "embeddings.csv");
    os << "id";
    for (size_t j = 0; j < embeddings.cols(); ++j) os << ",e" << j;
    os << "\n";
    char buf[40];
    for (size_t i = 0; i < embeddings.rows(); ++i) {
        os << cohort.records[i].id;
        for (size_t j = 0; j < embeddings.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", embeddings(i, j));
            os << "," << buf;
        }
        os << "\n";
    }

    json cfg = pipeline_config_json(args.flags);
    cfg["cohort"] = args.cohort_file;
    cfg["model"] = args.model_file;
    cfg["rows"] = embeddings.rows();
    write_manifest(out_dir, "embed", cfg);
    std::cout << "embedded " << embeddings.rows() << " records into R^" << embeddings.cols() << "\n";
    return kExitOk;
}

struct RiskArgs {
    std::string cohort_file;
    std::string model_file;
    std::string out;
    std::string backends = "raw,mahalanobis,p0";
    bool clamp_lower_bound = false;
    PipelineFlags flags;
};

int run_risk(const RiskArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    nplb::Cohort cohort = drop_synthetic(prepare_cohort(nplb::load_cohort(args.cohort_file), args.flags));
    if (!args.flags.no_normalize) nplb::quantile_normalize_per_sex(cohort);

    std::optional<nplb::ModelParams> model;
    if (!args.model_file.empty()) model = nplb::load_model(args.model_file);

    std::vector<nplb::DistanceBackend> backends;
    for (const std::string& name : split_list(args.backends)) {
        if (name == "raw") {
            backends.push_back(nplb::DistanceBackend::raw_euclidean());
        } else if (name == "mahalanobis") {
            backends.push_back(nplb::DistanceBackend::mahalanobis());
        } else if (name == "p0") {
            std::vector<std::string> subset;
            for (const auto& f : nplb::p0_feature_names()) {
                for (const auto& have : cohort.feature_names) {
                    if (have == f) subset.push_back(f);
                }
            }
            if (subset.empty()) throw nplb::DataError("cohort has none of the P0 features");
            backends.push_back(nplb::DistanceBackend::p0_euclidean(subset));
        } else if (name == "embedding") {
            if (!model) throw nplb::ConfigError("--backends embedding requires --model");
            backends.push_back(nplb::DistanceBackend::embedding_euclidean(*model));
        } else {
            throw nplb::ConfigError("unknown backend '" + name + "' (raw|mahalanobis|p0|embedding)");
        }
    }
    if (backends.empty()) throw nplb::ConfigError("no backends selected");

    const nplb::RiskOptions options{.clamp_lower_bound = args.clamp_lower_bound};
    std::ofstream os(out_dir / "risk_report.txt");
    os << "nplb-risk-report v1\n";
    bool any_future = false;
    for (const auto& rec : cohort.records) {
        any_future |= rec.label == nplb::HealthLabel::ApparentlyHealthy && rec.future.has_value();
    }
    for (const auto& backend : backends) {
        const nplb::ReferenceSet refs = nplb::build_reference_set(cohort, backend);
        warn_unavailable_cells(refs, backend.name());
        const auto distribution = nplb::risk_distribution(cohort, refs, backend, options);
        if (any_future) {
            const auto conversions = nplb::future_risk_validation(cohort, refs, backend, options);
            nplb::write_risk_block(os, backend, refs, distribution, &conversions, options);
        } else {
            nplb::write_risk_block(os, backend, refs, distribution, nullptr, options);
        }
    }

    json cfg = pipeline_config_json(args.flags);
    cfg["cohort"] = args.cohort_file;
    cfg["model"] = args.model_file.empty() ? "<none>" : args.model_file;
    cfg["backends"] = split_list(args.backends);
    cfg["clamp_lower_bound"] = args.clamp_lower_bound;
    write_manifest(out_dir, "risk", cfg);
    std::cout << "wrote risk report for " << backends.size() << " backend(s)\n";
    return kExitOk;
}

struct BenchmarkArgs {
    std::string out;
    std::string losses = "traditional,swap,nplb";
    size_t n_seeds = 5;
    nplb::BenchmarkSpec spec = nplb::default_benchmark_spec();
};

int run_benchmark_cmd(const BenchmarkArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    nplb::BenchmarkSpec spec = args.spec;
    spec.losses.clear();
    for (const std::string& name : split_list(args.losses)) spec.losses.push_back(parse_loss(name, 2));
    spec.seeds.clear();
    for (uint64_t s = 1; s <= args.n_seeds; ++s) spec.seeds.push_back(s);

    const auto entries = nplb::run_benchmark(spec);
    std::ofstream os(out_dir / "benchmark.csv");
    nplb::write_benchmark_report(os, entries);

    json cfg;
    cfg["losses"] = split_list(args.losses);
    cfg["seeds"] = spec.seeds;
    cfg["knn_k"] = spec.knn_k;
    cfg["train_fraction"] = spec.train_fraction;
    cfg["data"] = {{"classes", spec.data.n_classes}, {"per_class", spec.data.per_class},
                   {"dim", spec.data.dim},           {"center_scale", spec.data.center_scale},
                   {"std_min", spec.data.std_min},   {"std_max", spec.data.std_max}};
    cfg["train"] = {{"epochs", spec.train.epochs},     {"lr", spec.train.lr},
                    {"gamma", spec.train.gamma},       {"decay_every", spec.train.decay_every},
                    {"margin", spec.train.margin.epsilon}, {"batch_size", spec.train.batch_size},
                    {"n_triplets", spec.train.n_triplets}, {"embed_dim", spec.train.embed_dim},
                    {"hidden1", spec.train.hidden1},   {"hidden2", spec.train.hidden2}};
    write_manifest(out_dir, "benchmark", cfg);

    std::cout << "benchmark finished; " << entries.size() << " loss kinds x " << spec.seeds.size()
              << " seeds\n";
    return kExitOk;
}

struct PseudotimeArgs {
    std::string cohort_file;
    std::string model_file;
    std::string out;
    std::string backend = "embedding";
    bool clamp_lower_bound = false;
    PipelineFlags flags;
};

int run_pseudotime(const PseudotimeArgs& args) {
    const fs::path out_dir = ensure_out_dir(args.out);
    nplb::Cohort cohort = drop_synthetic(prepare_cohort(nplb::load_cohort(args.cohort_file), args.flags));
    if (!args.flags.no_normalize) nplb::quantile_normalize_per_sex(cohort);

    nplb::DistanceBackend backend = nplb::DistanceBackend::raw_euclidean();
    if (args.backend == "embedding") {
        if (args.model_file.empty()) throw nplb::ConfigError("--backend embedding requires --model");
        backend = nplb::DistanceBackend::embedding_euclidean(nplb::load_model(args.model_file));
    } else if (args.backend == "mahalanobis") {
        backend = nplb::DistanceBackend::mahalanobis();
    } else if (args.backend == "p0") {
        backend = nplb::DistanceBackend::p0_euclidean();
    } else if (args.backend != "raw") {
        throw nplb::ConfigError("unknown backend '" + args.backend + "'");
    }

    const nplb::ReferenceSet refs = nplb::build_reference_set(cohort, backend);
    warn_unavailable_cells(refs, backend.name());
    const auto result =
        nplb::pseudotime_correlation(cohort, refs, backend, {.clamp_lower_bound = args.clamp_lower_bound});

    std::ofstream os(out_dir / "pseudotime.csv");
    os << "condition,n,r\n";
    for (const auto& [condition, res] : result) {
        os << condition << "," << res.n << ",";
        if (res.r) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.6f", *res.r);
            os << buf;
        } else {
            os << "insufficient";
        }
        os << "\n";
    }

    json cfg = pipeline_config_json(args.flags);
    cfg["cohort"] = args.cohort_file;
    cfg["model"] = args.model_file.empty() ? "<none>" : args.model_file;
    cfg["backend"] = args.backend;
    cfg["clamp_lower_bound"] = args.clamp_lower_bound;
    write_manifest(out_dir, "pseudotime", cfg);
    std::cout << "wrote pseudotime report for " << result.size() << " condition(s)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-metric-learning toolkit: NPLB triplet objective, embedding training, and "
                 "single-visit health-risk reports"};
    app.require_subcommand(1);
    // usage: nplb --config run.ini <command>, with options under [<command>]
    app.set_config("--config", "", "Read options from an INI file (sections per command)");
    app.allow_config_extras(true);

    GenerateArgs gen;
    auto* cmd_gen = app.add_subcommand("generate", "Generate a synthetic labeled cohort + bounds file");
    cmd_gen->add_option("--out", gen.out, "Output directory")->required();
    cmd_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    cmd_gen->add_option("--bfh", gen.bfh, "Bona fide healthy count")->capture_default_str();
    cmd_gen->add_option("--apparently", gen.apparently, "Apparently healthy count")->capture_default_str();
    cmd_gen->add_option("--unhealthy", gen.unhealthy, "Unhealthy count")->capture_default_str();
    cmd_gen->add_option("--future-fraction", gen.future_fraction, "Expected conversion fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd_gen->add_option("--missing-rate", gen.missing_rate, "Per-cell missingness rate")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();

    PreprocessArgs pre;
    auto* cmd_pre = app.add_subcommand("preprocess", "Completeness filter, per-sex split, normalization");
    cmd_pre->add_option("--cohort", pre.cohort_file, "Cohort CSV")->required()->check(CLI::ExistingFile);
    cmd_pre->add_option("--out", pre.out, "Output directory")->required();
    add_pipeline_flags(cmd_pre, pre.flags);

    AugmentArgs aug;
    auto* cmd_aug = app.add_subcommand("augment", "Append rejection-sampled synthetic bona fide records");
    cmd_aug->add_option("--cohort", aug.cohort_file, "Cohort CSV")->required()->check(CLI::ExistingFile);
    cmd_aug->add_option("--bounds", aug.bounds_file, "Bounds file (defaults to the built-in ranges)")
        ->check(CLI::ExistingFile);
    cmd_aug->add_option("--out", aug.out, "Output directory")->required();
    cmd_aug->add_option("--seed", aug.seed, "Random seed")->capture_default_str();
    cmd_aug->add_option("--fold", aug.fold, "Synthetic records per real bona fide record")
        ->capture_default_str();

    TrainArgs tr;
    auto* cmd_tr = app.add_subcommand("train", "Preprocess, augment, and train an embedding model");
    cmd_tr->add_option("--cohort", tr.cohort_file, "Cohort CSV")->required()->check(CLI::ExistingFile);
    cmd_tr->add_option("--bounds", tr.bounds_file, "Bounds file for augmentation")->check(CLI::ExistingFile);
    cmd_tr->add_option("--out", tr.out, "Output directory")->required();
    cmd_tr->add_option("--seed", tr.config.seed, "Random seed")->capture_default_str();
    cmd_tr->add_option("--loss", tr.loss_name, "Objective: traditional, swap, or nplb")
        ->check(CLI::IsMember({"traditional", "swap", "nplb"}))
        ->capture_default_str();
    cmd_tr->add_option("--p", tr.loss_p, "NPLB regularizer power (must be even and positive)")
        ->capture_default_str();
    cmd_tr->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
    cmd_tr->add_option("--lr", tr.config.lr, "Initial learning rate")->capture_default_str();
    cmd_tr->add_option("--gamma", tr.config.gamma, "Exponential decay factor")->capture_default_str();
    cmd_tr->add_option("--decay-every", tr.config.decay_every, "Epochs between decay steps")
        ->capture_default_str();
    cmd_tr->add_option("--margin", tr.config.margin.epsilon, "Triplet margin")->capture_default_str();
    cmd_tr->add_option("--batch-size", tr.config.batch_size, "Triplets per optimizer step")
        ->capture_default_str();
    cmd_tr->add_option("--n-triplets", tr.config.n_triplets, "Offline triplets to sample")
        ->capture_default_str();
    cmd_tr->add_option("--fold", tr.fold, "Bona fide augmentation fold")->capture_default_str();
    cmd_tr->add_option("--embed-dim", tr.config.embed_dim, "Embedding dimension")->capture_default_str();
    cmd_tr->add_option("--hidden1", tr.config.hidden1, "First hidden width")->capture_default_str();
    cmd_tr->add_option("--hidden2", tr.config.hidden2, "Second hidden width")->capture_default_str();
    cmd_tr->add_option("--dropout", tr.config.dropout_rate, "Dropout rate for the first two layers")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();
    add_pipeline_flags(cmd_tr, tr.flags);

    EmbedArgs em;
    auto* cmd_em = app.add_subcommand("embed", "Embed a cohort with a trained model");
    cmd_em->add_option("--cohort", em.cohort_file, "Cohort CSV")->required()->check(CLI::ExistingFile);
    cmd_em->add_option("--model", em.model_file, "Model checkpoint")->required()->check(CLI::ExistingFile);
    cmd_em->add_option("--out", em.out, "Output directory")->required();
    add_pipeline_flags(cmd_em, em.flags);

    RiskArgs rk;
    auto* cmd_rk = app.add_subcommand("risk", "Risk-group distribution and future-risk validation");
    cmd_rk->add_option("--cohort", rk.cohort_file, "Cohort CSV")->required()->check(CLI::ExistingFile);
    cmd_rk->add_option("--model", rk.model_file, "Model checkpoint (for the embedding backend)")
        ->check(CLI::ExistingFile);
    cmd_rk->add_option("--out", rk.out, "Output directory")->required();
    cmd_rk->add_option("--backends", rk.backends, "Comma list: raw,mahalanobis,p0,embedding")
        ->capture_default_str();
    cmd_rk->add_flag("--clamp-lower-bound", rk.clamp_lower_bound,
                     "Replace interval lower bounds with 0 (see README)");
    add_pipeline_flags(cmd_rk, rk.flags);

    BenchmarkArgs bm;
    auto* cmd_bm = app.add_subcommand("benchmark", "Compare loss kinds over seeded synthetic blobs");
    cmd_bm->add_option("--out", bm.out, "Output directory")->required();
    cmd_bm->add_option("--losses", bm.losses, "Comma list of losses")->capture_default_str();
    cmd_bm->add_option("--seeds", bm.n_seeds, "Number of seeds (1..N)")->capture_default_str();
    cmd_bm->add_option("--classes", bm.spec.data.n_classes, "Blob classes")->capture_default_str();
    cmd_bm->add_option("--per-class", bm.spec.data.per_class, "Points per class")->capture_default_str();
    cmd_bm->add_option("--dim", bm.spec.data.dim, "Feature dimension")->capture_default_str();
    cmd_bm->add_option("--center-scale", bm.spec.data.center_scale, "Blob center spread")
        ->capture_default_str();
    cmd_bm->add_option("--knn-k", bm.spec.knn_k, "kNN neighbor count")->capture_default_str();
    cmd_bm->add_option("--train-fraction", bm.spec.train_fraction, "Train split fraction")
        ->capture_default_str();
    cmd_bm->add_option("--epochs", bm.spec.train.epochs, "Training epochs")->capture_default_str();
    cmd_bm->add_option("--n-triplets", bm.spec.train.n_triplets, "Triplets per run")->capture_default_str();
    cmd_bm->add_option("--batch-size", bm.spec.train.batch_size, "Batch size")->capture_default_str();
    cmd_bm->add_option("--embed-dim", bm.spec.train.embed_dim, "Embedding dimension")->capture_default_str();
    cmd_bm->add_option("--hidden1", bm.spec.train.hidden1, "First hidden width")->capture_default_str();
    cmd_bm->add_option("--hidden2", bm.spec.train.hidden2, "Second hidden width")->capture_default_str();

    PseudotimeArgs pt;
    auto* cmd_pt = app.add_subcommand("pseudotime", "Correlate health scores with time to diagnosis");
    cmd_pt->add_option("--cohort", pt.cohort_file, "Cohort CSV")->required()->check(CLI::ExistingFile);
    cmd_pt->add_option("--model", pt.model_file, "Model checkpoint")->check(CLI::ExistingFile);
    cmd_pt->add_option("--out", pt.out, "Output directory")->required();
    cmd_pt->add_option("--backend", pt.backend, "raw, mahalanobis, p0, or embedding")
        ->check(CLI::IsMember({"raw", "mahalanobis", "p0", "embedding"}))
        ->capture_default_str();
    cmd_pt->add_flag("--clamp-lower-bound", pt.clamp_lower_bound, "Replace interval lower bounds with 0");
    add_pipeline_flags(cmd_pt, pt.flags);

    try {
        app.parse(argc, argv);
        if (cmd_gen->parsed()) return run_generate(gen);
        if (cmd_pre->parsed()) return run_preprocess(pre);
        if (cmd_aug->parsed()) return run_augment(aug);
        if (cmd_tr->parsed()) return run_train(tr);
        if (cmd_em->parsed()) return run_embed(em);
        if (cmd_rk->parsed()) return run_risk(rk);
        if (cmd_bm->parsed()) return run_benchmark_cmd(bm);
        if (cmd_pt->parsed()) return run_pseudotime(pt);
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const nplb::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const nplb::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const nplb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
