// End-to-end checks of the CLI surface: artifact shapes, exit codes, and the
// file-format contracts. Driven through the real binary (NPLB_CLI env var).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nplb/cohort.hpp"
#include "nplb/model.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("NPLB_CLI");
    REQUIRE_MESSAGE(env != nullptr, "NPLB_CLI not set; run through ctest");
    return env;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "nplb_cli_tests";
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + cli_path() + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

size_t count_lines(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    size_t n = 0;
    while (std::getline(is, line)) n += !line.empty();
    return n;
}

}  // namespace

TEST_CASE("generate + train + embed + risk + pseudotime pipeline") {
    const fs::path work = work_dir();
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string gen_dir = (work / "gen").string();

    REQUIRE(run_cli("generate --seed 7 --out " + gen_dir +
                    " --bfh 120 --apparently 150 --unhealthy 150 --future-fraction 0.4") == 0);
    const std::string cohort = gen_dir + "/cohort.csv";
    REQUIRE(fs::exists(cohort));
    REQUIRE(fs::exists(gen_dir + "/bounds.txt"));
    REQUIRE(fs::exists(gen_dir + "/manifest.json"));

    // default bounds file carries the clinically-normal rows
    const std::string bounds_text = slurp(gen_dir + "/bounds.txt");
    CHECK(bounds_text.find("bfh_female hdl [1.3,inf)") != std::string::npos);
    CHECK(bounds_text.find("bfh_male hdl [1,inf)") != std::string::npos);
    CHECK(bounds_text.find("glucose [70,100]") != std::string::npos);
    CHECK(bounds_text.find("hba1c (-inf,42)") != std::string::npos);
    CHECK(bounds_text.find("crp (-inf,10)") != std::string::npos);
    CHECK(bounds_text.find("total_cholesterol (-inf,5.18]") != std::string::npos);

    // train quickly on the small cohort
    const std::string train_dir = (work / "train").string();
    REQUIRE(run_cli("train --cohort " + cohort + " --out " + train_dir +
                    " --seed 3 --epochs 4 --n-triplets 600 --batch-size 128 --hidden1 16 --hidden2 8 "
                    "--embed-dim 4 --fold 2") == 0);
    REQUIRE(fs::exists(train_dir + "/model.ckpt"));
    REQUIRE(fs::exists(train_dir + "/loss_log.csv"));
    CHECK(count_lines(train_dir + "/loss_log.csv") == 5);  // header + 4 epochs

    // checkpoint loads and has the requested shape
    const nplb::ModelParams model = nplb::load_model(train_dir + "/model.ckpt");
    CHECK(model.input_dim() == 7);
    CHECK(model.output_dim() == 4);

    // embeddings: one row per non-synthetic record
    const std::string embed_dir = (work / "embed").string();
    REQUIRE(run_cli("embed --cohort " + cohort + " --model " + train_dir + "/model.ckpt --out " + embed_dir) ==
            0);
    CHECK(count_lines(embed_dir + "/embeddings.csv") == 1 + 420);  // header + records

    // risk report: one block per backend
    const std::string risk_dir = (work / "risk").string();
    REQUIRE(run_cli("risk --cohort " + cohort + " --model " + train_dir +
                    "/model.ckpt --backends raw,mahalanobis,p0,embedding --clamp-lower-bound --out " +
                    risk_dir) == 0);
    const std::string report = slurp(risk_dir + "/risk_report.txt");
    CHECK(report.find("nplb-risk-report v1") == 0);
    for (const char* name : {"backend raw", "backend mahalanobis", "backend p0", "backend embedding"}) {
        CHECK(report.find(name) != std::string::npos);
    }

    const std::string pt_dir = (work / "pt").string();
    REQUIRE(run_cli("pseudotime --cohort " + cohort + " --model " + train_dir +
                    "/model.ckpt --backend embedding --clamp-lower-bound --out " + pt_dir) == 0);
    std::ifstream pt(pt_dir + "/pseudotime.csv");
    std::string header;
    std::getline(pt, header);
    CHECK(header == "condition,n,r");
}

TEST_CASE("augmenting a cohort with zero bona fide records fails with a data error") {
    const fs::path work = work_dir() / "nobfh";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string gen_dir = (work / "gen").string();
    REQUIRE(run_cli("generate --seed 1 --out " + gen_dir + " --bfh 0 --apparently 30 --unhealthy 30") == 0);
    CHECK(run_cli("augment --cohort " + gen_dir + "/cohort.csv --out " + (work / "aug").string() +
                  " --fold 3") == 2);
}

TEST_CASE("usage errors exit 1") {
    const fs::path work = work_dir() / "usage";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string gen_dir = (work / "gen").string();
    REQUIRE(run_cli("generate --seed 1 --out " + gen_dir + " --bfh 20 --apparently 20 --unhealthy 20") == 0);

    // odd NPLB power is rejected up front
    CHECK(run_cli("train --cohort " + gen_dir + "/cohort.csv --out " + (work / "t").string() +
                  " --loss nplb --p 3 --epochs 1") == 1);
    // unknown subcommand / missing required flag
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("train") == 1);
    // missing input file is a data-class error surfaced by CLI validation
    CHECK(run_cli("embed --cohort /nonexistent.csv --model /nonexistent.ckpt --out " +
                  (work / "e").string()) != 0);
}

TEST_CASE("options can come from a --config file") {
    const fs::path work = work_dir() / "configfile";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path ini = work / "run.ini";
    {
        std::ofstream os(ini);
        os << "[generate]\n"
           << "seed=9\n"
           << "bfh=24\n"
           << "apparently=30\n"
           << "unhealthy=30\n"
           << "out=\"" << (work / "gen").string() << "\"\n";
    }
    REQUIRE(run_cli("--config " + ini.string() + " generate") == 0);
    const nplb::Cohort cohort = nplb::load_cohort((work / "gen" / "cohort.csv").string());
    CHECK(cohort.records.size() == 84);
}

TEST_CASE("benchmark command writes one row per loss kind") {
    const fs::path work = work_dir() / "bench";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string out = (work / "b").string();
    REQUIRE(run_cli("benchmark --out " + out +
                    " --losses traditional,swap,nplb --seeds 2 --per-class 30 --epochs 2 --n-triplets 200 "
                    "--batch-size 64 --hidden1 8 --hidden2 6 --embed-dim 3 --knn-k 5") == 0);
    CHECK(count_lines(out + "/benchmark.csv") == 4);  // header + 3 losses
    std::ifstream is(out + "/benchmark.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "loss,weighted_f1_mean,weighted_f1_std,micro_f1_mean,micro_f1_std,mean_unif");
}
