#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using testing_support::read_file;
using testing_support::TempDir;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(REFTRAJ_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

std::vector<std::string> listing(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

const char* kSmallWorld = "synth --sites-count 60 --points-per-class 15 --changing-per-transition 4";

}  // namespace

TEST(Cli, ValidateTenSiteFixture) {
    TempDir out("cli_validate");
    ASSERT_EQ(run("--output-dir " + q(out.path()) + " --data-dir " + q(REFTRAJ_FIXTURES "/ten_sites") + " validate"), 0);
    EXPECT_EQ(read_file(out / "funnel.csv"), "stage,count\ninput,10\ndropped_area,3\ndropped_start_year,3\nkept,4\n");
    const auto manifest = read_json(out / "manifest.json");
    EXPECT_EQ(manifest["command"], "validate");
    EXPECT_EQ(manifest["inputs"].size(), 2u);
    EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(manifest["seed"].is_null());
    bool listed = false;
    for (const auto& a : manifest["artifacts"]) listed |= a["file"] == "funnel.csv";
    EXPECT_TRUE(listed);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    TempDir out("cli_unknown");
    EXPECT_EQ(run("--output-dir " + q(out.path()) + " frobnicate"), 1);
    EXPECT_EQ(run("--output-dir " + q(out.path())), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ModuleErrorWritesRecordAndCleansUp) {
    TempDir out("cli_error");
    TempDir data("cli_error_data");
    fs::copy(REFTRAJ_FIXTURES "/ten_sites", data.path(), fs::copy_options::recursive);
    testing_support::write_file(data / "sites.csv",
                                "site_id,lon,lat,area_ha,start_year,strategy\ns01,-47,-22,2,2020,Coppicing\n");
    EXPECT_EQ(run("--output-dir " + q(out.path()) + " --data-dir " + q(data.path()) + " validate"), 2);
    const auto err = read_json(out / "error.json");
    EXPECT_EQ(err["error"], "UnknownStrategy");
    EXPECT_EQ(err["line"], 2);
    EXPECT_EQ(listing(out.path()), std::vector<std::string>{"error.json"});
}

TEST(Cli, StochasticCommandsNeedSeed) {
    TempDir out("cli_seed");
    EXPECT_EQ(run("--output-dir " + q(out.path()) + " " + kSmallWorld), 2);
    EXPECT_EQ(read_json(out / "error.json")["error"], "InvalidArgument");
}

TEST(Cli, TrajectoriesNeedReferences) {
    TempDir out("cli_norefs");
    EXPECT_NE(run("--output-dir " + q(out.path()) + " --data-dir " + q(REFTRAJ_FIXTURES "/ten_sites") + " trajectories"), 0);
}

TEST(Cli, PipelineIsDeterministicAndThreadInvariant) {
    TempDir root("cli_pipeline");
    auto pipeline = [&](const std::string& tag, int threads) {
        const auto world = root / (tag + "_world");
        const std::string common = " --seed 7 --threads " + std::to_string(threads) + " --data-dir " + q(world);
        EXPECT_EQ(run("--output-dir " + q(world) + " --seed 7 " + kSmallWorld), 0);
        EXPECT_EQ(run("--output-dir " + q(root / (tag + "_refs")) + common + " references"), 0);
        EXPECT_EQ(run("--output-dir " + q(root / (tag + "_traj")) + common + " trajectories --aggregate strategy"), 0);
        EXPECT_EQ(run("--output-dir " + q(root / (tag + "_proj")) + common + " project"), 0);
        EXPECT_EQ(run("--output-dir " + q(root / (tag + "_pred")) + common +
                      " predict --trees 10 --feature-sets embeddings covariates_spectral"),
                  0);
        EXPECT_EQ(run("--output-dir " + q(root / (tag + "_report")) + common + " report"), 0);
    };
    pipeline("a", 1);
    pipeline("b", 1);
    pipeline("c", 3);
    for (const char* stage : {"world", "refs", "traj", "proj", "pred", "report"}) {
        const auto a = root / (std::string("a_") + stage);
        const auto names = listing(a);
        ASSERT_FALSE(names.empty());
        for (const char* other : {"b_", "c_"}) {
            const auto b = root / (std::string(other) + stage);
            ASSERT_EQ(names, listing(b)) << stage;
            for (const auto& n : names) {
                if (n == "manifest.json" && std::string(other) == "c_") continue;  // records --threads
                EXPECT_EQ(read_file(a / n), read_file(b / n)) << stage << "/" << n;
            }
        }
    }
    const auto m = read_json(root / "a_pred" / "manifest.json");
    EXPECT_EQ(m["seed"], 7);
    EXPECT_GE(m["inputs"].size(), 5u);
}

TEST(Cli, ConfigFileWithFlagOverride) {
    TempDir root("cli_config");
    testing_support::write_file(root / "run.ini", "seed=11\nmin-area=5\n");
    const auto world = root / "world";
    ASSERT_EQ(run("--config " + q(root / "run.ini") + " --output-dir " + q(world) + " " + kSmallWorld), 0);
    EXPECT_EQ(read_json(world / "manifest.json")["seed"], 11);

    ASSERT_EQ(run("--config " + q(root / "run.ini") + " --output-dir " + q(root / "v1") + " --data-dir " + q(world) +
                  " validate"),
              0);
    ASSERT_EQ(run("--config " + q(root / "run.ini") + " --min-area 1 --output-dir " + q(root / "v2") + " --data-dir " +
                  q(world) + " validate"),
              0);
    EXPECT_EQ(read_json(root / "v1" / "manifest.json")["config"]["min_area"], 5.0);
    EXPECT_EQ(read_json(root / "v2" / "manifest.json")["config"]["min_area"], 1.0);
    EXPECT_NE(read_file(root / "v1" / "funnel.csv"), read_file(root / "v2" / "funnel.csv"));
}

TEST(Cli, OutputTablesHaveFixedHeaders) {
    TempDir root("cli_headers");
    const auto world = root / "world";
    ASSERT_EQ(run("--output-dir " + q(world) + " --seed 3 " + kSmallWorld), 0);
    ASSERT_EQ(run("--output-dir " + q(root / "t") + " --data-dir " + q(world) + " trajectories"), 0);
    ASSERT_EQ(run("--output-dir " + q(root / "p") + " --seed 1 --data-dir " + q(world) +
                  " predict --trees 5 --feature-sets spectral"),
              0);
    auto header = [&](const fs::path& p) {
        const auto text = read_file(p);
        return text.substr(0, text.find('\n'));
    };
    EXPECT_EQ(header(root / "t" / "similarity.csv"), "site_id,reference,year,delta_t,similarity");
    EXPECT_EQ(header(root / "p" / "predict_folds.csv"), "task,model,feature_set,fold,metric,value");
    EXPECT_EQ(header(root / "p" / "predict_summary.csv"), "task,model,feature_set,metric,mean,sd");
    EXPECT_EQ(header(world / "ground_truth.csv"), "id,kind,true_class,from,to,transition_year,rate");
    EXPECT_EQ(read_file(root / "t" / "similarity.csv").find('\r'), std::string::npos);
}
