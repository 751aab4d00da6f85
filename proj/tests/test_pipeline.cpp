#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "stmap/pipeline.hpp"

using namespace stmap;
namespace fs = std::filesystem;

namespace {

class PipelineTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("stmap_pipe_" +
                std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string slurp(const std::string& p) const {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    }

    // small simulated dataset on disk
    RunConfig simulate_into(const std::string& sub, bool with_suppression) {
        fs::create_directories(dir_ / sub);
        RunConfig cfg;
        cfg.set("outdir", (dir_ / sub).string());
        cfg.set("lattice_rows", "4");
        cfg.set("lattice_cols", "4");
        cfg.set("years", "3");
        cfg.set("base_expected", "40");
        cfg.set("seed", "5");
        if (with_suppression) cfg.set("suppress_threshold", "10");
        EXPECT_EQ(run_pipeline("simulate", cfg), 0);
        RunConfig fit;
        fit.set("counts", (dir_ / sub / "counts.csv").string());
        fit.set("population", (dir_ / sub / "population.csv").string());
        fit.set("edges", (dir_ / sub / "edges.txt").string());
        fit.set("seed", "5");
        fit.set("loglik_draws", "20");
        return fit;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(PipelineTest, RunConfigParsesAndValidates) {
    {
        std::ofstream out(path("run.cfg"));
        out << "# comment\nseed = 42\nprior=bym2\n\nk = 2\n";
    }
    auto cfg = RunConfig::load(path("run.cfg"));
    EXPECT_EQ(cfg.get("prior"), "bym2");
    EXPECT_EQ(cfg.get_long("seed", 0), 42);
    EXPECT_EQ(cfg.get_long("k", 0), 2);
    EXPECT_EQ(cfg.get("absent", "dflt"), "dflt");
    EXPECT_THROW(cfg.require("absent"), InputError);
    {
        std::ofstream out(path("bad.cfg"));
        out << "no equals sign here\n";
    }
    EXPECT_THROW(RunConfig::load(path("bad.cfg")), InputError);
}

TEST_F(PipelineTest, SimulateWritesLoadableArtifacts) {
    auto fit = simulate_into("sim", false);
    auto panel = load_panel(fit.get("counts"), fit.get("population"));
    EXPECT_EQ(panel.S, 16);
    EXPECT_EQ(panel.T, 3);
    EXPECT_FALSE(panel.suppressed);
    auto manifest = nlohmann::json::parse(slurp((dir_ / "sim" / "manifest.json").string()));
    EXPECT_EQ(manifest["command"], "simulate");
    EXPECT_EQ(manifest["seed"], 5);
    EXPECT_TRUE(manifest.contains("stage_seconds"));
}

TEST_F(PipelineTest, FitProducesArtifactsAndManifest) {
    auto cfg = simulate_into("data", false);
    fs::create_directories(dir_ / "out");
    cfg.set("outdir", (dir_ / "out").string());
    cfg.set("interaction", "1");
    ASSERT_EQ(run_pipeline("fit", cfg), 0);
    for (const char* f : {"risks.csv", "risk_classes.csv", "criteria.csv", "partition_report.csv",
                          "smr_space.csv", "smr_time.csv", "smr_boxplot.csv", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
    auto manifest = nlohmann::json::parse(slurp((dir_ / "out" / "manifest.json").string()));
    // decisions that affect numbers are recorded
    for (const char* key : {"seed", "rounding_rule", "interval_method", "ownership_rule",
                            "hyperprior", "truncate_at_9", "loglik_draws", "grid_offsets"})
        EXPECT_TRUE(manifest.contains(key)) << key;
}

TEST_F(PipelineTest, DeterministicCsvOutputs) {
    auto cfg = simulate_into("data", true);  // suppression exercises imputation too
    for (const char* sub : {"a", "b"}) {
        fs::create_directories(dir_ / sub);
        RunConfig c = cfg;
        c.set("outdir", (dir_ / sub).string());
        c.set("interaction", "1");
        ASSERT_EQ(run_pipeline("fit", c), 0);
    }
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
        if (entry.path().extension() != ".csv") continue;
        auto other = dir_ / "b" / entry.path().filename();
        ASSERT_TRUE(fs::exists(other));
        EXPECT_EQ(slurp(entry.path().string()), slurp(other.string()))
            << entry.path().filename();
        ++compared;
    }
    EXPECT_GT(compared, 3);
}

TEST_F(PipelineTest, ExitCodesFollowErrorTaxonomy) {
    RunConfig missing;
    missing.set("counts", path("nope.csv"));
    missing.set("population", path("nope2.csv"));
    missing.set("edges", path("nope3.txt"));
    EXPECT_EQ(run_pipeline("fit", missing), 2);
    EXPECT_EQ(run_pipeline("unknown-command", missing), 2);

    auto cfg = simulate_into("data", false);
    cfg.set("interaction", "9");
    EXPECT_EQ(run_pipeline("fit", cfg), 2);

    cfg.set("interaction", "1");
    cfg.set("newton_max_iter", "0");  // forces a fit failure
    fs::create_directories(dir_ / "failed");
    cfg.set("outdir", (dir_ / "failed").string());
    EXPECT_EQ(run_pipeline("fit", cfg), 3);
    // failed runs leave no partial outputs
    EXPECT_TRUE(fs::is_empty(dir_ / "failed"));
}

TEST_F(PipelineTest, TrendsRequiresMetadata) {
    auto cfg = simulate_into("data", false);
    EXPECT_EQ(run_pipeline("trends", cfg), 2);
    {
        std::ofstream out(path("meta.csv"));
        out << "area_id,state,region,urbanicity_pop\n";
        auto panel = load_panel(cfg.get("counts"), cfg.get("population"));
        for (int i = 0; i < panel.S; ++i)
            out << panel.area_ids[i] << "," << (i % 2 ? "AA" : "BB") << ","
                << (i % 2 ? "West" : "South") << "," << (i % 3 ? 30000 : 2000000) << "\n";
    }
    cfg.set("meta", path("meta.csv"));
    fs::create_directories(dir_ / "trends");
    cfg.set("outdir", (dir_ / "trends").string());
    cfg.set("interaction", "1");
    ASSERT_EQ(run_pipeline("trends", cfg), 0);
    EXPECT_TRUE(fs::exists(dir_ / "trends" / "trends_by_region.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "trends" / "trends_by_urbanicity.csv"));
    auto body = slurp((dir_ / "trends" / "trends_by_region.csv").string());
    EXPECT_NE(body.find("West"), std::string::npos);
    EXPECT_NE(body.find("South"), std::string::npos);
}

TEST_F(PipelineTest, ImputeSubcommandWritesReport) {
    auto cfg = simulate_into("data", true);
    fs::create_directories(dir_ / "imp");
    cfg.set("outdir", (dir_ / "imp").string());
    ASSERT_EQ(run_pipeline("impute", cfg), 0);
    EXPECT_TRUE(fs::exists(dir_ / "imp" / "counts_imputed.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "imp" / "imputation_report.csv"));
    auto imputed = load_panel((dir_ / "imp" / "counts_imputed.csv").string(),
                              cfg.get("population"));
    EXPECT_FALSE(imputed.suppressed);  // every cell filled
}

TEST_F(PipelineTest, PartitionedFitWithLabels) {
    auto cfg = simulate_into("data", false);
    {
        std::ofstream out(path("labels.csv"));
        out << "area_id,label\n";
        auto panel = load_panel(cfg.get("counts"), cfg.get("population"));
        for (int i = 0; i < panel.S; ++i)
            out << panel.area_ids[i] << "," << (i < panel.S / 2 ? "west" : "east") << "\n";
    }
    cfg.set("partition_labels", path("labels.csv"));
    cfg.set("interaction", "1");
    cfg.set("k", "1");
    fs::create_directories(dir_ / "part");
    cfg.set("outdir", (dir_ / "part").string());
    ASSERT_EQ(run_pipeline("fit", cfg), 0);
    auto report = slurp((dir_ / "part" / "partition_report.csv").string());
    EXPECT_NE(report.find("west"), std::string::npos);
    EXPECT_NE(report.find("east"), std::string::npos);
}
