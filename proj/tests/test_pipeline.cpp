#include <gtest/gtest.h>

#include "finreport/config.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"
#include "finreport/fixture.hpp"
#include "finreport/pipeline.hpp"
#include "test_util.hpp"

using namespace finreport;
namespace fs = std::filesystem;

namespace {

class PipelineTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new testkit::TempDir;
        generate_fixture(dir_->path());
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }

    static RunConfig config(std::vector<std::string> overrides = {}) {
        return load_config(dir_->path() / "config.json", overrides);
    }

    static testkit::TempDir* dir_;
    WarningSilencer quiet_;
};

testkit::TempDir* PipelineTest::dir_ = nullptr;

std::map<std::string, std::string> digests(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = file_digest(e.path());
    return out;
}

}  // namespace

TEST_F(PipelineTest, FullRunIsDeterministic) {
    const auto a = config({"output_dir=" + (dir_->path() / "a").string()});
    const auto b = config({"output_dir=" + (dir_->path() / "b").string()});
    ASSERT_EQ(a.hash(), b.hash());
    run_pipeline(a);
    run_pipeline(b);
    const auto da = digests(a.run_dir());
    EXPECT_EQ(da, digests(b.run_dir()));
    for (const char* f : {"panel.jsonl", "model.json", "predictions.csv", "factors_ff5.csv", "factors_ff5news.csv",
                          "regression_ff5.csv", "regression_ff5news.csv", "grs.json", "risk.csv", "ledger.csv",
                          "curve.csv", "curve_random.csv", "backtest_metrics.json", "config.json", "manifest.json"})
        EXPECT_TRUE(da.count(f)) << f;
    EXPECT_TRUE(std::any_of(da.begin(), da.end(), [](const auto& kv) { return kv.first.starts_with("reports/"); }));

    const auto manifest = nlohmann::json::parse(testkit::read_file(a.run_dir() / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], a.hash());
    EXPECT_EQ(manifest["files"]["curve.csv"], da.at("curve.csv"));
    const auto archived = nlohmann::json::parse(testkit::read_file(a.run_dir() / "config.json"));
    EXPECT_EQ(RunConfig::from_json(archived).hash(), a.hash());
}

TEST_F(PipelineTest, IngestIsRepeatable) {
    const auto c = config({"output_dir=" + (dir_->path() / "ingest").string()});
    const auto summary = stage_ingest(c);
    EXPECT_EQ(summary.symbols, 20u);
    EXPECT_EQ(summary.dates, 520u);
    EXPECT_GT(summary.news_rows, 0u);
    const auto first = testkit::read_file(c.run_dir() / "panel.jsonl");
    stage_ingest(c);
    EXPECT_EQ(testkit::read_file(c.run_dir() / "panel.jsonl"), first);
}

TEST_F(PipelineTest, ForeignArtifactsAreRefused) {
    const auto out = "output_dir=" + (dir_->path() / "mix").string();
    const auto a = config({out});
    const auto b = config({out, "seed=99"});
    ASSERT_NE(a.hash(), b.hash());
    stage_ingest(a);
    fs::create_directories(b.run_dir());
    fs::copy_file(a.run_dir() / "panel.jsonl", b.run_dir() / "panel.jsonl");
    try {
        run_stage("train", b);
        FAIL();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_TRUE(msg.starts_with("stage train: ")) << msg;
        EXPECT_NE(msg.find(a.hash()), std::string::npos) << msg;
    }
}

TEST_F(PipelineTest, MissingInputNamesTheStage) {
    const auto c = config({"output_dir=" + (dir_->path() / "empty").string()});
    try {
        run_stage("factors", c);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("run 'ingest' first"), std::string::npos);
    }
    EXPECT_THROW(run_stage("nonsense", c), ValidationError);
}

TEST_F(PipelineTest, FailedStageKeepsPriorOutputs) {
    const auto c = config({"output_dir=" + (dir_->path() / "keep").string()});
    stage_ingest(c);
    const auto panel = testkit::read_file(c.run_dir() / "panel.jsonl");
    EXPECT_THROW(run_stage("regress", c), ValidationError);
    EXPECT_EQ(testkit::read_file(c.run_dir() / "panel.jsonl"), panel);
}

TEST_F(PipelineTest, StageOrder) {
    std::vector<std::string> names;
    for (const auto& s : pipeline_stages()) names.push_back(s.name);
    EXPECT_EQ(names, (std::vector<std::string>{"ingest", "train", "predict", "factors", "regress", "grs", "risk",
                                               "backtest", "report"}));
}

TEST(Predictions, CsvRoundTrip) {
    testkit::TempDir dir;
    std::vector<Prediction> p{{"AAA", Date(2024, 1, 2), Label::neutral, {0.2, 0.7, 0.1}},
                              {"BBB", Date(2024, 1, 2), Label::negative, {0.1 + 0.2, 0.3, 0.4}}};
    write_predictions_csv(dir / "p.csv", p, "cafe");
    std::string hash;
    const auto back = read_predictions_csv(dir / "p.csv", &hash);
    EXPECT_EQ(hash, "cafe");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].label, Label::negative);
    EXPECT_EQ(back[1].proba(0), 0.1 + 0.2);
    EXPECT_NE(testkit::read_file(dir / "p.csv").find("symbol,date,label,p_positive,p_neutral,p_negative"),
              std::string::npos);
}

TEST(Pipeline, LabelsFollowCrossSectionalRanks) {
    Panel panel;
    const double closes[] = {10.0, 10.5, 9.0, 10.1, 10.2};
    for (int i = 0; i < 5; ++i) {
        for (int t = 0; t < 2; ++t) {
            PanelRow r;
            r.symbol = "S" + std::to_string(i);
            r.date = Date(2024, 1, 2 + t);
            r.open = r.close = t == 0 ? 10.0 : closes[i];
            if (t == 1) r.return_1d = closes[i] / 10.0 - 1.0;
            panel.rows.push_back(r);
        }
    }
    const auto labels = panel_labels(panel, LabelReturn::close_to_close);
    // Ranks S1 > S4 > S3 > S0 > S2: one positive, two neutral, S0 in the unlabeled band, one negative.
    ASSERT_EQ(labels.size(), 4u);
    EXPECT_EQ(labels.at({"S1", Date(2024, 1, 3)}), Label::positive);
    EXPECT_EQ(labels.at({"S4", Date(2024, 1, 3)}), Label::neutral);
    EXPECT_EQ(labels.at({"S3", Date(2024, 1, 3)}), Label::neutral);
    EXPECT_EQ(labels.count({"S0", Date(2024, 1, 3)}), 0u);
    EXPECT_EQ(labels.at({"S2", Date(2024, 1, 3)}), Label::negative);
}
