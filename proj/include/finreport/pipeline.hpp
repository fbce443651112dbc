#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "finreport/classifier.hpp"
#include "finreport/config.hpp"
#include "finreport/market_data.hpp"

namespace finreport {

// Artifacts under config.run_dir():
//   panel.jsonl                         ingest
//   model.json train_metrics.csv classifier_metrics.json   train
//   predictions.csv                     predict
//   factors_ff5.csv factors_ff5news.csv factors
//   regression_ff5.csv regression_ff5news.csv             regress
//   grs.json                            grs
//   risk.csv risk_metrics.json          risk
//   ledger.csv curve.csv ledger_random.csv curve_random.csv backtest_metrics.json   backtest
//   reports/<symbol>_<date>.md|.json    report
//   config.json manifest.json           pipeline
// Every artifact carries the config hash; a stage refuses inputs from another config.

struct Prediction {
    std::string symbol;
    Date date;
    Label label;
    Eigen::Vector3d proba;  // positive, neutral, negative
};

// CSV: symbol,date,label,p_positive,p_neutral,p_negative
void write_predictions_csv(const std::filesystem::path& path, std::span<const Prediction> predictions,
                           const std::string& config_hash = {});
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path, std::string* config_hash = nullptr);

// Cross-sectional labels per date from the configured label return.
std::map<ReturnKey, Label> panel_labels(const Panel& panel, LabelReturn kind);

// [news features; log mktcap, bp, op, inv, extras] for one row with news and factors.
Eigen::VectorXd classifier_input(const PanelRow& row);

struct IngestSummary {
    std::size_t rows = 0, symbols = 0, dates = 0, news_rows = 0;
};

IngestSummary stage_ingest(const RunConfig& config);
void stage_train(const RunConfig& config);
void stage_predict(const RunConfig& config);
void stage_factors(const RunConfig& config);
void stage_regress(const RunConfig& config);
void stage_grs(const RunConfig& config);
void stage_risk(const RunConfig& config);
void stage_backtest(const RunConfig& config);
void stage_report(const RunConfig& config);

struct Stage {
    const char* name;
    std::function<void(const RunConfig&)> run;
};
// All stages in pipeline order.
const std::vector<Stage>& pipeline_stages();

// Runs the named stage. Errors are rethrown with the stage name prefixed, keeping
// their category (ValidationError / NumericalError).
void run_stage(const std::string& name, const RunConfig& config);

// Every stage in order, then config.json and manifest.json (artifact name -> FNV-1a of bytes).
void run_pipeline(const RunConfig& config);

// 16-hex FNV-1a of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace finreport
