#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "finreport/classifier.hpp"
#include "finreport/date.hpp"
#include "finreport/factor_model.hpp"
#include "finreport/report.hpp"
#include "finreport/risk.hpp"

namespace finreport {

enum class LabelReturn { close_to_close, open_to_open };
enum class RegressionWindow { test, all };

struct RunConfig {
    struct Data {
        std::filesystem::path prices, factors, news, embeddings, risk_free;  // embeddings, risk_free optional
    } data;
    std::filesystem::path output_dir;

    struct Split {
        Date train_end, validation_end, test_end;
    } split;

    struct News {
        Eigen::Index role_dim = 16;
        Eigen::Index edge_dim = 8;
        std::uint64_t encoder_seed = 0;
    } news;

    struct Classifier {
        TrainConfig train;
        LabelReturn label_return = LabelReturn::close_to_close;
    } classifier;

    struct Factors {
        Weighting weighting = Weighting::equal;
        Breakpoints breakpoints;
        RegressionWindow regression_window = RegressionWindow::all;
    } factors;

    struct Risk {
        EgarchFitOptions fit;
        double confidence = 0.95;
        std::size_t window = 60;
    } risk;

    struct Backtest {
        double cost = 0.001;
        std::uint64_t random_seed = 1;
    } backtest;

    struct Report {
        std::size_t max_reports = 20;
        LlmRelayConfig llm;
    } report;

    std::uint64_t seed = 0;

    // Relative paths resolve against base_dir (the config file's directory).
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    // Canonical form; paths as given after resolution.
    nlohmann::json to_json() const;

    // 16 hex digits over the canonical JSON.
    std::string hash() const;
    std::filesystem::path run_dir() const { return output_dir / ("run-" + hash()); }

    // Throws ValidationError naming the first missing input file.
    void validate_paths() const;
};

// Reads a JSON config and applies "dotted.key=value" overrides, e.g.
// "classifier.epochs=10" or "split.test_end=2021-06-30". Values parse as JSON,
// falling back to a plain string.
RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace finreport
