// finreport: command-line driver for the quantitative pipeline.
//
//   finreport gen-fixture --out data/fixture
//   finreport pipeline -c data/fixture/config.json
//   finreport risk -c config.json --set risk.confidence=0.99
//
// Exit codes: 0 success, 1 invalid input or config, 2 runtime failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "finreport/config.hpp"
#include "finreport/error.hpp"
#include "finreport/fixture.hpp"
#include "finreport/pipeline.hpp"

namespace {

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.path, "JSON run config")->required();
    cmd->add_option("--set", args.overrides, "Override a config key, e.g. classifier.epochs=10")->take_all();
}

int run(int argc, char** argv) {
    CLI::App app{"FinReport: news-aware factor model, risk and report pipeline"};
    app.require_subcommand(1);

    ConfigArgs args;
    const std::vector<std::pair<std::string, std::string>> stage_help = {
        {"ingest", "Validate inputs and write the aligned panel"},
        {"train", "Train the news classifier"},
        {"predict", "Predict news classes for every news row"},
        {"factors", "Build FF5 and FF5-News factor returns"},
        {"regress", "Regress stock excess returns on both factor sets"},
        {"grs", "Joint zero-alpha test for both models"},
        {"risk", "Fit EGARCH per stock and evaluate VaR"},
        {"backtest", "Trade the predicted-positive portfolio and a random baseline"},
        {"report", "Render per-stock reports"},
    };
    std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
    for (const auto& [name, help] : stage_help) {
        auto* cmd = app.add_subcommand(name, help);
        add_config_options(cmd, args);
        stage_cmds.emplace_back(name, cmd);
    }
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
    add_config_options(pipeline, args);

    finreport::FixtureOptions fixture;
    std::string fixture_dir;
    auto* gen = app.add_subcommand("gen-fixture", "Write a synthetic dataset with planted news signal");
    gen->add_option("-o,--out", fixture_dir, "Output directory")->required();
    gen->add_option("--seed", fixture.seed, "RNG seed")->capture_default_str();
    gen->add_option("--symbols", fixture.symbols, "Number of stocks")->capture_default_str();
    gen->add_option("--days", fixture.days, "Number of business days")->capture_default_str();
    gen->add_option("--signal", fixture.signal, "Planted same-day news effect")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        finreport::generate_fixture(fixture_dir, fixture);
        std::cout << "fixture written to " << fixture_dir << '\n';
        return 0;
    }

    const auto config = finreport::load_config(args.path, args.overrides);
    if (pipeline->parsed()) {
        finreport::run_pipeline(config);
        std::cout << "pipeline complete: " << config.run_dir().string() << '\n';
        return 0;
    }
    for (const auto& [name, cmd] : stage_cmds) {
        if (!cmd->parsed()) continue;
        if (name == "ingest") {
            config.validate_paths();
            try {
                const auto s = finreport::stage_ingest(config);
                std::cout << "panel: " << s.rows << " rows, " << s.symbols << " symbols, " << s.dates << " dates, "
                          << s.news_rows << " with news\n";
            } catch (const finreport::ValidationError& e) {
                throw finreport::ValidationError(std::string("stage ingest: ") + e.what());
            }
        } else {
            finreport::run_stage(name, config);
        }
        std::cout << name << " complete: " << config.run_dir().string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const finreport::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
