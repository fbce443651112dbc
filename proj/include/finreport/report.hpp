#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "finreport/classifier.hpp"
#include "finreport/date.hpp"
#include "finreport/factor_model.hpp"
#include "finreport/risk.hpp"

namespace finreport {

// Loading x factor value for each model dimension at one date.
struct ReturnDecomposition {
    double alpha = 0.0;
    double market = 0.0;
    double size = 0.0;
    double valuation = 0.0;
    double profitability = 0.0;
    double investment = 0.0;
    std::optional<double> news_effect;  // nullopt for an FF5-only regression
    double predicted_excess_return = 0.0;
};

// Throws ValidationError when the regression and factor series disagree or the
// date is absent from the series.
ReturnDecomposition decompose(const RegressionResult& regression, const FactorReturnsSeries& factors, const Date& date);

enum class Trend { positive, negative };
const char* to_string(Trend trend);

// Positive iff predicted excess return > 0.
Trend overall_trend(const ReturnDecomposition& d);

struct ReportContext {
    std::string symbol;
    Date date;
    std::string headline;
    std::optional<Label> predicted_label;
};

struct ReportDoc {
    ReportContext context;
    ReturnDecomposition decomposition;
    VarEstimate var;
    Trend overall_trend = Trend::negative;
    std::string return_forecasting;
    std::string risk_assessment;
    std::string summary;
    std::string markdown;
    std::string inputs_hash;
};

// Placeholders: {{symbol}} {{date}} {{headline}} {{label}} {{return_forecasting}}
// {{risk_assessment}} {{overall_trend}} {{summary}}.
extern const char* const kDefaultReportTemplate;

ReportDoc render_report(const ReturnDecomposition& decomposition, const VarEstimate& var,
                        const ReportContext& context, const std::string& report_template = kDefaultReportTemplate);

// Machine-readable sidecar with the decomposition and VaR.
nlohmann::json report_json(const ReportDoc& doc);

// Instruction sent to the language-model endpoint.
extern const char* const kReportPrompt;

struct LlmRelayConfig {
    bool enabled = false;
    std::string endpoint;  // http://host:port/path
    std::string model;
    int timeout_ms = 5000;
};

struct RelayResult {
    std::string text;
    bool fallback = false;
};

// JSON body sent by relay_llm: {"model", "prompt", "context"}.
nlohmann::json relay_request_body(const ReportDoc& doc, const LlmRelayConfig& config);

// One POST to the endpoint; any failure returns the template report with fallback = true.
RelayResult relay_llm(const ReportDoc& doc, const LlmRelayConfig& config);

}  // namespace finreport
