#include "finreport/report.hpp"

#include <cmath>
#include <cstdio>
#include <regex>

#include <httplib.h>

#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"

namespace finreport {

ReturnDecomposition decompose(const RegressionResult& regression, const FactorReturnsSeries& factors, const Date& date) {
    const auto it = std::lower_bound(factors.dates.begin(), factors.dates.end(), date);
    if (it == factors.dates.end() || *it != date) throw ValidationError("no factor values on " + date.iso());
    const auto t = static_cast<Eigen::Index>(it - factors.dates.begin());
    ReturnDecomposition d;
    d.alpha = regression.alpha;
    try {
        d.market = regression.loading("mkt_excess") * factors.mkt_excess(t);
        d.size = regression.loading("smb") * factors.smb(t);
        d.valuation = regression.loading("hml") * factors.hml(t);
        d.profitability = regression.loading("rmw") * factors.rmw(t);
        d.investment = regression.loading("cma") * factors.cma(t);
    } catch (const std::out_of_range& e) {
        throw ValidationError(std::string("decompose: ") + e.what());
    }
    if (const auto m = regression.news_loading()) {
        if (!factors.news) throw ValidationError("decompose: regression has a news loading but the series has no news factor");
        d.news_effect = *m * (*factors.news)(t);
    }
    d.predicted_excess_return = d.alpha + d.market + d.size + d.valuation + d.profitability + d.investment +
                                d.news_effect.value_or(0.0);
    return d;
}

const char* to_string(Trend trend) { return trend == Trend::positive ? "Positive" : "Negative"; }

Trend overall_trend(const ReturnDecomposition& d) {
    return d.predicted_excess_return > 0.0 ? Trend::positive : Trend::negative;
}

const char* const kDefaultReportTemplate =
    "# FinReport: {{symbol}} ({{date}})\n"
    "\n"
    "News: {{headline}}\n"
    "Predicted news class: {{label}}\n"
    "\n"
    "## Return Forecasting\n"
    "\n"
    "{{return_forecasting}}\n"
    "\n"
    "## Risk Assessment\n"
    "\n"
    "{{risk_assessment}}\n"
    "\n"
    "## Overall Trend\n"
    "\n"
    "{{overall_trend}}\n"
    "\n"
    "## Summary\n"
    "\n"
    "{{summary}}\n";

const char* const kReportPrompt =
    "Based on multi-dimensional predictive information and risk assessment values, a financial analysis report "
    "will be generated, comprising four main sections: return forecasting, risk assessment, overall trend "
    "prediction, and summary. Among them, the return forecasting section is required to include predictive "
    "analyses in six dimensions: Market Factor, Size Factor, Valuation (BP) Factor, Profitability Factor, "
    "Investment Factor, and News Effect Factor. The risk assessment section provides an estimation of the maximum "
    "potential loss, while the overall trend prediction outputs either 'Positive' or 'Negative' based on the "
    "overall profitability. The summary section includes a comprehensive analysis of the predictive information "
    "and risk assessment, offering an integrated evaluation of the investment potential of the stock.";

namespace {

std::string percent(double x, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.*f%%", decimals, 100.0 * x);
    return buf;
}

std::string unsigned_percent(double x, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f%%", decimals, 100.0 * x);
    return buf;
}

const char* direction(double x) {
    if (x > 0.0) return "positive";
    if (x < 0.0) return "negative";
    return "neutral";
}

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
    for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
        text.replace(pos, key.size(), value);
    return text;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

struct Dimension {
    const char* name;
    std::optional<double> value;
};

}  // namespace

nlohmann::json report_json(const ReportDoc& doc) {
    const auto& d = doc.decomposition;
    nlohmann::json j;
    j["symbol"] = doc.context.symbol;
    j["date"] = doc.context.date.iso();
    j["headline"] = doc.context.headline;
    j["predicted_label"] = doc.context.predicted_label ? nlohmann::json(to_string(*doc.context.predicted_label))
                                                       : nlohmann::json(nullptr);
    j["decomposition"] = {{"alpha", d.alpha},
                          {"market", d.market},
                          {"size", d.size},
                          {"valuation", d.valuation},
                          {"profitability", d.profitability},
                          {"investment", d.investment},
                          {"news_effect", d.news_effect ? nlohmann::json(*d.news_effect) : nlohmann::json(nullptr)},
                          {"predicted_excess_return", d.predicted_excess_return}};
    j["var"] = {{"value", doc.var.var_value}, {"alpha_level", doc.var.alpha_level}, {"z_alpha", doc.var.z_alpha}};
    j["overall_trend"] = to_string(doc.overall_trend);
    j["inputs_hash"] = doc.inputs_hash;
    return j;
}

ReportDoc render_report(const ReturnDecomposition& d, const VarEstimate& var, const ReportContext& context,
                        const std::string& report_template) {
    ReportDoc doc;
    doc.context = context;
    doc.decomposition = d;
    doc.var = var;
    doc.overall_trend = overall_trend(d);

    const Dimension dims[] = {{"Market Factor", d.market},
                              {"Size Factor", d.size},
                              {"Valuation (BP) Factor", d.valuation},
                              {"Profitability Factor", d.profitability},
                              {"Investment Factor", d.investment},
                              {"News Effect Factor", d.news_effect}};
    std::string forecasting;
    const Dimension* strongest = nullptr;
    for (const auto& dim : dims) {
        forecasting += "- ";
        forecasting += dim.name;
        if (!dim.value) {
            forecasting += ": unavailable (the model has no news factor)\n";
            continue;
        }
        forecasting += ": " + std::string(direction(*dim.value)) + " contribution of " + percent(*dim.value) + "\n";
        if (!strongest || std::abs(*dim.value) > std::abs(*strongest->value)) strongest = &dim;
    }
    forecasting += "- Unexplained return (alpha): " + percent(d.alpha) + "\n";
    forecasting += "- Predicted excess return: " + percent(d.predicted_excess_return);
    doc.return_forecasting = forecasting;

    const double loss = std::abs(var.var_value);
    doc.risk_assessment = "Estimated maximum potential loss: " + unsigned_percent(loss) + " at " +
                          unsigned_percent(var.alpha_level, 0) + " confidence (VaR " + percent(var.var_value) + ").";

    std::string summary = "The model predicts a " + std::string(direction(d.predicted_excess_return)) +
                          " excess return of " + percent(d.predicted_excess_return) + " for " + context.symbol + ".";
    if (strongest)
        summary += " The largest driver is the " + std::string(strongest->name) + " (" + percent(*strongest->value) + ").";
    summary += " The maximum potential loss is estimated at " + unsigned_percent(loss) + ", so the overall outlook is " +
               to_string(doc.overall_trend) + ".";
    doc.summary = summary;

    std::string md = report_template;
    md = replace_all(md, "{{symbol}}", context.symbol);
    md = replace_all(md, "{{date}}", context.date.iso());
    md = replace_all(md, "{{headline}}", context.headline.empty() ? "None" : context.headline);
    md = replace_all(md, "{{label}}", context.predicted_label ? to_string(*context.predicted_label) : "n/a");
    md = replace_all(md, "{{return_forecasting}}", doc.return_forecasting);
    md = replace_all(md, "{{risk_assessment}}", doc.risk_assessment);
    md = replace_all(md, "{{overall_trend}}", to_string(doc.overall_trend));
    md = replace_all(md, "{{summary}}", doc.summary);
    doc.markdown = md;

    auto inputs = report_json(doc);
    inputs.erase("inputs_hash");
    inputs.erase("overall_trend");
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(inputs.dump())));
    doc.inputs_hash = hex;
    return doc;
}

nlohmann::json relay_request_body(const ReportDoc& doc, const LlmRelayConfig& config) {
    return {{"model", config.model}, {"prompt", kReportPrompt}, {"context", report_json(doc)}};
}

RelayResult relay_llm(const ReportDoc& doc, const LlmRelayConfig& config) {
    if (!config.enabled) return {doc.markdown, false};
    const auto fallback = [&](const std::string& why) {
        warn("LLM relay failed (" + why + "); using template report");
        return RelayResult{doc.markdown, true};
    };
    static const std::regex url_re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config.endpoint, m, url_re)) return fallback("unsupported endpoint '" + config.endpoint + "'");
    const std::string host = m[1];
    const int port = m[2].matched ? std::stoi(m[2]) : 80;
    const std::string path = m[3].matched ? std::string(m[3]) : "/";
    try {
        httplib::Client client(host, port);
        const auto seconds = config.timeout_ms / 1000;
        const auto micros = (config.timeout_ms % 1000) * 1000;
        client.set_connection_timeout(seconds, micros);
        client.set_read_timeout(seconds, micros);
        client.set_write_timeout(seconds, micros);
        const auto res = client.Post(path, relay_request_body(doc, config).dump(), "application/json");
        if (!res) return fallback(httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300) return fallback("HTTP " + std::to_string(res->status));
        return {res->body, false};
    } catch (const std::exception& e) {
        return fallback(e.what());
    }
}

}  // namespace finreport
