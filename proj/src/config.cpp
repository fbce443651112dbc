#include "finreport/config.hpp"

#include <cstdio>
#include <fstream>

#include "finreport/error.hpp"

namespace finreport {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw ValidationError(std::string("config: '") + key + "' must be an object");
    return j.at(key);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: bad value for '") + key + "': " + j.at(key).dump());
    }
}

fs::path resolve(const json& j, const char* key, const fs::path& base, bool required) {
    const auto raw = get_or<std::string>(j, key, "");
    if (raw.empty()) {
        if (required) throw ValidationError(std::string("config: data.") + key + " is required");
        return {};
    }
    const fs::path p(raw);
    return p.is_absolute() || base.empty() ? p : (base / p).lexically_normal();
}

Date get_date(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("config: split.") + key + " is required");
    return Date::parse(get_or<std::string>(j, key, ""));
}

template <typename E>
E get_enum(const json& j, const char* key, std::initializer_list<std::pair<const char*, E>> choices, E fallback) {
    if (!j.contains(key)) return fallback;
    const auto value = get_or<std::string>(j, key, "");
    for (const auto& [name, e] : choices)
        if (value == name) return e;
    throw ValidationError(std::string("config: unknown ") + key + " '" + value + "'");
}

template <typename E>
const char* enum_name(E e, std::initializer_list<std::pair<const char*, E>> choices) {
    for (const auto& [name, v] : choices)
        if (v == e) return name;
    return "?";
}

const std::initializer_list<std::pair<const char*, Optimizer>> kOptimizers = {{"sgd", Optimizer::sgd},
                                                                              {"momentum", Optimizer::momentum}};
const std::initializer_list<std::pair<const char*, LabelReturn>> kLabelReturns = {
    {"close_to_close", LabelReturn::close_to_close}, {"open_to_open", LabelReturn::open_to_open}};
const std::initializer_list<std::pair<const char*, Weighting>> kWeightings = {{"equal", Weighting::equal},
                                                                             {"value", Weighting::value}};
const std::initializer_list<std::pair<const char*, RegressionWindow>> kWindows = {{"test", RegressionWindow::test},
                                                                                 {"all", RegressionWindow::all}};
const std::initializer_list<std::pair<const char*, EgarchVariant>> kVariants = {
    {"as_printed", EgarchVariant::as_printed}, {"textbook", EgarchVariant::textbook}};

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    RunConfig c;

    const auto& data = section(j, "data");
    c.data.prices = resolve(data, "prices", base_dir, true);
    c.data.factors = resolve(data, "factors", base_dir, true);
    c.data.news = resolve(data, "news", base_dir, true);
    c.data.embeddings = resolve(data, "embeddings", base_dir, false);
    c.data.risk_free = resolve(data, "risk_free", base_dir, false);

    const auto out = get_or<std::string>(j, "output_dir", "runs");
    c.output_dir = fs::path(out).is_absolute() || base_dir.empty() ? fs::path(out) : (base_dir / out).lexically_normal();

    const auto& split = section(j, "split");
    c.split.train_end = get_date(split, "train_end");
    c.split.validation_end = get_date(split, "validation_end");
    c.split.test_end = get_date(split, "test_end");
    if (!(c.split.train_end <= c.split.validation_end && c.split.validation_end <= c.split.test_end))
        throw ValidationError("config: split dates must satisfy train_end <= validation_end <= test_end");

    c.seed = get_or<std::uint64_t>(j, "seed", 0);

    const auto& news = section(j, "news");
    c.news.role_dim = get_or<Eigen::Index>(news, "role_dim", c.news.role_dim);
    c.news.edge_dim = get_or<Eigen::Index>(news, "edge_dim", c.news.edge_dim);
    c.news.encoder_seed = get_or<std::uint64_t>(news, "encoder_seed", c.seed);
    if (c.news.role_dim <= 0 || c.news.edge_dim <= 0) throw ValidationError("config: news dimensions must be positive");

    const auto& cls = section(j, "classifier");
    auto& t = c.classifier.train;
    t.learning_rate = get_or(cls, "learning_rate", t.learning_rate);
    t.batch_size = get_or(cls, "batch_size", t.batch_size);
    t.epochs = get_or(cls, "epochs", t.epochs);
    t.hidden_dim = get_or<Eigen::Index>(cls, "hidden_dim", t.hidden_dim);
    t.dropout_rate = get_or(cls, "dropout_rate", t.dropout_rate);
    t.optimizer = get_enum(cls, "optimizer", kOptimizers, t.optimizer);
    t.momentum = get_or(cls, "momentum", t.momentum);
    t.rng_seed = get_or<std::uint64_t>(cls, "rng_seed", c.seed);
    c.classifier.label_return = get_enum(cls, "label_return", kLabelReturns, c.classifier.label_return);
    if (!(t.learning_rate > 0.0) || t.batch_size == 0 || t.hidden_dim <= 0 || t.dropout_rate < 0.0 ||
        t.dropout_rate >= 1.0)
        throw ValidationError("config: invalid classifier settings");

    const auto& fac = section(j, "factors");
    c.factors.weighting = get_enum(fac, "weighting", kWeightings, c.factors.weighting);
    c.factors.breakpoints.low = get_or(fac, "low_breakpoint", c.factors.breakpoints.low);
    c.factors.breakpoints.high = get_or(fac, "high_breakpoint", c.factors.breakpoints.high);
    c.factors.breakpoints.size = get_or(fac, "size_breakpoint", c.factors.breakpoints.size);
    c.factors.regression_window = get_enum(fac, "regression_window", kWindows, c.factors.regression_window);
    const auto& bp = c.factors.breakpoints;
    if (!(0.0 < bp.low && bp.low < bp.high && bp.high < 1.0 && 0.0 < bp.size && bp.size < 1.0))
        throw ValidationError("config: breakpoints must satisfy 0 < low < high < 1 and 0 < size < 1");

    const auto& risk = section(j, "risk");
    c.risk.fit.p = get_or(risk, "p", c.risk.fit.p);
    c.risk.fit.q = get_or(risk, "q", c.risk.fit.q);
    c.risk.fit.starts = get_or(risk, "starts", c.risk.fit.starts);
    c.risk.fit.max_evaluations = get_or(risk, "max_evaluations", c.risk.fit.max_evaluations);
    c.risk.fit.variant = get_enum(risk, "variant", kVariants, c.risk.fit.variant);
    c.risk.fit.seed = get_or<std::uint64_t>(risk, "seed", c.seed);
    c.risk.confidence = get_or(risk, "confidence", c.risk.confidence);
    c.risk.window = get_or(risk, "window", c.risk.window);
    if (c.risk.fit.p < 1 || c.risk.fit.q < 1 || c.risk.fit.starts < 1)
        throw ValidationError("config: risk.p, risk.q and risk.starts must be >= 1");
    if (!(c.risk.confidence > 0.5 && c.risk.confidence < 1.0))
        throw ValidationError("config: risk.confidence must lie in (0.5, 1)");

    const auto& bt = section(j, "backtest");
    c.backtest.cost = get_or(bt, "cost", c.backtest.cost);
    c.backtest.random_seed = get_or<std::uint64_t>(bt, "random_seed", c.seed + 1);
    if (!(c.backtest.cost >= 0.0 && c.backtest.cost < 1.0)) throw ValidationError("config: backtest.cost must lie in [0, 1)");

    const auto& rep = section(j, "report");
    c.report.max_reports = get_or(rep, "max_reports", c.report.max_reports);
    const auto& llm = section(rep, "llm");
    c.report.llm.enabled = get_or(llm, "enabled", false);
    c.report.llm.endpoint = get_or<std::string>(llm, "endpoint", "");
    c.report.llm.model = get_or<std::string>(llm, "model", "");
    c.report.llm.timeout_ms = get_or(llm, "timeout_ms", c.report.llm.timeout_ms);
    return c;
}

json RunConfig::to_json() const {
    const auto& t = classifier.train;
    return {
        {"data",
         {{"prices", data.prices.string()},
          {"factors", data.factors.string()},
          {"news", data.news.string()},
          {"embeddings", data.embeddings.string()},
          {"risk_free", data.risk_free.string()}}},
        {"output_dir", output_dir.string()},
        {"split",
         {{"train_end", split.train_end.iso()},
          {"validation_end", split.validation_end.iso()},
          {"test_end", split.test_end.iso()}}},
        {"seed", seed},
        {"news", {{"role_dim", news.role_dim}, {"edge_dim", news.edge_dim}, {"encoder_seed", news.encoder_seed}}},
        {"classifier",
         {{"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"hidden_dim", t.hidden_dim},
          {"dropout_rate", t.dropout_rate},
          {"optimizer", enum_name(t.optimizer, kOptimizers)},
          {"momentum", t.momentum},
          {"rng_seed", t.rng_seed},
          {"label_return", enum_name(classifier.label_return, kLabelReturns)}}},
        {"factors",
         {{"weighting", enum_name(factors.weighting, kWeightings)},
          {"low_breakpoint", factors.breakpoints.low},
          {"high_breakpoint", factors.breakpoints.high},
          {"size_breakpoint", factors.breakpoints.size},
          {"regression_window", enum_name(factors.regression_window, kWindows)}}},
        {"risk",
         {{"p", risk.fit.p},
          {"q", risk.fit.q},
          {"starts", risk.fit.starts},
          {"max_evaluations", risk.fit.max_evaluations},
          {"variant", enum_name(risk.fit.variant, kVariants)},
          {"seed", risk.fit.seed},
          {"confidence", risk.confidence},
          {"window", risk.window}}},
        {"backtest", {{"cost", backtest.cost}, {"random_seed", backtest.random_seed}}},
        {"report",
         {{"max_reports", report.max_reports},
          {"llm",
           {{"enabled", report.llm.enabled},
            {"endpoint", report.llm.endpoint},
            {"model", report.llm.model},
            {"timeout_ms", report.llm.timeout_ms}}}}},
    };
}

std::string RunConfig::hash() const {
    // output_dir does not change any result, so it stays out of the hash.
    auto j = to_json();
    j.erase("output_dir");
    std::uint64_t h = 14695981039346656037ull;
    for (const char ch : j.dump()) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void RunConfig::validate_paths() const {
    const std::pair<const char*, const fs::path*> inputs[] = {{"prices", &data.prices},
                                                              {"factors", &data.factors},
                                                              {"news", &data.news},
                                                              {"embeddings", &data.embeddings},
                                                              {"risk_free", &data.risk_free}};
    for (const auto& [name, path] : inputs) {
        if (path->empty()) continue;
        if (!fs::is_regular_file(*path))
            throw ValidationError(std::string("config: data.") + name + " not found: " + path->string());
    }
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ValidationError("override key '" + key + "' has an empty segment");
        if (!node->is_object()) throw ValidationError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

RunConfig load_config(const fs::path& path, std::span<const std::string> overrides) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
    for (const auto& o : overrides) apply_override(j, o);
    return RunConfig::from_json(j, path.parent_path());
}

}  // namespace finreport
