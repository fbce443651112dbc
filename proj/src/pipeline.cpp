#include "finreport/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "finreport/backtest.hpp"
#include "finreport/csv.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"
#include "finreport/factor_model.hpp"
#include "finreport/report.hpp"
#include "finreport/risk.hpp"
#include "finreport/stats.hpp"

namespace finreport {

namespace fs = std::filesystem;
using nlohmann::json;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

enum class Part { train, validation, test, outside };

Part part_of(const RunConfig& c, const Date& d) {
    if (d <= c.split.train_end) return Part::train;
    if (d <= c.split.validation_end) return Part::validation;
    if (d <= c.split.test_end) return Part::test;
    return Part::outside;
}

fs::path artifact(const RunConfig& c, const char* name) { return c.run_dir() / name; }

fs::path require(const RunConfig& c, const char* name, const char* producer) {
    const auto p = artifact(c, name);
    if (!fs::exists(p)) throw ValidationError("missing " + p.string() + "; run '" + producer + "' first");
    return p;
}

void check_hash(const RunConfig& c, const fs::path& path, const std::string& found) {
    if (found != c.hash())
        throw ValidationError(path.string() + " was produced by config " + (found.empty() ? "<none>" : found) +
                              ", current config is " + c.hash());
}


Panel checked_panel(const RunConfig& c) {
    const auto path = require(c, "panel.jsonl", "ingest");
    std::string hash;
    Panel panel = load_panel(path, &hash);
    check_hash(c, path, hash);
    return panel;
}

std::vector<Prediction> checked_predictions(const RunConfig& c) {
    const auto path = require(c, "predictions.csv", "predict");
    std::string hash;
    auto preds = read_predictions_csv(path, &hash);
    check_hash(c, path, hash);
    return preds;
}

FactorReturnsSeries checked_factors(const RunConfig& c, const char* name) {
    const auto path = require(c, name, "factors");
    std::string hash;
    auto f = read_factor_csv(path, &hash);
    check_hash(c, path, hash);
    return f;
}

std::vector<RegressionResult> checked_regressions(const RunConfig& c, const char* name) {
    const auto path = require(c, name, "regress");
    std::string hash;
    auto r = read_regression_csv(path, &hash);
    check_hash(c, path, hash);
    return r;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json metrics_json(const ClassificationMetrics& m, std::size_t n) {
    return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"recall", m.recall}, {"precision", m.precision}, {"samples", n}};
}

json var_metrics_json(const VarMetrics& m) {
    return {{"rmse", m.rmse},         {"mae", m.mae},     {"coverage_rate", m.coverage_rate},
            {"var_loss", m.var_loss}, {"pairs", m.pairs}, {"dates", m.dates}};
}

json backtest_json(const BacktestResult& r) {
    json j = {{"positions", r.ledger.size()}, {"events", r.events.size()}};
    j["annualized_return"] = annualized_return(r.curve);
    j["max_drawdown"] = max_drawdown(r.curve);
    try {
        j["sharpe_ratio"] = sharpe_ratio(r.curve);
    } catch (const NumericalError&) {
        j["sharpe_ratio"] = nullptr;
    }
    return j;
}

// Excess returns on the regression sample of the configured window.
AssetReturnPanel regression_sample(const RunConfig& c, const Panel& panel, const FactorReturnsSeries& factors) {
    auto assets = excess_returns(panel, factors);
    if (c.factors.regression_window == RegressionWindow::test) {
        std::vector<Index> keep;
        std::vector<Date> dates;
        for (std::size_t t = 0; t < assets.dates.size(); ++t)
            if (part_of(c, assets.dates[t]) == Part::test) {
                keep.push_back(static_cast<Index>(t));
                dates.push_back(assets.dates[t]);
            }
        assets.excess = Eigen::MatrixXd(assets.excess(keep, Eigen::all));
        assets.dates = std::move(dates);
    }
    if (assets.dates.empty()) throw ValidationError("regression sample is empty");
    return assets;
}

}  // namespace

void write_predictions_csv(const fs::path& path, std::span<const Prediction> predictions, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    csv::write_hash_comment(out, config_hash);
    out << "symbol,date,label,p_positive,p_neutral,p_negative\n";
    for (const auto& p : predictions)
        out << p.symbol << ',' << p.date.iso() << ',' << to_string(p.label) << ',' << csv::format(p.proba(0)) << ','
            << csv::format(p.proba(1)) << ',' << csv::format(p.proba(2)) << '\n';
}

std::vector<Prediction> read_predictions_csv(const fs::path& path, std::string* config_hash) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    if (config_hash) *config_hash = csv::peek_config_hash(path);
    const auto lines = csv::read_lines(in);
    if (lines.empty() || lines.front().second != "symbol,date,label,p_positive,p_neutral,p_negative")
        throw ParseError(path.string(), lines.empty() ? 1 : lines.front().first, "unexpected predictions header");
    std::vector<Prediction> out;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [no, text] = lines[k];
        const auto f = csv::split(text);
        if (f.size() != 6) throw ParseError(path.string(), no, "expected 6 fields");
        try {
            Prediction p;
            p.symbol = std::string(f[0]);
            p.date = Date::parse(f[1]);
            if (f[2] == "positive") p.label = Label::positive;
            else if (f[2] == "neutral") p.label = Label::neutral;
            else if (f[2] == "negative") p.label = Label::negative;
            else throw ValidationError("unknown label '" + std::string(f[2]) + "'");
            p.proba = {csv::to_double(f[3]), csv::to_double(f[4]), csv::to_double(f[5])};
            out.push_back(std::move(p));
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), no, e.what());
        }
    }
    return out;
}

std::map<ReturnKey, Label> panel_labels(const Panel& panel, LabelReturn kind) {
    std::map<ReturnKey, Label> out;
    for (const auto& [date, idx] : panel.cross_sections()) {
        std::map<std::string, double> returns;
        for (const auto i : idx) {
            const auto& row = panel.rows[i];
            if (kind == LabelReturn::close_to_close) {
                if (row.return_1d) returns[row.symbol] = *row.return_1d;
            } else if (row.open_next) {
                returns[row.symbol] = (*row.open_next - row.open) / row.open;
            }
        }
        if (returns.size() < 5) continue;  // assign_labels would leave everything unlabeled
        for (const auto& [symbol, label] : assign_labels(returns))
            if (label) out[{symbol, date}] = *label;
    }
    return out;
}

VectorXd classifier_input(const PanelRow& row) {
    if (!row.news || !row.factors)
        throw ValidationError("classifier input for " + row.symbol + " on " + row.date.iso() + " needs news and factors");
    const VectorXd news = row.news->flatten();
    VectorXd x(news.size() + row.factors->size());
    x << news, *row.factors;
    x(news.size()) = std::log(x(news.size()));  // market cap spans orders of magnitude
    return x;
}

IngestSummary stage_ingest(const RunConfig& c) {
    c.validate_paths();
    const auto prices = load_prices(c.data.prices);
    const auto factors = load_factors(c.data.factors);
    auto news = load_news(c.data.news);
    EmbeddingStore store;
    if (!c.data.embeddings.empty()) store = load_embeddings(c.data.embeddings);
    if (!c.data.risk_free.empty()) load_risk_free(c.data.risk_free);  // validate early
    resolve_news_features(news, store, c.news.role_dim, c.news.edge_dim, c.news.encoder_seed);
    const auto calendar = derive_calendar(prices);
    const Panel panel = align_panel(prices, factors, news, calendar);

    fs::create_directories(c.run_dir());
    save_panel(artifact(c, "panel.jsonl"), panel, c.hash());

    IngestSummary s;
    s.rows = panel.rows.size();
    s.symbols = panel.symbols().size();
    s.dates = panel.dates().size();
    s.news_rows = static_cast<std::size_t>(
        std::count_if(panel.rows.begin(), panel.rows.end(), [](const PanelRow& r) { return r.news.has_value(); }));
    return s;
}

void stage_train(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    const auto labels = panel_labels(panel, c.classifier.label_return);

    std::array<LabeledSet, 3> sets;  // train, validation, test
    std::array<std::vector<VectorXd>, 3> columns;
    for (const auto& row : panel.rows) {
        if (!row.news || !row.factors) continue;
        const auto it = labels.find({row.symbol, row.date});
        if (it == labels.end()) continue;
        const auto part = part_of(c, row.date);
        if (part == Part::outside) continue;
        const auto k = static_cast<std::size_t>(part);
        columns[k].push_back(classifier_input(row));
        sets[k].labels.push_back(it->second);
    }
    if (columns[0].empty()) throw ValidationError("no labeled news rows up to train_end " + c.split.train_end.iso());
    for (std::size_t k = 0; k < 3; ++k) {
        if (columns[k].empty()) continue;
        sets[k].inputs.resize(columns[k].front().size(), static_cast<Index>(columns[k].size()));
        for (std::size_t j = 0; j < columns[k].size(); ++j) sets[k].inputs.col(static_cast<Index>(j)) = columns[k][j];
    }
    const auto scaler = FeatureScaler::fit(sets[0].inputs);
    for (auto& s : sets)
        if (s.size() > 0) s.inputs = scaler.apply(s.inputs);

    const auto result = train(sets[0], c.classifier.train, sets[1].size() > 0 ? &sets[1] : nullptr);

    Checkpoint ck;
    ck.params = result.params;
    ck.scaler = scaler;
    ck.config = c.classifier.train;
    ck.role_dim = c.news.role_dim;
    ck.edge_dim = c.news.edge_dim;
    ck.factor_names = panel.factor_names;
    ck.config_hash = c.hash();
    save_checkpoint(artifact(c, "model.json"), ck);

    {
        std::ofstream out(artifact(c, "train_metrics.csv"), std::ios::binary);
        csv::write_hash_comment(out, c.hash());
        out << "epoch,train_loss,train_accuracy,validation_loss\n";
        for (const auto& e : result.history)
            out << e.epoch << ',' << csv::format(e.train_loss) << ',' << csv::format(e.train_accuracy) << ','
                << (e.validation_loss ? csv::format(*e.validation_loss) : "") << '\n';
    }
    json metrics = {{"config_hash", c.hash()}};
    const char* names[] = {"train", "validation", "test"};
    for (std::size_t k = 0; k < 3; ++k)
        metrics[names[k]] = sets[k].size() > 0 ? metrics_json(evaluate(result.params, sets[k]), sets[k].size()) : json(nullptr);
    write_json(artifact(c, "classifier_metrics.json"), metrics);
}

void stage_predict(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    const auto path = require(c, "model.json", "train");
    const Checkpoint ck = load_checkpoint(path);
    check_hash(c, path, ck.config_hash);
    if (ck.factor_names != panel.factor_names) throw ValidationError("model factor columns differ from the panel's");

    std::vector<Prediction> out;
    for (const auto& row : panel.rows) {
        if (!row.news || !row.factors) continue;
        const VectorXd x = ck.scaler.apply(classifier_input(row));
        if (x.size() != ck.params.input_dim())
            throw ValidationError("panel feature length " + std::to_string(x.size()) + " does not match the model's " +
                                  std::to_string(ck.params.input_dim()));
        Prediction p;
        p.symbol = row.symbol;
        p.date = row.date;
        p.proba = predict_proba(ck.params, x);
        p.label = predict_label(ck.params, x);
        out.push_back(std::move(p));
    }
    write_predictions_csv(artifact(c, "predictions.csv"), out, c.hash());
}

void stage_factors(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    std::map<ReturnKey, Label> labels;
    for (const auto& p : checked_predictions(c)) labels[{p.symbol, p.date}] = p.label;
    const auto rf = c.data.risk_free.empty() ? std::map<Date, double>{} : load_risk_free(c.data.risk_free);

    const auto plain = sort_panel(panel, nullptr, c.factors.breakpoints);
    const auto with_news = sort_panel(panel, &labels, c.factors.breakpoints);
    if (plain.empty()) throw ValidationError("no date has enough stocks with factors and returns to sort");
    write_factor_csv(artifact(c, "factors_ff5.csv"), factor_returns_ff5(panel, plain, c.factors.weighting, rf), c.hash());
    write_factor_csv(artifact(c, "factors_ff5news.csv"),
                     factor_returns_ff5news(panel, with_news, c.factors.weighting, rf), c.hash());
}

void stage_regress(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    for (const auto& [in, out] : {std::pair{"factors_ff5.csv", "regression_ff5.csv"},
                                  std::pair{"factors_ff5news.csv", "regression_ff5news.csv"}}) {
        const auto factors = checked_factors(c, in);
        const auto assets = regression_sample(c, panel, factors);
        write_regression_csv(artifact(c, out), regress_all(assets, factors), c.hash());
    }
}

void stage_grs(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    json j = {{"config_hash", c.hash()},
              {"regression_window", c.factors.regression_window == RegressionWindow::test ? "test" : "all"}};
    for (const auto& [in, reg, key] : {std::tuple{"factors_ff5.csv", "regression_ff5.csv", "ff5"},
                                       std::tuple{"factors_ff5news.csv", "regression_ff5news.csv", "ff5news"}}) {
        const auto factors = checked_factors(c, in);
        auto results = checked_regressions(c, reg);
        const auto assets = regression_sample(c, panel, factors);
        const Eigen::MatrixXd X = factors.subset(assets.dates).design();
        for (auto& r : results) {
            const auto it = std::find(assets.symbols.begin(), assets.symbols.end(), r.symbol);
            if (it == assets.symbols.end()) throw ValidationError("regression symbol " + r.symbol + " is not in the panel");
            const VectorXd y = assets.excess.col(static_cast<Index>(it - assets.symbols.begin()));
            r.residuals = y - X * r.loadings - VectorXd::Constant(y.size(), r.alpha);
        }
        // When the test assets make up the equal-weighted market, their residuals sum to
        // zero and the covariance is singular; the last asset is then left out.
        json excluded = json::array();
        GrsResult g;
        try {
            g = grs_test(results, X);
        } catch (const NumericalError&) {
            if (results.size() < 3) throw;
            excluded.push_back(results.back().symbol);
            results.pop_back();
            g = grs_test(results, X);
        }
        j[key] = {{"statistic", g.statistic}, {"p_value", g.p_value}, {"mean_abs_alpha", g.mean_abs_alpha},
                  {"T", g.T},                 {"N", g.N},             {"K", g.K},
                  {"excluded", excluded}};
    }
    write_json(artifact(c, "grs.json"), j);
}

void stage_risk(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    std::map<std::string, std::vector<const PanelRow*>> by_symbol;
    for (const auto& row : panel.rows)
        if (row.return_1d && part_of(c, row.date) != Part::outside) by_symbol[row.symbol].push_back(&row);

    std::vector<RiskRow> rows;
    std::vector<VarMetrics> per_stock;
    json per_symbol = json::object();
    for (const auto& [symbol, series] : by_symbol) {
        VectorXd returns(static_cast<Index>(series.size()));
        std::size_t n_train = 0;
        for (std::size_t t = 0; t < series.size(); ++t) {
            returns(static_cast<Index>(t)) = *series[t]->return_1d;
            if (part_of(c, series[t]->date) == Part::train) ++n_train;
        }
        if (n_train < 250) {
            warn(symbol + ": " + std::to_string(n_train) + " training returns, EGARCH needs 250; skipped");
            continue;
        }
        const auto fit = fit_egarch(returns.head(static_cast<Index>(n_train)), c.risk.fit);
        VolSeries vol;
        try {
            vol = egarch_forecast(fit, returns, c.risk.fit.variant);
        } catch (const NumericalError& e) {
            char buf[160];
            std::snprintf(buf, sizeof buf, " (omega=%g alpha=%g beta=%g gamma=%g)", fit.params.omega, fit.params.alpha(0),
                          fit.params.beta(0), fit.params.gamma(0));
            warn(symbol + ": out-of-sample volatility diverged" + buf + "; skipped");
            continue;
        }
        const auto var = compute_var(vol, c.risk.confidence);
        const auto actual = actual_var(returns, c.risk.confidence, c.risk.window);
        for (std::size_t t = 0; t < series.size(); ++t) {
            const auto ti = static_cast<Index>(t);
            rows.push_back({symbol, series[t]->date, vol.mu(ti), vol.sigma(ti), var[t].var_value, actual[t],
                            returns(ti) < var[t].var_value});
        }

        json entry = {{"omega", fit.params.omega},
                      {"alpha", std::vector<double>(fit.params.alpha.begin(), fit.params.alpha.end())},
                      {"beta", std::vector<double>(fit.params.beta.begin(), fit.params.beta.end())},
                      {"gamma", std::vector<double>(fit.params.gamma.begin(), fit.params.gamma.end())},
                      {"mu", fit.mu},
                      {"log_likelihood", fit.log_likelihood}};
        const std::size_t n_out = series.size() - n_train;
        if (n_out >= c.risk.window) {
            const auto m = evaluate_var(std::span(var).subspan(n_train), returns.tail(static_cast<Index>(n_out)),
                                        c.risk.window);
            per_stock.push_back(m);
            entry["metrics"] = var_metrics_json(m);
        } else {
            warn(symbol + ": out-of-sample span shorter than the VaR window; no metrics");
            entry["metrics"] = nullptr;
        }
        per_symbol[symbol] = entry;
    }
    if (per_symbol.empty()) throw ValidationError("no symbol has enough training returns for EGARCH");
    write_risk_csv(artifact(c, "risk.csv"), rows, c.hash());
    json j = {{"config_hash", c.hash()},
              {"confidence", c.risk.confidence},
              {"window", c.risk.window},
              {"evaluation", "after train_end"},
              {"per_symbol", per_symbol}};
    j["averaged"] = per_stock.empty() ? json(nullptr) : var_metrics_json(average_metrics(per_stock));
    j["pooled"] = per_stock.empty() ? json(nullptr) : var_metrics_json(pooled_metrics(per_stock));
    write_json(artifact(c, "risk_metrics.json"), j);
}

void stage_backtest(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    std::map<Date, std::vector<std::string>> positive;
    for (const auto& p : checked_predictions(c))
        if (p.label == Label::positive) positive[p.date].push_back(p.symbol);

    std::vector<TradePlan> plans;
    for (const auto& d : panel.dates())
        if (part_of(c, d) == Part::test) {
            auto symbols = positive[d];
            std::sort(symbols.begin(), symbols.end());
            plans.push_back({d, std::move(symbols)});
        }
    if (plans.empty()) throw ValidationError("no panel dates in the test window");

    const auto signal = run_backtest(panel, plans, c.backtest.cost);
    const auto baseline = run_backtest(panel, random_plans(panel, plans, c.backtest.random_seed), c.backtest.cost);
    write_ledger_csv(artifact(c, "ledger.csv"), signal.ledger, c.hash());
    write_curve_csv(artifact(c, "curve.csv"), signal.curve, c.hash());
    write_ledger_csv(artifact(c, "ledger_random.csv"), baseline.ledger, c.hash());
    write_curve_csv(artifact(c, "curve_random.csv"), baseline.curve, c.hash());
    write_json(artifact(c, "backtest_metrics.json"), {{"config_hash", c.hash()},
                                                      {"cost", c.backtest.cost},
                                                      {"test_dates", plans.size()},
                                                      {"classifier", backtest_json(signal)},
                                                      {"random", backtest_json(baseline)}});
}

void stage_report(const RunConfig& c) {
    const Panel panel = checked_panel(c);
    const auto predictions = checked_predictions(c);
    const auto factors = checked_factors(c, "factors_ff5news.csv");
    const auto regressions = checked_regressions(c, "regression_ff5news.csv");
    const auto risk_path = require(c, "risk.csv", "risk");
    std::string risk_hash;
    const auto risk_rows = read_risk_csv(risk_path, &risk_hash);
    check_hash(c, risk_path, risk_hash);

    std::map<std::string, const RegressionResult*> by_symbol;
    for (const auto& r : regressions) by_symbol[r.symbol] = &r;
    std::map<ReturnKey, const RiskRow*> risk;
    for (const auto& r : risk_rows) risk[{r.symbol, r.date}] = &r;
    std::map<ReturnKey, const PanelRow*> rows;
    for (const auto& r : panel.rows) rows[{r.symbol, r.date}] = &r;
    const std::set<Date> factor_dates(factors.dates.begin(), factors.dates.end());

    // Latest test-window news first.
    std::vector<const Prediction*> candidates;
    for (const auto& p : predictions)
        if (part_of(c, p.date) == Part::test) candidates.push_back(&p);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Prediction* a, const Prediction* b) { return a->date > b->date; });

    const auto dir = c.run_dir() / "reports";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const double z = stats::normal_quantile(c.risk.confidence);
    std::size_t written = 0;
    for (const auto* p : candidates) {
        if (written >= c.report.max_reports) break;
        const auto reg = by_symbol.find(p->symbol);
        const auto rk = risk.find({p->symbol, p->date});
        if (reg == by_symbol.end() || rk == risk.end() || !factor_dates.contains(p->date)) continue;

        const auto d = decompose(*reg->second, factors, p->date);
        const VarEstimate var{rk->second->var, c.risk.confidence, z};
        const ReportContext ctx{p->symbol, p->date, rows.at({p->symbol, p->date})->headline, p->label};
        const auto doc = render_report(d, var, ctx);
        const auto relayed = relay_llm(doc, c.report.llm);

        const auto stem = p->symbol + "_" + p->date.iso();
        {
            std::ofstream out(dir / (stem + ".md"), std::ios::binary);
            out << relayed.text;
        }
        auto sidecar = report_json(doc);
        sidecar["config_hash"] = c.hash();
        sidecar["relay"] = {{"enabled", c.report.llm.enabled}, {"fallback", relayed.fallback}};
        write_json(dir / (stem + ".json"), sidecar);
        ++written;
    }
    if (written == 0) warn("no test-window news item had the inputs for a report");
}

const std::vector<Stage>& pipeline_stages() {
    static const std::vector<Stage> stages = {
        {"ingest", [](const RunConfig& c) { stage_ingest(c); }},
        {"train", stage_train},
        {"predict", stage_predict},
        {"factors", stage_factors},
        {"regress", stage_regress},
        {"grs", stage_grs},
        {"risk", stage_risk},
        {"backtest", stage_backtest},
        {"report", stage_report},
    };
    return stages;
}

void run_stage(const std::string& name, const RunConfig& config) {
    const auto& stages = pipeline_stages();
    const auto it = std::find_if(stages.begin(), stages.end(), [&](const Stage& s) { return name == s.name; });
    if (it == stages.end()) throw ValidationError("unknown stage '" + name + "'");
    try {
        it->run(config);
    } catch (const ValidationError& e) {
        throw ValidationError("stage " + name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + name + ": " + e.what());
    }
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::uint64_t h = 14695981039346656037ull;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 1099511628211ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void run_pipeline(const RunConfig& config) {
    config.validate_paths();
    for (const auto& stage : pipeline_stages()) run_stage(stage.name, config);

    auto archived = config.to_json();
    archived.erase("output_dir");
    archived["config_hash"] = config.hash();
    write_json(artifact(config, "config.json"), archived);

    std::vector<std::string> names;
    for (const auto& entry : fs::recursive_directory_iterator(config.run_dir()))
        if (entry.is_regular_file()) names.push_back(fs::relative(entry.path(), config.run_dir()).generic_string());
    std::sort(names.begin(), names.end());
    json files = json::object();
    for (const auto& n : names)
        if (n != "manifest.json") files[n] = file_digest(config.run_dir() / n);
    write_json(artifact(config, "manifest.json"), {{"config_hash", config.hash()}, {"files", files}});
}

}  // namespace finreport
