// Acceptance suite: one PASS/FAIL line per criterion, each within its time limit.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "backtest_fixture.hpp"
#include "factor_fixture.hpp"
#include "finreport/backtest.hpp"
#include "finreport/classifier.hpp"
#include "finreport/config.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/factor_model.hpp"
#include "finreport/fixture.hpp"
#include "finreport/pipeline.hpp"
#include "finreport/report.hpp"
#include "finreport/risk.hpp"
#include "report_fixture.hpp"
#include "test_util.hpp"

using namespace finreport;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* format, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, x);
    return buf;
}

// 1. Analytic gradient against central differences (h = 1e-5) at 20 random points.
Outcome gradient_check() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> label(0, 2);
    const double h = 1e-5;
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
        auto p = Mlp::init(6, 8, rng());
        p.w_alpha = VectorXd::Random(6) + VectorXd::Constant(6, 1.0);
        p.b1 = VectorXd::Random(8) * 0.3;
        p.b2 = VectorXd::Random(3) * 0.3;
        const MatrixXd x = MatrixXd::Random(6, 5);
        std::vector<Label> labels;
        for (int j = 0; j < 5; ++j) labels.push_back(static_cast<Label>(label(rng)));

        auto analytic = loss_and_gradient(p, x, labels).gradient;
        std::vector<VectorXd> grads;
        analytic.for_each_tensor([&](const char*, Eigen::Map<VectorXd> v) { grads.emplace_back(v); });
        std::vector<Eigen::Map<VectorXd>> views;
        p.for_each_tensor([&](const char*, Eigen::Map<VectorXd> v) { views.push_back(v); });
        for (std::size_t t = 0; t < views.size(); ++t) {
            VectorXd numeric(views[t].size());
            for (Eigen::Index i = 0; i < views[t].size(); ++i) {
                const double saved = views[t](i);
                views[t](i) = saved + h;
                const double up = batch_loss(p, x, labels);
                views[t](i) = saved - h;
                const double down = batch_loss(p, x, labels);
                views[t](i) = saved;
                numeric(i) = (up - down) / (2.0 * h);
            }
            const double scale = std::max({grads[t].norm(), numeric.norm(), 1e-12});
            worst = std::max(worst, (grads[t] - numeric).norm() / scale);
        }
    }
    return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over 20 points"};
}

// 2. Label counts on random cross-sections against an independent ranking.
Outcome label_quantiles() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> size(5, 500);
    std::normal_distribution<double> ret(0.0, 0.02);
    std::uniform_int_distribution<int> tie(0, 9);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        std::map<std::string, double> returns;
        for (int i = 0; i < n; ++i) {
            char name[16];
            std::snprintf(name, sizeof name, "S%04d", i);
            // Occasional exact ties exercise the symbol tie-break.
            returns[name] = tie(rng) == 0 ? 0.0 : ret(rng);
        }
        std::vector<std::pair<std::string, double>> ranked(returns.begin(), returns.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        const std::size_t pos = std::max<std::size_t>(1, n / 5), neu = 2 * n / 5, neg = n / 5;
        const auto labels = assign_labels(returns);
        const auto counts = expected_label_counts(n);
        if (counts.positive != pos || counts.neutral != neu || counts.negative != neg)
            return {false, "expected_label_counts wrong for n=" + std::to_string(n)};
        std::size_t seen[3] = {0, 0, 0};
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            std::optional<Label> want;
            if (r < pos) want = Label::positive;
            else if (r < pos + neu) want = Label::neutral;
            else if (r >= ranked.size() - neg) want = Label::negative;
            const auto& got = labels.at(ranked[r].first);
            if (got != want) return {false, "label mismatch at rank " + std::to_string(r) + ", n=" + std::to_string(n)};
            if (got) ++seen[static_cast<int>(*got)];
        }
        if (seen[0] != pos || seen[1] != neu || seen[2] != neg)
            return {false, "class counts wrong for n=" + std::to_string(n)};
    }
    return {true, "1000 cross-sections, counts and ranks exact"};
}

// 3. Three Gaussian blobs, 300 samples.
Outcome separable_training() {
    std::mt19937_64 rng(303);
    std::normal_distribution<double> n(0.0, 0.5);
    LabeledSet data;
    data.inputs.resize(4, 300);
    for (int j = 0; j < 300; ++j) {
        const int k = j % 3;
        for (int i = 0; i < 4; ++i) data.inputs(i, j) = n(rng) + (i == k ? 3.0 : 0.0);
        data.labels.push_back(static_cast<Label>(k));
    }
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.hidden_dim = 64;
    cfg.rng_seed = 3;
    const auto result = train(data, cfg);
    const double acc = evaluate(result.params, data).accuracy;
    return {acc >= 0.95 && result.history.size() <= 200, "training accuracy " + fmt("%.4f", acc) + " after 200 epochs"};
}

// 4. OLS on exact and noisy linear data.
Outcome ols_exactness() {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> f01(0.0, 0.01), noise(0.0, 0.001);
    const std::vector<std::string> names{"mkt_excess", "smb", "hml", "rmw", "cma", "news"};
    const VectorXd b = (VectorXd(6) << 1.1, 0.4, -0.3, 0.2, 0.5, 0.8).finished();

    MatrixXd f(300, 6);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = f01(rng);
    const VectorXd exact = (f * b).array() + 0.0007;
    const auto r = ols_regress(exact, f, names);
    const double exact_err = std::max((r.loadings - b).cwiseAbs().maxCoeff(), std::abs(r.alpha - 0.0007));

    MatrixXd g(1000, 6);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = f01(rng);
    VectorXd y = g * b;
    for (auto& v : y) v += 0.0005 + noise(rng);
    const double noisy_err = (ols_regress(y, g, names).loadings - b).cwiseAbs().maxCoeff();
    return {exact_err < 1e-10 && noisy_err <= 0.02,
            "exact max error " + fmt("%.1e", exact_err) + ", noisy max error " + fmt("%.4f", noisy_err)};
}

// 5. GRS size under zero alpha.
Outcome grs_size() {
    const Eigen::Index N = 5, K = 5, T = 500;
    const std::vector<std::string> names{"mkt_excess", "smb", "hml", "rmw", "cma"};
    std::normal_distribution<double> fac(0.0005, 0.01), eps(0.0, 0.01);
    std::uniform_real_distribution<double> beta(-0.5, 1.5);
    int accepted = 0;
    bool zero_exact = true;
    for (int rep = 0; rep < 100; ++rep) {
        std::mt19937_64 rng(5000 + rep);
        MatrixXd f(T, K);
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = fac(rng);
        std::vector<RegressionResult> results;
        for (Eigen::Index i = 0; i < N; ++i) {
            VectorXd b(K);
            for (auto& v : b) v = beta(rng);
            VectorXd y = f * b;
            for (auto& v : y) v += eps(rng);
            results.push_back(ols_regress(y, f, names));
        }
        if (grs_test(results, f).p_value > 0.01) ++accepted;
        for (auto& r : results) r.alpha = 0.0;
        zero_exact = zero_exact && grs_test(results, f).statistic == 0.0;
    }
    return {accepted >= 95 && zero_exact, std::to_string(accepted) + "/100 with p > 0.01; zeroed alphas give " +
                                              (zero_exact ? "statistic 0" : "nonzero statistic")};
}

// 6. Factor formulas on the hand-built 12-stock fixture.
Outcome factor_formulas() {
    const auto fx = testkit::make_hand_fixture();
    const auto ff5n = factor_returns_ff5news(fx.panel, sort_panel(fx.panel, &fx.labels));
    double worst = 0.0;
    for (Eigen::Index t = 0; t < ff5n.size(); ++t) {
        const auto& h = fx.expected[static_cast<std::size_t>(t)];
        for (const auto& [got, want] : {std::pair{ff5n.smb(t), h.smb},
                                        {ff5n.hml(t), h.hml},
                                        {ff5n.rmw(t), h.rmw},
                                        {ff5n.cma(t), h.cma},
                                        {(*ff5n.news)(t), h.news}})
            worst = std::max(worst, std::abs(got - want));
    }
    return {ff5n.size() == 3 && worst <= 1e-12, "max deviation " + fmt("%.1e", worst) + " over 3 dates"};
}

// 7. EGARCH(1,1) parameter recovery.
Outcome egarch_recovery() {
    EgarchParams truth;
    truth.omega = -0.1;
    truth.alpha = VectorXd::Constant(1, 0.15);
    truth.beta = VectorXd::Constant(1, 0.9);
    truth.gamma = VectorXd::Constant(1, 0.02);
    const VectorXd r = simulate_egarch(truth, 5000, 707);
    EgarchFitOptions opt;
    opt.seed = 7;
    const auto fit = fit_egarch(r, opt);
    const VectorXd err = (fit.params.pack() - truth.pack()).cwiseAbs();
    std::ostringstream s;
    s << "fitted (w, a, b, g) = (" << fmt("%.4f", fit.params.omega) << ", " << fmt("%.4f", fit.params.alpha(0)) << ", "
      << fmt("%.4f", fit.params.beta(0)) << ", " << fmt("%.4f", fit.params.gamma(0)) << "), max error "
      << fmt("%.4f", err.maxCoeff());
    return {err.maxCoeff() <= 0.15, s.str()};
}

// 8. VaR coverage on i.i.d. N(0, 0.02^2) returns with the true-parameter VaR.
Outcome var_coverage() {
    std::mt19937_64 rng(808);
    std::normal_distribution<double> n(0.0, 0.02);
    const Eigen::Index T = 10000;
    VectorXd r(T);
    for (auto& v : r) v = n(rng);
    const VolSeries truth{VectorXd::Constant(T, 0.02), VectorXd::Zero(T), r};
    const auto m = evaluate_var(compute_var(truth, 0.95), r, 250);
    return {std::abs(m.coverage_rate - 0.95) <= 0.015, "coverage " + fmt("%.4f", m.coverage_rate) + " over 10000 days"};
}

// 9. Backtest arithmetic.
Outcome backtest_arithmetic() {
    const auto f = testkit::make_backtest_fixture();
    const auto equity = run_backtest(f.panel, f.plans, 0.001).curve.equity_series();
    double worst = equity.size() == f.expected_equity.size() ? 0.0 : 1.0;
    for (std::size_t i = 0; i < std::min(equity.size(), f.expected_equity.size()); ++i)
        worst = std::max(worst, std::abs(equity[i] - f.expected_equity[i]));
    const std::vector<double> path{1.0, 1.2, 0.9, 1.1};
    const double mdd = max_drawdown(EquityCurve::from_equity(path));
    return {worst <= 1e-12 && mdd == -0.25,
            "max equity deviation " + fmt("%.1e", worst) + ", max drawdown " + fmt("%.17g", mdd)};
}

int shell(const std::string& command) {
    const int status = std::system((command + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> digests(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = file_digest(e.path());
    return out;
}

// 10. `finreport pipeline` twice on the synthetic fixture.
Outcome end_to_end_determinism() {
    testkit::TempDir dir;
    const std::string cli = std::string("'") + FINREPORT_CLI + "'";
    const std::string data = "'" + dir.path().string() + "'";
    if (shell(cli + " gen-fixture --out " + data) != 0) return {false, "gen-fixture failed"};
    const std::string cfg = " -c '" + (dir / "config.json").string() + "'";
    double slowest = 0.0;
    for (const char* out : {"a", "b"}) {
        const auto start = std::chrono::steady_clock::now();
        if (shell(cli + " pipeline" + cfg + " --set output_dir='" + (dir / out).string() + "'") != 0)
            return {false, std::string("pipeline run ") + out + " failed"};
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    const auto config = load_config(dir / "config.json");
    const auto a = digests(dir / "a" / config.run_dir().filename());
    const auto b = digests(dir / "b" / config.run_dir().filename());
    const bool same = !a.empty() && a == b;
    return {same && slowest < 300.0, std::to_string(a.size()) + " artifacts " + (same ? "bit-identical" : "DIFFER") +
                                         ", slowest run " + fmt("%.1f", slowest) + " s"};
}

// 11. Golden report, trend rule, relay fallback inside the pipeline.
Outcome report_contract() {
    const auto doc = render_report(testkit::golden_decomposition(), testkit::golden_var(), testkit::golden_context());
    const bool golden = doc.markdown == testkit::read_file(fs::path(FINREPORT_TEST_DATA) / "report_golden.md");

    std::mt19937_64 rng(1111);
    std::normal_distribution<double> n(0.0, 0.01);
    std::bernoulli_distribution exact_zero(0.05);
    int trend_ok = 0;
    for (int i = 0; i < 1000; ++i) {
        ReturnDecomposition d;
        d.alpha = n(rng);
        d.market = n(rng);
        d.size = n(rng);
        d.valuation = n(rng);
        d.profitability = n(rng);
        d.investment = n(rng);
        d.news_effect = n(rng);
        d.predicted_excess_return = exact_zero(rng) ? 0.0 : n(rng);
        const auto r = render_report(d, {n(rng) - 0.03, 0.95, 1.6448536269514722}, testkit::golden_context());
        const bool want_positive = d.predicted_excess_return > 0.0;
        if ((r.overall_trend == Trend::positive) == want_positive &&
            r.markdown.find(std::string("## Overall Trend\n\n") + (want_positive ? "Positive" : "Negative")) !=
                std::string::npos)
            ++trend_ok;
    }

    testkit::EchoServer server;
    testkit::TempDir dir;
    generate_fixture(dir.path());
    const auto config = load_config(dir / "config.json",
                                    std::vector<std::string>{"output_dir=" + (dir / "out").string(),
                                                             "report.llm.enabled=true",
                                                             "report.llm.endpoint=" + server.url("/fail"),
                                                             "report.llm.timeout_ms=2000"});
    bool pipeline_ok = true;
    std::size_t fallbacks = 0, reports = 0;
    {
        WarningSilencer quiet;
        try {
            run_pipeline(config);
            for (const auto& e : fs::directory_iterator(config.run_dir() / "reports")) {
                if (e.path().extension() != ".json") continue;
                ++reports;
                const auto j = nlohmann::json::parse(testkit::read_file(e.path()));
                if (j["relay"]["fallback"] == true) ++fallbacks;
            }
        } catch (const std::exception&) {
            pipeline_ok = false;
        }
    }
    const auto unreachable = relay_llm(doc, {true, "http://127.0.0.1:1/x", "m", 1000});
    const bool relay_ok = pipeline_ok && reports > 0 && fallbacks == reports && unreachable.fallback &&
                          unreachable.text == doc.markdown;
    return {golden && trend_ok == 1000 && relay_ok,
            std::string("golden ") + (golden ? "match" : "MISMATCH") + ", trend rule " + std::to_string(trend_ok) +
                "/1000, relay fallback " + std::to_string(fallbacks) + "/" + std::to_string(reports) + " reports" +
                (pipeline_ok ? "" : ", pipeline FAILED")};
}

double mean_abs_alpha(const fs::path& path) {
    const auto results = read_regression_csv(path);
    double s = 0.0;
    for (const auto& r : results) s += std::abs(r.alpha);
    return s / static_cast<double>(results.size());
}

// 12. Planted news signal: FF5-News explains more and the classifier beats random picks.
Outcome planted_signal() {
    int passed = 0;
    std::ostringstream failures;
    WarningSilencer quiet;
    for (int rep = 0; rep < 20; ++rep) {
        testkit::TempDir dir;
        FixtureOptions opt;
        opt.seed = 1000 + static_cast<std::uint64_t>(rep);
        generate_fixture(dir.path(), opt);
        const auto config = load_config(dir / "config.json",
                                        std::vector<std::string>{"output_dir=" + (dir / "out").string()});
        try {
            for (const char* stage : {"ingest", "train", "predict", "factors", "regress", "backtest"})
                run_stage(stage, config);
        } catch (const std::exception& e) {
            failures << " rep" << rep << ":error";
            continue;
        }
        const double ff5 = mean_abs_alpha(config.run_dir() / "regression_ff5.csv");
        const double ff5n = mean_abs_alpha(config.run_dir() / "regression_ff5news.csv");
        const auto m = nlohmann::json::parse(testkit::read_file(config.run_dir() / "backtest_metrics.json"));
        const auto& sc = m["classifier"]["sharpe_ratio"];
        const auto& sr = m["random"]["sharpe_ratio"];
        const bool sharpe_ok = sc.is_number() && sr.is_number() && sc.get<double>() > sr.get<double>();
        if (ff5n <= ff5 && sharpe_ok)
            ++passed;
        else
            failures << " rep" << rep << (ff5n <= ff5 ? "" : ":alpha") << (sharpe_ok ? "" : ":sharpe");
    }
    return {passed >= 17, std::to_string(passed) + "/20 replications pass" +
                              (failures.str().empty() ? "" : " (failed:" + failures.str() + ")")};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "classifier gradient check", 10, gradient_check},
        {2, "label quantiles", 5, label_quantiles},
        {3, "separable-data training", 60, separable_training},
        {4, "OLS exactness", 5, ols_exactness},
        {5, "GRS size", 60, grs_size},
        {6, "factor formulas on hand fixture", 1, factor_formulas},
        {7, "EGARCH recovery", 120, egarch_recovery},
        {8, "VaR coverage", 30, var_coverage},
        {9, "backtest arithmetic", 1, backtest_arithmetic},
        {10, "end-to-end determinism", 600, end_to_end_determinism},
        {11, "report contract", 10, report_contract},
        {12, "planted-signal sanity", 300, planted_signal},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = elapsed < c.limit_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::printf("[%s] %2d %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), elapsed, c.limit_seconds, in_time ? "" : ", TOO SLOW");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
