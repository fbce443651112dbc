#include <cmath>

#include <gtest/gtest.h>

#include "backtest_fixture.hpp"
#include "finreport/backtest.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"
#include "test_util.hpp"

using namespace finreport;

namespace {

Panel single_stock(const std::vector<double>& opens) {
    Panel p;
    Date d(2024, 1, 1);
    for (std::size_t i = 0; i < opens.size(); ++i) {
        PanelRow r;
        r.symbol = "ONE";
        r.date = d;
        r.open = r.close = opens[i];
        if (i + 1 < opens.size()) r.open_next = opens[i + 1];
        p.rows.push_back(r);
        d = d.next_day();
    }
    return p;
}

std::vector<TradePlan> hold_all(const Panel& p, std::size_t days) {
    std::vector<TradePlan> plans;
    for (std::size_t i = 0; i < days; ++i) plans.push_back({p.rows[i].date, {"ONE"}});
    return plans;
}

}  // namespace

TEST(Backtest, PositionReturn) {
    EXPECT_NEAR(position_return(100, 101, 0.001), 0.0079820179820180, 1e-9);
    EXPECT_EQ(position_return(100, 101, 0.0), 0.01);
}

TEST(Backtest, HandFixture) {
    const auto f = testkit::make_backtest_fixture();
    const auto result = run_backtest(f.panel, f.plans, 0.001);
    const auto equity = result.curve.equity_series();
    ASSERT_EQ(equity.size(), f.expected_equity.size());
    for (std::size_t i = 0; i < equity.size(); ++i) EXPECT_NEAR(equity[i], f.expected_equity[i], 1e-12);
    EXPECT_EQ(result.ledger.size(), 6u);
    EXPECT_EQ(result.curve.points[2].daily_return, 0.0);
    EXPECT_TRUE(result.events.empty());
}

TEST(Backtest, CurveFromLedgerIsBitExact) {
    const auto f = testkit::make_backtest_fixture();
    const auto result = run_backtest(f.panel, f.plans, 0.001);
    std::vector<Date> dates;
    for (const auto& p : f.plans) dates.push_back(p.date);
    EXPECT_TRUE(curve_from_ledger(result.ledger, dates) == result.curve);
}

TEST(Backtest, CashDaysAreFlat) {
    const auto f = testkit::make_backtest_fixture();
    std::vector<TradePlan> empty;
    for (const auto& p : f.plans) empty.push_back({p.date, {}});
    const auto result = run_backtest(f.panel, empty);
    for (const double e : result.curve.equity_series()) EXPECT_EQ(e, 1.0);
}

TEST(Backtest, FrictionlessBuyAndHold) {
    const std::vector<double> opens{10.0, 10.3, 9.7, 11.1, 10.9, 12.4};
    const auto p = single_stock(opens);
    const auto result = run_backtest(p, hold_all(p, 5), 0.0);
    EXPECT_NEAR(result.curve.points.back().equity - 1.0, 12.4 / 10.0 - 1.0, 1e-12);
}

TEST(Backtest, CostIsMonotone) {
    const auto f = testkit::make_backtest_fixture();
    const auto cheap = run_backtest(f.panel, f.plans, 0.001);
    const auto dear = run_backtest(f.panel, f.plans, 0.002);
    for (std::size_t i = 0; i < f.plans.size(); ++i) {
        if (f.plans[i].symbols.empty()) continue;
        EXPECT_LT(dear.curve.points[i].daily_return, cheap.curve.points[i].daily_return);
    }
}

TEST(Backtest, MetricsInvariantToInitialEquity) {
    const auto f = testkit::make_backtest_fixture();
    const auto a = backtest_metrics(run_backtest(f.panel, f.plans, 0.001, 1.0).curve);
    const auto b = backtest_metrics(run_backtest(f.panel, f.plans, 0.001, 250.0).curve);
    EXPECT_NEAR(a.annualized_return, b.annualized_return, 1e-12);
    EXPECT_NEAR(a.max_drawdown, b.max_drawdown, 1e-12);
    EXPECT_NEAR(a.sharpe_ratio, b.sharpe_ratio, 1e-9);
}

TEST(Backtest, MissingNextOpenIsSkipped) {
    auto f = testkit::make_backtest_fixture();
    for (auto& r : f.panel.rows)
        if (r.symbol == "BBB" && r.date == Date(2024, 3, 5)) r.open_next.reset();
    WarningCapture capture;
    const auto result = run_backtest(f.panel, f.plans, 0.001);
    ASSERT_EQ(result.events.size(), 1u);
    EXPECT_NE(result.events[0].find("BBB"), std::string::npos);
    EXPECT_NEAR(result.curve.points[1].daily_return, 99.0 * 0.999 / (101.0 * 1.001) - 1.0, 1e-15);
    EXPECT_FALSE(capture.messages().empty());
}

TEST(Backtest, PlansMustIncrease) {
    const auto f = testkit::make_backtest_fixture();
    std::vector<TradePlan> plans{f.plans[1], f.plans[0]};
    EXPECT_THROW(run_backtest(f.panel, plans), ValidationError);
    EXPECT_THROW(run_backtest(f.panel, f.plans, 1.0), ValidationError);
}

TEST(Metrics, MaxDrawdown) {
    const std::vector<double> path{1.0, 1.2, 0.9, 1.1};
    EXPECT_EQ(max_drawdown(EquityCurve::from_equity(path)), -0.25);
    const std::vector<double> up{1.0, 1.1, 1.2, 1.3};
    EXPECT_EQ(max_drawdown(EquityCurve::from_equity(up)), 0.0);
}

TEST(Metrics, AnnualizedReturn) {
    std::vector<double> path{1.0};
    for (int i = 0; i < 252; ++i) path.push_back(path.back() * 1.001);
    EXPECT_NEAR(annualized_return(EquityCurve::from_equity(path)), 0.2865, 1e-4);
    EXPECT_NEAR(annualized_return(EquityCurve::from_equity(path)), std::pow(1.001, 252) - 1.0, 1e-12);
    const std::vector<double> flat{1.0, 1.0, 1.0};
    EXPECT_EQ(annualized_return(EquityCurve::from_equity(flat)), 0.0);
}

TEST(Metrics, Sharpe) {
    const std::vector<double> alternating{1.0, 1.01, 1.01 * 0.99, 1.01 * 0.99 * 1.01, 1.01 * 0.99 * 1.01 * 0.99};
    auto c = EquityCurve::from_equity(alternating);
    for (std::size_t i = 0; i < c.points.size(); ++i) c.points[i].daily_return = i % 2 ? -0.01 : 0.01;
    EXPECT_NEAR(sharpe_ratio(c), 0.0, 1e-15);

    std::vector<double> constant{1.0};
    for (int i = 0; i < 10; ++i) constant.push_back(constant.back() * 1.001);
    auto k = EquityCurve::from_equity(constant);
    for (auto& pt : k.points) pt.daily_return = 0.001;
    EXPECT_THROW(sharpe_ratio(k), NumericalError);

    // mean / sample sd * sqrt(252)
    const std::vector<double> r{0.01, -0.005, 0.002, 0.007};
    std::vector<double> path{1.0};
    for (const double x : r) path.push_back(path.back() * (1 + x));
    auto s = EquityCurve::from_equity(path);
    for (std::size_t i = 0; i < r.size(); ++i) s.points[i].daily_return = r[i];
    const double mean = (0.01 - 0.005 + 0.002 + 0.007) / 4;
    double ss = 0;
    for (const double x : r) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(sharpe_ratio(s), mean / std::sqrt(ss / 3) * std::sqrt(252.0), 1e-12);
}

TEST(RandomPlans, MatchesTurnoverAndIsSeeded) {
    const auto f = testkit::make_backtest_fixture();
    const auto a = random_plans(f.panel, f.plans, 3);
    const auto b = random_plans(f.panel, f.plans, 3);
    ASSERT_EQ(a.size(), f.plans.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].date, f.plans[i].date);
        EXPECT_EQ(a[i].symbols.size(), f.plans[i].symbols.size());
        EXPECT_EQ(a[i].symbols, b[i].symbols);
    }
}

TEST(BacktestCsv, Headers) {
    testkit::TempDir dir;
    const auto f = testkit::make_backtest_fixture();
    const auto result = run_backtest(f.panel, f.plans);
    write_ledger_csv(dir / "l.csv", result.ledger, "h1");
    write_curve_csv(dir / "c.csv", result.curve, "h1");
    EXPECT_NE(testkit::read_file(dir / "l.csv").find("date,symbol,buy_open,sell_open,net_return\n"), std::string::npos);
    EXPECT_NE(testkit::read_file(dir / "c.csv").find("date,equity,daily_return\n2024-03-04,"), std::string::npos);
}
