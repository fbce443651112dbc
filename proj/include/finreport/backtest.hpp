#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finreport/date.hpp"
#include "finreport/market_data.hpp"

namespace finreport {

// Symbols bought at the open of `date` and sold at the next open, equal weight.
// An empty plan is a cash day.
struct TradePlan {
    Date date;
    std::vector<std::string> symbols;
};

struct LedgerEntry {
    Date date;
    std::string symbol;
    double buy_open = 0.0;
    double sell_open = 0.0;
    double net_return = 0.0;
};

struct EquityPoint {
    Date date;
    double equity = 1.0;
    double daily_return = 0.0;
};

struct EquityCurve {
    double initial_equity = 1.0;
    std::vector<EquityPoint> points;

    // initial_equity followed by every point's equity.
    std::vector<double> equity_series() const;
    std::vector<double> daily_returns() const;

    // Builds a curve from an equity path whose first element is the starting equity.
    static EquityCurve from_equity(std::span<const double> equity);

    friend bool operator==(const EquityCurve&, const EquityCurve&);
};

struct BacktestResult {
    EquityCurve curve;
    std::vector<LedgerEntry> ledger;
    std::vector<std::string> events;
};

// Net position return: open_next (1 - cost) / (open (1 + cost)) - 1.
double position_return(double buy_open, double sell_open, double cost);

// Plans must have strictly increasing dates. Positions without a next open are
// skipped (remaining positions share the weight) and logged as events.
BacktestResult run_backtest(const Panel& panel, std::span<const TradePlan> plans, double cost = 0.001,
                            double initial_equity = 1.0);

// Re-derives the curve from ledger entries: per-date mean of net returns, compounded.
EquityCurve curve_from_ledger(std::span<const LedgerEntry> ledger, std::span<const Date> dates,
                              double initial_equity = 1.0);

// min_t equity_t / max_{s<=t} equity_s - 1, over equity_series().
double max_drawdown(const EquityCurve& curve);

// (end / start)^(days_per_year / T) - 1 with T daily returns.
double annualized_return(const EquityCurve& curve, double trading_days_per_year = 252.0);

// mean / sample std of daily excess returns, times sqrt(days_per_year).
// Throws NumericalError on zero variance.
double sharpe_ratio(const EquityCurve& curve, double risk_free_daily = 0.0, double trading_days_per_year = 252.0);

struct BacktestMetrics {
    double annualized_return = 0.0;
    double max_drawdown = 0.0;
    double sharpe_ratio = 0.0;
};
BacktestMetrics backtest_metrics(const EquityCurve& curve);

// Same number of positions per date as `reference`, drawn uniformly from the
// symbols tradable that day (open and next open present).
std::vector<TradePlan> random_plans(const Panel& panel, std::span<const TradePlan> reference, std::uint64_t seed);

// CSV: date,symbol,buy_open,sell_open,net_return
void write_ledger_csv(const std::filesystem::path& path, std::span<const LedgerEntry> ledger,
                      const std::string& config_hash = {});
// CSV: date,equity,daily_return
void write_curve_csv(const std::filesystem::path& path, const EquityCurve& curve, const std::string& config_hash = {});

}  // namespace finreport
