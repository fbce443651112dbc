#include "finreport/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "finreport/csv.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"
#include "finreport/stats.hpp"

namespace finreport {

std::vector<double> EquityCurve::equity_series() const {
    std::vector<double> out{initial_equity};
    for (const auto& p : points) out.push_back(p.equity);
    return out;
}

std::vector<double> EquityCurve::daily_returns() const {
    std::vector<double> out;
    for (const auto& p : points) out.push_back(p.daily_return);
    return out;
}

EquityCurve EquityCurve::from_equity(std::span<const double> equity) {
    if (equity.empty()) throw ValidationError("equity path is empty");
    EquityCurve c;
    c.initial_equity = equity.front();
    Date d(2000, 1, 1);
    for (std::size_t i = 1; i < equity.size(); ++i) {
        c.points.push_back({d, equity[i], equity[i] / equity[i - 1] - 1.0});
        d = d.next_day();
    }
    return c;
}

bool operator==(const EquityCurve& a, const EquityCurve& b) {
    if (a.initial_equity != b.initial_equity || a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].date != b.points[i].date || a.points[i].equity != b.points[i].equity ||
            a.points[i].daily_return != b.points[i].daily_return)
            return false;
    return true;
}

double position_return(double buy_open, double sell_open, double cost) {
    const double paid = buy_open * (1.0 + cost);
    return (sell_open * (1.0 - cost) - paid) / paid;
}

namespace {

double mean_in_order(std::span<const double> values) {
    double sum = 0.0;
    for (const double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

BacktestResult run_backtest(const Panel& panel, std::span<const TradePlan> plans, double cost, double initial_equity) {
    if (!(cost >= 0.0 && cost < 1.0)) throw ValidationError("backtest cost must lie in [0, 1)");
    if (!(initial_equity > 0.0)) throw ValidationError("initial equity must be positive");
    std::map<ReturnKey, const PanelRow*> row_at;
    for (const auto& r : panel.rows) row_at[{r.symbol, r.date}] = &r;

    BacktestResult result;
    result.curve.initial_equity = initial_equity;
    double equity = initial_equity;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& plan = plans[i];
        if (i > 0 && !(plans[i - 1].date < plan.date)) throw ValidationError("trade plans must have increasing dates");
        std::vector<double> day_returns;
        for (const auto& symbol : std::set<std::string>(plan.symbols.begin(), plan.symbols.end())) {
            const auto it = row_at.find({symbol, plan.date});
            if (it == row_at.end() || !it->second->open_next) {
                const std::string event = plan.date.iso() + " " + symbol + ": no next open, position skipped";
                result.events.push_back(event);
                warn(event);
                continue;
            }
            const PanelRow& row = *it->second;
            const double r = position_return(row.open, *row.open_next, cost);
            result.ledger.push_back({plan.date, symbol, row.open, *row.open_next, r});
            day_returns.push_back(r);
        }
        const double daily = day_returns.empty() ? 0.0 : mean_in_order(day_returns);
        equity *= 1.0 + daily;
        if (!(equity > 0.0)) throw NumericalError("equity reached zero on " + plan.date.iso());
        result.curve.points.push_back({plan.date, equity, daily});
    }
    return result;
}

EquityCurve curve_from_ledger(std::span<const LedgerEntry> ledger, std::span<const Date> dates, double initial_equity) {
    std::map<Date, std::vector<double>> by_date;
    for (const auto& e : ledger) by_date[e.date].push_back(e.net_return);
    EquityCurve c;
    c.initial_equity = initial_equity;
    double equity = initial_equity;
    for (const auto& d : dates) {
        const auto it = by_date.find(d);
        const double daily = it == by_date.end() ? 0.0 : mean_in_order(it->second);
        equity *= 1.0 + daily;
        c.points.push_back({d, equity, daily});
    }
    return c;
}

double max_drawdown(const EquityCurve& curve) {
    const auto equity = curve.equity_series();
    double peak = equity.front();
    double worst = 0.0;
    for (const double e : equity) {
        peak = std::max(peak, e);
        worst = std::min(worst, e / peak - 1.0);
    }
    return worst;
}

double annualized_return(const EquityCurve& curve, double trading_days_per_year) {
    if (curve.points.empty()) throw ValidationError("annualized_return needs at least one daily return");
    const double growth = curve.points.back().equity / curve.initial_equity;
    return std::pow(growth, trading_days_per_year / static_cast<double>(curve.points.size())) - 1.0;
}

double sharpe_ratio(const EquityCurve& curve, double risk_free_daily, double trading_days_per_year) {
    auto excess = curve.daily_returns();
    if (excess.size() < 2) throw NumericalError("undefined Sharpe: fewer than two daily returns");
    for (auto& r : excess) r -= risk_free_daily;
    // Constant returns leave rounding noise in the sample deviation, so test equality directly.
    const auto [lo, hi] = std::minmax_element(excess.begin(), excess.end());
    const double sd = *lo == *hi ? 0.0 : stats::stddev(excess);
    if (!(sd > 0.0)) throw NumericalError("undefined Sharpe: zero-variance returns");
    return stats::mean(excess) / sd * std::sqrt(trading_days_per_year);
}

BacktestMetrics backtest_metrics(const EquityCurve& curve) {
    BacktestMetrics m;
    m.annualized_return = annualized_return(curve);
    m.max_drawdown = max_drawdown(curve);
    try {
        m.sharpe_ratio = sharpe_ratio(curve);
    } catch (const NumericalError&) {
        m.sharpe_ratio = 0.0;
        warn("Sharpe ratio undefined for a zero-variance curve; reported as 0");
    }
    return m;
}

std::vector<TradePlan> random_plans(const Panel& panel, std::span<const TradePlan> reference, std::uint64_t seed) {
    std::map<Date, std::vector<std::string>> tradable;
    for (const auto& r : panel.rows)
        if (r.open_next) tradable[r.date].push_back(r.symbol);
    std::mt19937_64 rng(seed);
    std::vector<TradePlan> out;
    for (const auto& plan : reference) {
        TradePlan p{plan.date, {}};
        auto pool = tradable[plan.date];
        std::sort(pool.begin(), pool.end());
        const std::size_t k = std::min(plan.symbols.size(), pool.size());
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
            p.symbols.push_back(pool[i]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_ledger_csv(const std::filesystem::path& path, std::span<const LedgerEntry> ledger, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    csv::write_hash_comment(out, config_hash);
    out << "date,symbol,buy_open,sell_open,net_return\n";
    for (const auto& e : ledger)
        out << e.date.iso() << ',' << e.symbol << ',' << csv::format(e.buy_open) << ',' << csv::format(e.sell_open)
            << ',' << csv::format(e.net_return) << '\n';
}

void write_curve_csv(const std::filesystem::path& path, const EquityCurve& curve, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    csv::write_hash_comment(out, config_hash);
    out << "date,equity,daily_return\n";
    for (const auto& p : curve.points)
        out << p.date.iso() << ',' << csv::format(p.equity) << ',' << csv::format(p.daily_return) << '\n';
}

}  // namespace finreport
