#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finreport/date.hpp"
#include "finreport/news_encoding.hpp"

namespace finreport {

struct PriceBar {
    std::string symbol;
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;

    // Throws ValidationError naming the violated field.
    void validate() const;
};

// Firm characteristics. The first four columns are always mktcap, bp, op, inv.
struct StockFactorRow {
    std::string symbol;
    Date date;
    Eigen::VectorXd values;

    double mktcap() const { return values(0); }
    double bp() const { return values(1); }
    double op() const { return values(2); }
    double inv() const { return values(3); }
};

struct FactorTable {
    std::vector<std::string> names;  // mktcap, bp, op, inv, extras...
    std::vector<StockFactorRow> rows;
};

struct NewsRecord {
    std::string symbol;
    Date date;
    std::string headline;
    std::string embedding_id;
    std::optional<NewsFeatureVector> features;
};

struct PanelRow {
    std::string symbol;
    Date date;
    double open = 0.0;
    double close = 0.0;
    std::optional<double> return_1d;   // close_t / close_{t-1} - 1
    std::optional<double> open_next;   // next calendar date's open, if traded
    std::optional<Eigen::VectorXd> factors;
    std::optional<NewsFeatureVector> news;
    std::string headline;

    friend bool operator==(const PanelRow&, const PanelRow&);
};

// Rows sorted by (symbol, date), unique per key.
struct Panel {
    std::vector<std::string> factor_names;
    std::vector<PanelRow> rows;

    std::vector<Date> dates() const;
    std::vector<std::string> symbols() const;
    // Indices into rows, grouped per date in date order; each group sorted by symbol.
    std::vector<std::pair<Date, std::vector<std::size_t>>> cross_sections() const;

    friend bool operator==(const Panel&, const Panel&) = default;
};

using ReturnKey = std::pair<std::string, Date>;

// prices.csv: symbol,date,open,high,low,close,volume. Output sorted by (symbol, date).
std::vector<PriceBar> load_prices(const std::filesystem::path& path);

// factors.csv: symbol,date,mktcap,bp,op,inv[,extra...].
FactorTable load_factors(const std::filesystem::path& path);

// news.jsonl: {"symbol","date","headline","embedding_id"} per line.
std::vector<NewsRecord> load_news(const std::filesystem::path& path);

// Optional per-date risk-free rates: date,rf.
std::map<Date, double> load_risk_free(const std::filesystem::path& path);

// Simple close-to-close returns; the first bar of each symbol has none.
// Symbols with a single bar are skipped with a warning.
std::map<ReturnKey, double> compute_returns(std::span<const PriceBar> bars);

// Sorted union of all dates present in the price data.
std::vector<Date> derive_calendar(std::span<const PriceBar> bars);

// Attaches features to each record: store lookup by embedding_id, otherwise the
// fallback encoder on the headline. Missing ids are reported in one warning.
void resolve_news_features(std::vector<NewsRecord>& news, const EmbeddingStore& store,
                           Eigen::Index role_dim, Eigen::Index edge_dim, std::uint64_t seed);

// One row per (symbol, date) with a price. News dated off-calendar rolls forward to
// the next calendar date; several items on one key are pooled. Factor rows without
// a matching price are dropped and counted in a warning.
Panel align_panel(std::span<const PriceBar> prices, const FactorTable& factors,
                  std::span<const NewsRecord> news, std::span<const Date> calendar);

// JSON-lines; numeric fields round-trip bit-exactly.
void save_panel(const std::filesystem::path& path, const Panel& panel,
                const std::string& config_hash = {});
Panel load_panel(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace finreport
