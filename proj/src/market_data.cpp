#include "finreport/market_data.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "finreport/csv.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"

namespace finreport {

using Eigen::Index;
using Eigen::VectorXd;

void PriceBar::validate() const {
    auto fail = [&](const std::string& what) {
        throw ValidationError(symbol + " " + date.iso() + ": " + what);
    };
    if (!(open > 0.0)) fail("open <= 0");
    if (!(high > 0.0)) fail("high <= 0");
    if (!(low > 0.0)) fail("low <= 0");
    if (!(close > 0.0)) fail("close <= 0");
    if (high < low) fail("high < low");
    if (low > std::min(open, close)) fail("low > min(open, close)");
    if (high < std::max(open, close)) fail("high < max(open, close)");
    if (volume < 0.0) fail("volume < 0");
}

bool operator==(const PanelRow& a, const PanelRow& b) {
    return a.symbol == b.symbol && a.date == b.date && a.open == b.open && a.close == b.close &&
           a.return_1d == b.return_1d && a.open_next == b.open_next && a.factors == b.factors &&
           a.news == b.news && a.headline == b.headline;
}

std::vector<Date> Panel::dates() const {
    std::set<Date> all;
    for (const auto& r : rows) all.insert(r.date);
    return {all.begin(), all.end()};
}

std::vector<std::string> Panel::symbols() const {
    std::set<std::string> all;
    for (const auto& r : rows) all.insert(r.symbol);
    return {all.begin(), all.end()};
}

std::vector<std::pair<Date, std::vector<std::size_t>>> Panel::cross_sections() const {
    std::map<Date, std::vector<std::size_t>> by_date;
    for (std::size_t i = 0; i < rows.size(); ++i) by_date[rows[i].date].push_back(i);
    std::vector<std::pair<Date, std::vector<std::size_t>>> out;
    for (auto& [date, idx] : by_date) {
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return rows[a].symbol < rows[b].symbol; });
        out.emplace_back(date, std::move(idx));
    }
    return out;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(std::string("cannot open ") + what + " file " + path.string());
    return in;
}

void expect_header(const std::filesystem::path& path, std::size_t line_no, std::string_view line,
                   std::span<const std::string_view> required, bool allow_extra) {
    const auto fields = csv::split(line);
    const bool ok = allow_extra ? fields.size() >= required.size() : fields.size() == required.size();
    if (!ok || !std::equal(required.begin(), required.end(), fields.begin()))
        throw ParseError(path.string(), line_no, "unexpected header '" + std::string(line) + "'");
}

}  // namespace

std::vector<PriceBar> load_prices(const std::filesystem::path& path) {
    auto in = open_input(path, "prices");
    const auto lines = csv::read_lines(in);
    std::vector<PriceBar> bars;
    if (lines.empty()) throw ParseError(path.string(), 1, "missing header");
    static constexpr std::string_view header[] = {"symbol", "date", "open", "high",
                                                  "low",    "close", "volume"};
    expect_header(path, lines[0].first, lines[0].second, header, false);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [no, line] = lines[i];
        const auto f = csv::split(line);
        if (f.size() != 7) throw ParseError(path.string(), no, "expected 7 fields");
        PriceBar bar;
        try {
            bar.symbol = std::string(f[0]);
            bar.date = Date::parse(f[1]);
            bar.open = csv::to_double(f[2]);
            bar.high = csv::to_double(f[3]);
            bar.low = csv::to_double(f[4]);
            bar.close = csv::to_double(f[5]);
            bar.volume = csv::to_double(f[6]);
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), no, e.what());
        }
        if (bar.symbol.empty()) throw ParseError(path.string(), no, "empty symbol");
        try {
            bar.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(no) + ": " + e.what());
        }
        bars.push_back(std::move(bar));
    }
    std::sort(bars.begin(), bars.end(), [](const PriceBar& a, const PriceBar& b) {
        return std::tie(a.symbol, a.date) < std::tie(b.symbol, b.date);
    });
    for (std::size_t i = 1; i < bars.size(); ++i)
        if (bars[i].symbol == bars[i - 1].symbol && bars[i].date == bars[i - 1].date)
            throw ValidationError("duplicate price bar for " + bars[i].symbol + " " + bars[i].date.iso());
    return bars;
}

FactorTable load_factors(const std::filesystem::path& path) {
    auto in = open_input(path, "factors");
    const auto lines = csv::read_lines(in);
    if (lines.empty()) throw ParseError(path.string(), 1, "missing header");
    static constexpr std::string_view header[] = {"symbol", "date", "mktcap", "bp", "op", "inv"};
    expect_header(path, lines[0].first, lines[0].second, header, true);
    FactorTable table;
    for (const auto f : csv::split(lines[0].second)) table.names.emplace_back(f);
    table.names.erase(table.names.begin(), table.names.begin() + 2);
    const std::size_t width = table.names.size() + 2;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [no, line] = lines[i];
        const auto f = csv::split(line);
        if (f.size() != width)
            throw ParseError(path.string(), no, "expected " + std::to_string(width) + " fields");
        StockFactorRow row;
        try {
            row.symbol = std::string(f[0]);
            row.date = Date::parse(f[1]);
            row.values.resize(static_cast<Index>(width - 2));
            for (std::size_t c = 2; c < width; ++c) row.values(static_cast<Index>(c - 2)) = csv::to_double(f[c]);
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), no, e.what());
        }
        if (!(row.mktcap() > 0.0))
            throw ValidationError(path.string() + ":" + std::to_string(no) + ": mktcap <= 0");
        table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.symbol, a.date) < std::tie(b.symbol, b.date);
    });
    return table;
}

std::vector<NewsRecord> load_news(const std::filesystem::path& path) {
    auto in = open_input(path, "news");
    std::vector<NewsRecord> news;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            NewsRecord r;
            r.symbol = j.at("symbol").get<std::string>();
            r.date = Date::parse(j.at("date").get<std::string>());
            if (j.contains("headline") && !j["headline"].is_null()) r.headline = j["headline"].get<std::string>();
            if (j.contains("embedding_id") && !j["embedding_id"].is_null())
                r.embedding_id = j["embedding_id"].get<std::string>();
            news.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), no, e.what());
        }
    }
    return news;
}

std::map<Date, double> load_risk_free(const std::filesystem::path& path) {
    auto in = open_input(path, "risk-free");
    const auto lines = csv::read_lines(in);
    if (lines.empty()) throw ParseError(path.string(), 1, "missing header");
    static constexpr std::string_view header[] = {"date", "rf"};
    expect_header(path, lines[0].first, lines[0].second, header, false);
    std::map<Date, double> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i].second);
        if (f.size() != 2) throw ParseError(path.string(), lines[i].first, "expected 2 fields");
        try {
            out[Date::parse(f[0])] = csv::to_double(f[1]);
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), lines[i].first, e.what());
        }
    }
    return out;
}

std::map<ReturnKey, double> compute_returns(std::span<const PriceBar> bars) {
    std::map<std::string, std::vector<const PriceBar*>> by_symbol;
    for (const auto& b : bars) by_symbol[b.symbol].push_back(&b);
    std::map<ReturnKey, double> out;
    for (auto& [symbol, series] : by_symbol) {
        if (series.size() < 2) {
            warn("symbol " + symbol + " has a single bar; no returns computed");
            continue;
        }
        std::sort(series.begin(), series.end(), [](auto* a, auto* b) { return a->date < b->date; });
        for (std::size_t t = 1; t < series.size(); ++t)
            out[{symbol, series[t]->date}] = (series[t]->close - series[t - 1]->close) / series[t - 1]->close;
    }
    return out;
}

std::vector<Date> derive_calendar(std::span<const PriceBar> bars) {
    std::set<Date> dates;
    for (const auto& b : bars) dates.insert(b.date);
    return {dates.begin(), dates.end()};
}

void resolve_news_features(std::vector<NewsRecord>& news, const EmbeddingStore& store,
                           Index role_dim, Index edge_dim, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& n : news) ids.push_back(n.embedding_id);
    missing_embedding_ids(store, ids);
    for (auto& n : news) {
        if (n.features) continue;
        const auto it = n.embedding_id.empty() ? store.end() : store.find(n.embedding_id);
        if (it != store.end()) {
            if (it->second.role_dim() != role_dim || it->second.edge_dim() != edge_dim)
                throw ValidationError("embedding " + n.embedding_id + " has dimensions (" +
                                      std::to_string(it->second.role_dim()) + ", " +
                                      std::to_string(it->second.edge_dim()) + ")");
            n.features = it->second;
        } else {
            n.features = fallback_hash_encoder(n.headline, role_dim, edge_dim, seed);
        }
    }
}

Panel align_panel(std::span<const PriceBar> prices, const FactorTable& factors,
                  std::span<const NewsRecord> news, std::span<const Date> calendar) {
    Panel panel;
    panel.factor_names = factors.names;
    const auto returns = compute_returns(prices);

    std::map<ReturnKey, const PriceBar*> bar_at;
    for (const auto& b : prices) bar_at[{b.symbol, b.date}] = &b;

    std::map<ReturnKey, const StockFactorRow*> factor_at;
    std::size_t dropped_factors = 0;
    for (const auto& f : factors.rows) {
        if (bar_at.contains({f.symbol, f.date}))
            factor_at[{f.symbol, f.date}] = &f;
        else
            ++dropped_factors;
    }
    if (dropped_factors > 0)
        warn(std::to_string(dropped_factors) + " factor rows without a matching price dropped");

    std::map<ReturnKey, std::vector<const NewsRecord*>> news_at;
    std::size_t dropped_news = 0;
    for (const auto& n : news) {
        const auto it = std::lower_bound(calendar.begin(), calendar.end(), n.date);
        if (it == calendar.end() || !bar_at.contains({n.symbol, *it})) {
            ++dropped_news;
            continue;
        }
        news_at[{n.symbol, *it}].push_back(&n);
    }
    if (dropped_news > 0)
        warn(std::to_string(dropped_news) + " news records with no tradable calendar date dropped");

    for (const auto& bar : prices) {
        PanelRow row;
        row.symbol = bar.symbol;
        row.date = bar.date;
        row.open = bar.open;
        row.close = bar.close;
        if (auto it = returns.find({bar.symbol, bar.date}); it != returns.end()) row.return_1d = it->second;
        const auto cal = std::upper_bound(calendar.begin(), calendar.end(), bar.date);
        if (cal != calendar.end())
            if (auto it = bar_at.find({bar.symbol, *cal}); it != bar_at.end()) row.open_next = it->second->open;
        if (auto it = factor_at.find({bar.symbol, bar.date}); it != factor_at.end())
            row.factors = it->second->values;
        if (auto it = news_at.find({bar.symbol, bar.date}); it != news_at.end()) {
            std::vector<NewsFeatureVector> items;
            for (const auto* n : it->second) {
                if (!row.headline.empty() && !n->headline.empty()) row.headline += " | ";
                row.headline += n->headline;
                if (n->features) items.push_back(*n->features);
            }
            if (!items.empty()) row.news = pool_news(items);
        }
        panel.rows.push_back(std::move(row));
    }
    std::sort(panel.rows.begin(), panel.rows.end(), [](const PanelRow& a, const PanelRow& b) {
        return std::tie(a.symbol, a.date) < std::tie(b.symbol, b.date);
    });
    return panel;
}

namespace {

nlohmann::json vector_json(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd json_vector(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

void save_panel(const std::filesystem::path& path, const Panel& panel, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write panel " + path.string());
    nlohmann::json header{{"format", "finreport-panel"},
                          {"version", 1},
                          {"factor_names", panel.factor_names},
                          {"config_hash", config_hash},
                          {"rows", panel.rows.size()}};
    out << header.dump() << '\n';
    for (const auto& r : panel.rows) {
        nlohmann::json j{{"symbol", r.symbol}, {"date", r.date.iso()}, {"open", r.open}, {"close", r.close}};
        j["return_1d"] = r.return_1d ? nlohmann::json(*r.return_1d) : nlohmann::json(nullptr);
        j["open_next"] = r.open_next ? nlohmann::json(*r.open_next) : nlohmann::json(nullptr);
        j["factors"] = r.factors ? vector_json(*r.factors) : nlohmann::json(nullptr);
        j["headline"] = r.headline;
        if (r.news)
            j["news"] = {{"d", r.news->role_dim()}, {"d_e", r.news->edge_dim()}, {"x", vector_json(r.news->flatten())}};
        else
            j["news"] = nullptr;
        out << j.dump() << '\n';
    }
}

Panel load_panel(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open panel " + path.string());
    std::string line;
    std::size_t no = 1;
    Panel panel;
    std::size_t expected_rows = 0;
    try {
        if (!std::getline(in, line)) throw ValidationError("empty panel file");
        const auto header = nlohmann::json::parse(line);
        if (header.at("format") != "finreport-panel") throw ValidationError("not a panel file");
        panel.factor_names = header.at("factor_names").get<std::vector<std::string>>();
        expected_rows = header.at("rows").get<std::size_t>();
        if (config_hash) *config_hash = header.at("config_hash").get<std::string>();
        while (std::getline(in, line)) {
            ++no;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            PanelRow r;
            r.symbol = j.at("symbol").get<std::string>();
            r.date = Date::parse(j.at("date").get<std::string>());
            r.open = j.at("open").get<double>();
            r.close = j.at("close").get<double>();
            if (!j.at("return_1d").is_null()) r.return_1d = j["return_1d"].get<double>();
            if (!j.at("open_next").is_null()) r.open_next = j["open_next"].get<double>();
            if (!j.at("factors").is_null()) r.factors = json_vector(j["factors"]);
            r.headline = j.at("headline").get<std::string>();
            if (const auto& n = j.at("news"); !n.is_null())
                r.news = NewsFeatureVector::from_flat(json_vector(n.at("x")), n.at("d").get<Index>(),
                                                      n.at("d_e").get<Index>());
            panel.rows.push_back(std::move(r));
        }
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(path.string(), no, e.what());
    }
    if (panel.rows.size() != expected_rows)
        throw ValidationError("panel " + path.string() + " is truncated");
    return panel;
}

}  // namespace finreport
