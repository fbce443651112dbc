#include "finreport/fixture.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finreport/csv.hpp"
#include "finreport/error.hpp"
#include "finreport/news_encoding.hpp"

namespace finreport {

namespace {

constexpr std::array kPositive = {"beats earnings forecast",  "raises full year guidance", "wins major contract",
                                  "announces record profit",  "expands into new markets",  "receives upgrade from analysts",
                                  "reports strong sales growth", "increases dividend payout"};
constexpr std::array kNegative = {"misses earnings forecast",   "cuts full year guidance",  "loses key contract",
                                  "reports quarterly loss",     "faces regulatory probe",   "receives downgrade from analysts",
                                  "recalls defective products", "suspends dividend payout"};
constexpr std::array kNeutral = {"schedules annual meeting",   "appoints board secretary", "publishes routine filing",
                                 "holds investor conference",  "updates company address",   "confirms meeting agenda"};

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

std::string symbol_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "SYM%02zu", i);
    return buf;
}

}  // namespace

void generate_fixture(const std::filesystem::path& dir, const FixtureOptions& o) {
    if (o.symbols < 6) throw ValidationError("fixture needs at least 6 symbols");
    if (o.days < 10) throw ValidationError("fixture needs at least 10 days");
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<Date> dates;
    for (Date d = o.start; dates.size() < o.days; d = d.next_day())
        if (d.is_weekday()) dates.push_back(d);

    struct Stock {
        std::string symbol;
        double beta, tone, shares, bp, op, inv, price, log_var;
    };
    std::vector<Stock> stocks;
    for (std::size_t i = 0; i < o.symbols; ++i) {
        Stock s;
        s.symbol = symbol_name(i);
        s.beta = 0.5 + uniform(rng);
        s.tone = 2.0 * uniform(rng) - 1.0;  // lean of the news flow, persistent per stock
        s.shares = std::exp(16.0 + 1.5 * normal(rng));
        s.bp = std::exp(-0.7 + 0.5 * normal(rng));
        s.op = 0.1 + 0.08 * normal(rng);
        s.inv = 0.05 + 0.1 * normal(rng);
        s.price = 10.0 + 40.0 * uniform(rng);
        s.log_var = std::log(o.idio_vol * o.idio_vol);
        stocks.push_back(s);
    }

    auto prices = open_out(dir / "prices.csv");
    auto factors = open_out(dir / "factors.csv");
    auto news = open_out(dir / "news.jsonl");
    prices << "symbol,date,open,high,low,close,volume\n";
    factors << "symbol,date,mktcap,bp,op,inv\n";

    // Draw day by day so every stock shares the market shock, then write per symbol.
    struct Bar {
        double open, high, low, close, volume;
    };
    std::vector<std::vector<Bar>> bars(o.symbols, std::vector<Bar>(dates.size()));
    std::vector<std::vector<std::array<double, 4>>> chars(o.symbols, std::vector<std::array<double, 4>>(dates.size()));
    EmbeddingStore store;
    std::vector<std::string> news_lines;
    std::size_t news_id = 0;

    for (std::size_t t = 0; t < dates.size(); ++t) {
        const double market = o.market_mean + o.market_vol * normal(rng);
        for (std::size_t i = 0; i < o.symbols; ++i) {
            auto& s = stocks[i];
            double sentiment = 0.0;
            if (uniform(rng) < o.news_rate) {
                // P(positive) rises with tone; a third of items are neutral on average.
                const double u = uniform(rng);
                const double p_pos = (1.0 + s.tone) / 3.0;
                const double p_neg = (1.0 - s.tone) / 3.0;
                const char* phrase;
                if (u < p_pos) {
                    sentiment = 1.0;
                    phrase = kPositive[rng() % kPositive.size()];
                } else if (u < p_pos + p_neg) {
                    sentiment = -1.0;
                    phrase = kNegative[rng() % kNegative.size()];
                } else {
                    phrase = kNeutral[rng() % kNeutral.size()];
                }
                const std::string headline = s.symbol + " " + phrase;
                char id[24];
                std::snprintf(id, sizeof id, "n%06zu", news_id++);
                nlohmann::json rec = {{"symbol", s.symbol}, {"date", dates[t].iso()}, {"headline", headline}, {"embedding_id", id}};
                news_lines.push_back(rec.dump());
                if (uniform(rng) >= o.missing_embedding_rate)
                    store.emplace(id, fallback_hash_encoder(headline, 16, 8, o.seed));
            }
            const double open = s.price * (1.0 + o.gap_vol * normal(rng));
            // Idiosyncratic volatility clusters: ln s2 = w + 0.1 (|z| - E|z|) + 0.95 ln s2_prev + 0.02 z^2,
            // with w putting the stationary level at idio_vol^2.
            const double z = normal(rng);
            const double sigma = std::exp(0.5 * s.log_var);
            s.log_var = 0.05 * std::log(o.idio_vol * o.idio_vol) - 0.02 +
                        0.1 * (std::abs(z) - std::sqrt(2.0 / 3.14159265358979323846)) + 0.95 * s.log_var + 0.02 * z * z;
            const double intraday = s.beta * market + sigma * z + o.signal * sentiment;
            const double close = open * (1.0 + intraday);
            const double wick = std::abs(0.004 * normal(rng));
            Bar& b = bars[i][t];
            b.open = open;
            b.close = close;
            b.high = std::max(open, close) * (1.0 + wick);
            b.low = std::min(open, close) * (1.0 - wick);
            b.volume = std::round(1e5 * (1.0 + uniform(rng)));
            s.price = close;
            s.bp *= std::exp(0.01 * normal(rng));
            s.op += 0.002 * normal(rng);
            s.inv += 0.002 * normal(rng);
            chars[i][t] = {s.shares * close, s.bp, s.op, s.inv};
        }
    }

    for (std::size_t i = 0; i < o.symbols; ++i) {
        for (std::size_t t = 0; t < dates.size(); ++t) {
            const Bar& b = bars[i][t];
            const std::string key = stocks[i].symbol + "," + dates[t].iso();
            prices << key << ',' << csv::format(b.open) << ',' << csv::format(b.high) << ',' << csv::format(b.low)
                   << ',' << csv::format(b.close) << ',' << csv::format(b.volume) << '\n';
            const auto& c = chars[i][t];
            factors << key << ',' << csv::format(c[0]) << ',' << csv::format(c[1]) << ',' << csv::format(c[2]) << ','
                    << csv::format(c[3]) << '\n';
        }
    }
    for (const auto& line : news_lines) news << line << '\n';
    save_embeddings(dir / "embeddings.jsonl", store);

    auto rf = open_out(dir / "riskfree.csv");
    rf << "date,rf\n";
    for (const auto& d : dates) rf << d.iso() << ',' << csv::format(o.risk_free) << '\n';

    const auto split_at = [&](double frac) { return dates[static_cast<std::size_t>(frac * (dates.size() - 1))]; };
    const nlohmann::json config = {
        {"data",
         {{"prices", "prices.csv"},
          {"factors", "factors.csv"},
          {"news", "news.jsonl"},
          {"embeddings", "embeddings.jsonl"},
          {"risk_free", "riskfree.csv"}}},
        {"output_dir", "runs"},
        {"split",
         {{"train_end", split_at(0.6).iso()}, {"validation_end", split_at(0.8).iso()}, {"test_end", dates.back().iso()}}},
        {"seed", o.seed},
        {"news", {{"role_dim", 16}, {"edge_dim", 8}, {"encoder_seed", o.seed}}},
        {"classifier",
         {{"hidden_dim", 32}, {"epochs", 40}, {"batch_size", 32}, {"learning_rate", 0.05}, {"optimizer", "momentum"}}},
        {"risk", {{"p", 1}, {"q", 1}, {"confidence", 0.95}, {"window", 60}}},
        {"backtest", {{"cost", 0.001}}},
        {"report", {{"max_reports", 10}}},
    };
    auto cfg = open_out(dir / "config.json");
    cfg << config.dump(2) << '\n';
}

}  // namespace finreport
