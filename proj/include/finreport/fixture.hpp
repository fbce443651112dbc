#pragma once

#include <cstdint>
#include <filesystem>

#include "finreport/date.hpp"

namespace finreport {

// Synthetic market with planted news sentiment: each stock's daily open-to-close
// return gets +signal / -signal on days it has positive / negative news.
struct FixtureOptions {
    std::size_t symbols = 20;
    std::size_t days = 520;       // business days
    Date start{2019, 1, 2};
    std::uint64_t seed = 7;
    double news_rate = 0.3;       // chance a stock has news on a given day
    double signal = 0.02;         // planted sentiment effect on the same day's return
    double idio_vol = 0.015;
    double gap_vol = 0.003;       // overnight
    double market_mean = 0.0003;
    double market_vol = 0.01;
    double risk_free = 0.0001;    // daily
    double missing_embedding_rate = 0.05;  // items left to the fallback encoder
};

// Writes prices.csv, factors.csv, news.jsonl, embeddings.jsonl, riskfree.csv and
// a runnable config.json (60/20/20 split, small classifier) into dir.
void generate_fixture(const std::filesystem::path& dir, const FixtureOptions& options = {});

}  // namespace finreport
