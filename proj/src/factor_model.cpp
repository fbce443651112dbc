#include "finreport/factor_model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "finreport/csv.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"
#include "finreport/stats.hpp"

namespace finreport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<Tercile> tercile_sort(std::span<const double> values, const Breakpoints& bp, const char* name) {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (*lo_it == *hi_it) {
        warn(std::string("all stocks share one ") + name + " value; dimension assigned to the middle group");
        return std::vector<Tercile>(values.size(), Tercile::middle);
    }
    const double low_cut = stats::quantile(values, bp.low);
    const double high_cut = stats::quantile(values, bp.high);
    std::vector<Tercile> out;
    out.reserve(values.size());
    for (const double v : values)
        out.push_back(v <= low_cut ? Tercile::low : (v > high_cut ? Tercile::high : Tercile::middle));
    return out;
}

}  // namespace

std::vector<GroupAssignment> sort_groups(std::span<const StockFactorRow> cs,
                                         const std::map<std::string, Label>* news_labels,
                                         const Breakpoints& breakpoints) {
    if (cs.size() < 6)
        throw ValidationError("sort_groups needs at least 6 stocks, got " + std::to_string(cs.size()));
    std::vector<double> cap, bp, op, inv;
    for (const auto& row : cs) {
        if (row.values.size() < 4) throw ValidationError("factor row for " + row.symbol + " has fewer than 4 columns");
        cap.push_back(row.mktcap());
        bp.push_back(row.bp());
        op.push_back(row.op());
        inv.push_back(row.inv());
    }
    std::vector<GroupAssignment> out(cs.size());
    const auto [cmin, cmax] = std::minmax_element(cap.begin(), cap.end());
    if (*cmin == *cmax) {
        warn("all stocks share one market cap; size split by symbol order");
        std::vector<std::size_t> order(cs.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cs[a].symbol < cs[b].symbol; });
        for (std::size_t r = 0; r < order.size(); ++r)
            out[order[r]].size = r < (order.size() + 1) / 2 ? SizeGroup::small : SizeGroup::big;
    } else {
        const double median = stats::quantile(cap, breakpoints.size);
        for (std::size_t i = 0; i < cs.size(); ++i) out[i].size = cap[i] <= median ? SizeGroup::small : SizeGroup::big;
    }
    const auto bp_t = tercile_sort(bp, breakpoints, "book-to-price");
    const auto op_t = tercile_sort(op, breakpoints, "profitability");
    const auto inv_t = tercile_sort(inv, breakpoints, "investment");
    for (std::size_t i = 0; i < cs.size(); ++i) {
        out[i].symbol = cs[i].symbol;
        out[i].mktcap = cap[i];
        out[i].bp = bp_t[i];
        out[i].profitability = op_t[i];
        out[i].investment = inv_t[i];
        if (news_labels) {
            const auto it = news_labels->find(cs[i].symbol);
            if (it == news_labels->end() || it->second == Label::neutral)
                out[i].news = Tercile::middle;
            else
                out[i].news = it->second == Label::positive ? Tercile::high : Tercile::low;
        }
    }
    return out;
}

std::array<std::array<double, 3>, 2> PortfolioGrid::imputed() const {
    std::array<std::array<double, 3>, 2> out{};
    auto mean_of = [](auto&& cells) -> std::optional<double> {
        double sum = 0.0;
        int n = 0;
        for (const auto& c : cells)
            if (c) {
                sum += *c;
                ++n;
            }
        if (n == 0) return std::nullopt;
        return sum / n;
    };
    std::vector<std::optional<double>> all;
    for (const auto& row : cell)
        for (const auto& c : row) all.push_back(c);
    const auto grid_mean = mean_of(all);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t t = 0; t < 3; ++t) {
            if (cell[s][t]) {
                out[s][t] = *cell[s][t];
                continue;
            }
            if (auto row = mean_of(cell[s])) {
                out[s][t] = *row;
            } else if (cell[1 - s][t]) {
                out[s][t] = *cell[1 - s][t];
            } else {
                out[s][t] = grid_mean.value_or(0.0);
            }
        }
    }
    return out;
}

bool PortfolioGrid::degenerate() const {
    int occupied = 0;
    for (std::size_t t = 0; t < 3; ++t) occupied += (cell[0][t] || cell[1][t]) ? 1 : 0;
    return occupied <= 1;
}

double PortfolioGrid::small_minus_big() const {
    const auto g = imputed();
    return (g[0][0] + g[0][1] + g[0][2]) / 3.0 - (g[1][0] + g[1][1] + g[1][2]) / 3.0;
}

double PortfolioGrid::high_minus_low() const {
    const auto g = imputed();
    return (g[1][2] + g[0][2]) / 2.0 - (g[1][0] + g[0][0]) / 2.0;
}

std::vector<std::string> FactorReturnsSeries::names() const {
    std::vector<std::string> n{"mkt_excess", "smb", "hml", "rmw", "cma"};
    if (news) n.push_back("news");
    return n;
}

MatrixXd FactorReturnsSeries::design() const {
    MatrixXd x(size(), has_news() ? 6 : 5);
    x.col(0) = mkt_excess;
    x.col(1) = smb;
    x.col(2) = hml;
    x.col(3) = rmw;
    x.col(4) = cma;
    if (news) x.col(5) = *news;
    return x;
}

FactorReturnsSeries FactorReturnsSeries::subset(std::span<const Date> keep) const {
    std::vector<Index> rows;
    for (const auto& d : keep) {
        const auto it = std::lower_bound(dates.begin(), dates.end(), d);
        if (it == dates.end() || *it != d) throw ValidationError("factor series has no date " + d.iso());
        rows.push_back(static_cast<Index>(it - dates.begin()));
    }
    FactorReturnsSeries out;
    out.dates.assign(keep.begin(), keep.end());
    out.mkt_excess = mkt_excess(rows);
    out.smb = smb(rows);
    out.hml = hml(rows);
    out.rmw = rmw(rows);
    out.cma = cma(rows);
    if (news) out.news = VectorXd((*news)(rows));
    out.risk_free = risk_free(rows);
    out.smb_components = smb_components(rows, Eigen::all);
    return out;
}

std::vector<DatedGroups> sort_panel(const Panel& panel, const std::map<ReturnKey, Label>* news_labels,
                                    const Breakpoints& breakpoints) {
    std::vector<DatedGroups> out;
    for (const auto& [date, idx] : panel.cross_sections()) {
        std::vector<StockFactorRow> cs;
        std::map<std::string, Label> labels;
        for (const auto i : idx) {
            const auto& row = panel.rows[i];
            if (!row.factors || !row.return_1d) continue;
            cs.push_back({row.symbol, row.date, *row.factors});
            if (news_labels)
                if (auto it = news_labels->find({row.symbol, date}); it != news_labels->end())
                    labels[row.symbol] = it->second;
        }
        if (cs.size() < 6) continue;
        out.push_back({date, sort_groups(cs, news_labels ? &labels : nullptr, breakpoints)});
    }
    return out;
}

namespace {

FactorReturnsSeries build_factors(const Panel& panel, std::span<const DatedGroups> groups, Weighting weighting,
                                  const std::map<Date, double>& risk_free, bool with_news) {
    std::map<ReturnKey, double> returns;
    for (const auto& row : panel.rows)
        if (row.return_1d) returns[{row.symbol, row.date}] = *row.return_1d;

    const Index T = static_cast<Index>(groups.size());
    FactorReturnsSeries f;
    f.mkt_excess.resize(T);
    f.smb.resize(T);
    f.hml.resize(T);
    f.rmw.resize(T);
    f.cma.resize(T);
    f.risk_free.resize(T);
    if (with_news) f.news = VectorXd(T);
    f.smb_components.resize(T, with_news ? 4 : 3);

    std::size_t degenerate_warnings = 0;
    for (Index t = 0; t < T; ++t) {
        const auto& day = groups[static_cast<std::size_t>(t)];
        if (t > 0 && !(f.dates.back() < day.date)) throw ValidationError("group dates must be strictly increasing");
        f.dates.push_back(day.date);

        // Accumulate weighted sums per (dimension, size, tercile).
        std::array<std::array<std::array<double, 3>, 2>, 4> sum{}, weight{};
        double market_sum = 0.0, market_weight = 0.0;
        for (const auto& g : day.groups) {
            const auto r_it = returns.find({g.symbol, day.date});
            if (r_it == returns.end()) continue;
            const double w = weighting == Weighting::value ? g.mktcap : 1.0;
            const double r = r_it->second;
            market_sum += w * r;
            market_weight += w;
            const auto s = static_cast<std::size_t>(g.size);
            const std::array<std::optional<Tercile>, 4> dims{g.bp, g.profitability, g.investment, g.news};
            for (std::size_t d = 0; d < 4; ++d) {
                if (!dims[d]) continue;
                const auto k = static_cast<std::size_t>(*dims[d]);
                sum[d][s][k] += w * r;
                weight[d][s][k] += w;
            }
        }
        if (market_weight <= 0.0) throw ValidationError("no stock returns on " + day.date.iso());

        std::array<PortfolioGrid, 4> grid;
        for (std::size_t d = 0; d < 4; ++d)
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t k = 0; k < 3; ++k)
                    if (weight[d][s][k] > 0.0) grid[d].cell[s][k] = sum[d][s][k] / weight[d][s][k];
        for (std::size_t d = 0; d < (with_news ? 4u : 3u); ++d)
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t k = 0; k < 3; ++k)
                    if (!grid[d].cell[s][k] && !grid[d].degenerate() && degenerate_warnings++ < 5)
                        warn("empty portfolio on " + day.date.iso() + "; imputed from sibling portfolios");

        const double rf = [&] {
            const auto it = risk_free.find(day.date);
            return it == risk_free.end() ? 0.0 : it->second;
        }();
        f.risk_free(t) = rf;
        f.mkt_excess(t) = market_sum / market_weight - rf;

        const std::size_t n_dims = with_news ? 4 : 3;
        double smb_total = 0.0;
        for (std::size_t d = 0; d < n_dims; ++d) {
            // A one-group dimension carries no long-short information.
            const double component = grid[d].degenerate() ? 0.0 : grid[d].small_minus_big();
            f.smb_components(t, static_cast<Index>(d)) = component;
            smb_total += component;
        }
        f.smb(t) = smb_total / static_cast<double>(n_dims);
        auto long_short = [&](std::size_t d, bool low_minus_high) {
            if (grid[d].degenerate()) return 0.0;
            const double hml = grid[d].high_minus_low();
            return low_minus_high ? -hml : hml;
        };
        f.hml(t) = long_short(0, false);
        f.rmw(t) = long_short(1, false);
        f.cma(t) = long_short(2, true);
        if (with_news) (*f.news)(t) = long_short(3, false);
    }
    return f;
}

}  // namespace

FactorReturnsSeries factor_returns_ff5(const Panel& panel, std::span<const DatedGroups> groups, Weighting weighting,
                                       const std::map<Date, double>& risk_free) {
    return build_factors(panel, groups, weighting, risk_free, false);
}

FactorReturnsSeries factor_returns_ff5news(const Panel& panel, std::span<const DatedGroups> groups,
                                           Weighting weighting, const std::map<Date, double>& risk_free) {
    for (const auto& day : groups)
        for (const auto& g : day.groups)
            if (!g.news) throw ValidationError("FF5-News factors need news groups (" + g.symbol + " on " + day.date.iso() + ")");
    return build_factors(panel, groups, weighting, risk_free, true);
}

double RegressionResult::loading(const std::string& name) const {
    for (std::size_t i = 0; i < factor_names.size(); ++i)
        if (factor_names[i] == name) return loadings(static_cast<Index>(i));
    throw std::out_of_range("no loading named " + name);
}

std::optional<double> RegressionResult::news_loading() const {
    for (std::size_t i = 0; i < factor_names.size(); ++i)
        if (factor_names[i] == "news") return loadings(static_cast<Index>(i));
    return std::nullopt;
}

RegressionResult ols_regress(const VectorXd& y, const MatrixXd& factors, std::span<const std::string> names) {
    const Index T = y.size();
    const Index K = factors.cols();
    if (factors.rows() != T) throw ValidationError("ols_regress: returns and factors differ in length");
    if (static_cast<Index>(names.size()) != K) throw ValidationError("ols_regress: factor names do not match columns");
    if (T <= K + 1)
        throw ValidationError("ols_regress: need more than " + std::to_string(K + 1) + " observations, got " +
                              std::to_string(T));
    MatrixXd x(T, K + 1);
    x.col(0).setOnes();
    x.rightCols(K) = factors;

    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < K + 1) {
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Index j = qr.rank(); j < K + 1; ++j) {
            const Index c = perm(j);
            cols += (cols.empty() ? "" : ", ") + (c == 0 ? std::string("intercept") : names[static_cast<std::size_t>(c - 1)]);
        }
        throw NumericalError("ols_regress: rank-deficient design, collinear columns: " + cols);
    }
    const VectorXd coef = qr.solve(y);
    RegressionResult r;
    r.alpha = coef(0);
    r.loadings = coef.tail(K);
    r.factor_names.assign(names.begin(), names.end());
    r.residuals = y - x * coef;
    const double sst = (y.array() - y.mean()).square().sum();
    r.r_squared = sst > 0.0 ? 1.0 - r.residuals.squaredNorm() / sst : 1.0;
    return r;
}

RegressionResult ols_regress(const VectorXd& y, const FactorReturnsSeries& factors) {
    const auto names = factors.names();
    return ols_regress(y, factors.design(), names);
}

GrsResult grs_test(std::span<const RegressionResult> results, const MatrixXd& factors) {
    const Index N = static_cast<Index>(results.size());
    const Index T = factors.rows();
    const Index K = factors.cols();
    if (N == 0) throw ValidationError("grs_test: no assets");
    if (T <= N + K)
        throw ValidationError("grs_test: need T > N + K (T=" + std::to_string(T) + ", N=" + std::to_string(N) +
                              ", K=" + std::to_string(K) + ")");
    VectorXd alpha(N);
    MatrixXd resid(T, N);
    for (Index i = 0; i < N; ++i) {
        const auto& r = results[static_cast<std::size_t>(i)];
        if (r.residuals.size() != T) throw ValidationError("grs_test: assets do not share a common sample");
        alpha(i) = r.alpha;
        resid.col(i) = r.residuals;
    }
    const MatrixXd sigma = resid.transpose() * resid / static_cast<double>(T);
    const VectorXd mu = factors.colwise().mean().transpose();
    const MatrixXd centered = factors.rowwise() - mu.transpose();
    const MatrixXd omega = centered.transpose() * centered / static_cast<double>(T);

    Eigen::LDLT<MatrixXd> sigma_ldlt(sigma);
    Eigen::FullPivLU<MatrixXd> sigma_lu(sigma);
    if (sigma_ldlt.info() != Eigen::Success || !sigma_lu.isInvertible() || sigma_ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("grs_test: residual covariance is singular; use fewer assets or more dates");
    Eigen::LDLT<MatrixXd> omega_ldlt(omega);
    if (omega_ldlt.info() != Eigen::Success || omega_ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("grs_test: factor covariance is singular");

    const double quad_alpha = alpha.dot(sigma_ldlt.solve(alpha));
    const double quad_mu = mu.dot(omega_ldlt.solve(mu));
    GrsResult g;
    g.T = T;
    g.N = N;
    g.K = K;
    g.statistic = std::max(0.0, static_cast<double>(T - N - K) / static_cast<double>(N) * quad_alpha / (1.0 + quad_mu));
    g.p_value = stats::f_survival(g.statistic, static_cast<double>(N), static_cast<double>(T - N - K));
    g.mean_abs_alpha = alpha.cwiseAbs().mean();
    return g;
}

GrsResult grs_test(std::span<const RegressionResult> results, const FactorReturnsSeries& factors) {
    return grs_test(results, factors.design());
}

AssetReturnPanel excess_returns(const Panel& panel, const FactorReturnsSeries& factors) {
    std::map<ReturnKey, double> returns;
    std::set<std::string> symbols;
    for (const auto& row : panel.rows) {
        symbols.insert(row.symbol);
        if (row.return_1d) returns[{row.symbol, row.date}] = *row.return_1d;
    }
    AssetReturnPanel out;
    out.symbols.assign(symbols.begin(), symbols.end());
    std::vector<Index> rows;
    for (Index t = 0; t < factors.size(); ++t) {
        const Date d = factors.dates[static_cast<std::size_t>(t)];
        const bool complete = std::all_of(out.symbols.begin(), out.symbols.end(),
                                          [&](const std::string& s) { return returns.contains({s, d}); });
        if (complete) rows.push_back(t);
    }
    out.excess.resize(static_cast<Index>(rows.size()), static_cast<Index>(out.symbols.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Index t = rows[k];
        const Date d = factors.dates[static_cast<std::size_t>(t)];
        out.dates.push_back(d);
        for (std::size_t i = 0; i < out.symbols.size(); ++i)
            out.excess(static_cast<Index>(k), static_cast<Index>(i)) = returns.at({out.symbols[i], d}) - factors.risk_free(t);
    }
    return out;
}

std::vector<RegressionResult> regress_all(const AssetReturnPanel& assets, const FactorReturnsSeries& factors) {
    const auto aligned = factors.subset(assets.dates);
    std::vector<RegressionResult> out;
    for (std::size_t i = 0; i < assets.symbols.size(); ++i) {
        auto r = ols_regress(assets.excess.col(static_cast<Index>(i)), aligned);
        r.symbol = assets.symbols[i];
        out.push_back(std::move(r));
    }
    return out;
}

void write_factor_csv(const std::filesystem::path& path, const FactorReturnsSeries& f, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    csv::write_hash_comment(out, config_hash);
    out << "date,mkt_excess,smb,hml,rmw,cma" << (f.has_news() ? ",news" : "") << ",rf\n";
    for (Index t = 0; t < f.size(); ++t) {
        out << f.dates[static_cast<std::size_t>(t)].iso() << ',' << csv::format(f.mkt_excess(t)) << ','
            << csv::format(f.smb(t)) << ',' << csv::format(f.hml(t)) << ',' << csv::format(f.rmw(t)) << ','
            << csv::format(f.cma(t));
        if (f.news) out << ',' << csv::format((*f.news)(t));
        out << ',' << csv::format(f.risk_free(t)) << '\n';
    }
}

FactorReturnsSeries read_factor_csv(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open factor file " + path.string());
    if (config_hash) *config_hash = csv::peek_config_hash(path);
    const auto lines = csv::read_lines(in);
    if (lines.empty()) throw ParseError(path.string(), 1, "missing header");
    const auto header = csv::split(lines[0].second);
    const bool with_news = header.size() == 8;
    const std::vector<std::string_view> expected =
        with_news ? std::vector<std::string_view>{"date", "mkt_excess", "smb", "hml", "rmw", "cma", "news", "rf"}
                  : std::vector<std::string_view>{"date", "mkt_excess", "smb", "hml", "rmw", "cma", "rf"};
    if (header != expected) throw ParseError(path.string(), lines[0].first, "unexpected header");
    const Index T = static_cast<Index>(lines.size() - 1);
    FactorReturnsSeries f;
    MatrixXd cols(T, static_cast<Index>(expected.size() - 1));
    for (Index t = 0; t < T; ++t) {
        const auto& [no, line] = lines[static_cast<std::size_t>(t + 1)];
        const auto fields = csv::split(line);
        if (fields.size() != expected.size()) throw ParseError(path.string(), no, "wrong field count");
        try {
            f.dates.push_back(Date::parse(fields[0]));
            for (std::size_t c = 1; c < fields.size(); ++c) cols(t, static_cast<Index>(c - 1)) = csv::to_double(fields[c]);
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), no, e.what());
        }
    }
    f.mkt_excess = cols.col(0);
    f.smb = cols.col(1);
    f.hml = cols.col(2);
    f.rmw = cols.col(3);
    f.cma = cols.col(4);
    if (with_news) f.news = VectorXd(cols.col(5));
    f.risk_free = cols.col(cols.cols() - 1);
    f.smb_components.resize(T, 0);
    return f;
}

void write_regression_csv(const std::filesystem::path& path, std::span<const RegressionResult> results,
                          const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    csv::write_hash_comment(out, config_hash);
    out << "symbol,alpha";
    if (!results.empty())
        for (const auto& n : results.front().factor_names) out << ',' << n;
    out << ",r_squared\n";
    for (const auto& r : results) {
        out << r.symbol << ',' << csv::format(r.alpha);
        for (Index k = 0; k < r.loadings.size(); ++k) out << ',' << csv::format(r.loadings(k));
        out << ',' << csv::format(r.r_squared) << '\n';
    }
}

std::vector<RegressionResult> read_regression_csv(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open regression file " + path.string());
    if (config_hash) *config_hash = csv::peek_config_hash(path);
    const auto lines = csv::read_lines(in);
    if (lines.empty()) throw ParseError(path.string(), 1, "missing header");
    const auto header = csv::split(lines[0].second);
    if (header.size() < 3 || header.front() != "symbol" || header[1] != "alpha" || header.back() != "r_squared")
        throw ParseError(path.string(), lines[0].first, "unexpected header");
    std::vector<std::string> names(header.begin() + 2, header.end() - 1);
    std::vector<RegressionResult> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = csv::split(lines[i].second);
        if (fields.size() != header.size()) throw ParseError(path.string(), lines[i].first, "wrong field count");
        RegressionResult r;
        try {
            r.symbol = std::string(fields[0]);
            r.alpha = csv::to_double(fields[1]);
            r.factor_names = names;
            r.loadings.resize(static_cast<Index>(names.size()));
            for (std::size_t k = 0; k < names.size(); ++k) r.loadings(static_cast<Index>(k)) = csv::to_double(fields[k + 2]);
            r.r_squared = csv::to_double(fields.back());
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), lines[i].first, e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace finreport
