#include <random>

#include <boost/math/distributions/fisher_f.hpp>
#include <gtest/gtest.h>

#include "factor_fixture.hpp"
#include "finreport/diagnostics.hpp"
#include "finreport/error.hpp"
#include "finreport/factor_model.hpp"
#include "test_util.hpp"

using namespace finreport;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<StockFactorRow> cross_section(const std::vector<double>& cap, const std::vector<double>& bp,
                                          const std::vector<double>& op, const std::vector<double>& inv) {
    std::vector<StockFactorRow> cs;
    for (std::size_t i = 0; i < cap.size(); ++i)
        cs.push_back({"S" + std::to_string(10 + i), Date{2024, 1, 2}, Eigen::Vector4d(cap[i], bp[i], op[i], inv[i])});
    return cs;
}

std::vector<double> iota(int n, double start = 1.0) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(start + i);
    return v;
}

PortfolioGrid grid(double sl, double sn, double sh, double bl, double bn, double bh) {
    PortfolioGrid g;
    g.cell[0] = {sl, sn, sh};
    g.cell[1] = {bl, bn, bh};
    return g;
}

// Direct textbook GRS, independent of the library's factorisations.
double grs_oracle(const VectorXd& alpha, const MatrixXd& resid, const MatrixXd& f) {
    const double T = static_cast<double>(f.rows()), N = static_cast<double>(alpha.size()), K = static_cast<double>(f.cols());
    const MatrixXd sigma = resid.transpose() * resid / T;
    const VectorXd mu = f.colwise().mean();
    const MatrixXd c = f.rowwise() - mu.transpose();
    const MatrixXd omega = c.transpose() * c / T;
    return (T - N - K) / N * (alpha.transpose() * sigma.inverse() * alpha)(0) /
           (1.0 + (mu.transpose() * omega.inverse() * mu)(0));
}

}  // namespace

TEST(SortGroups, MedianSizeSplit) {
    const auto g = sort_groups(cross_section(iota(6), iota(6), iota(6), iota(6)));
    for (int i = 0; i < 6; ++i) EXPECT_EQ(g[i].size, i < 3 ? SizeGroup::small : SizeGroup::big) << i;
}

TEST(SortGroups, ThirtySeventyBreakpoints) {
    const auto g = sort_groups(cross_section(iota(10), iota(10), iota(10), iota(10)));
    for (int i = 0; i < 10; ++i) {
        const Tercile expected = i < 3 ? Tercile::low : (i < 7 ? Tercile::middle : Tercile::high);
        EXPECT_EQ(g[i].bp, expected) << i;
        EXPECT_EQ(g[i].profitability, expected) << i;
        EXPECT_EQ(g[i].investment, expected) << i;
    }
}

TEST(SortGroups, IdenticalValuesGoToMiddle) {
    WarningCapture capture;
    const auto g = sort_groups(cross_section(iota(8), iota(8), std::vector<double>(8, 0.1), iota(8)));
    for (const auto& a : g) EXPECT_EQ(a.profitability, Tercile::middle);
    EXPECT_TRUE(capture.contains("profitability"));
}

TEST(SortGroups, NewsFromLabels) {
    const auto cs = cross_section(iota(6), iota(6), iota(6), iota(6));
    const std::map<std::string, Label> labels{{"S10", Label::positive}, {"S11", Label::negative}, {"S12", Label::neutral}};
    const auto g = sort_groups(cs, &labels);
    EXPECT_EQ(g[0].news, Tercile::high);
    EXPECT_EQ(g[1].news, Tercile::low);
    EXPECT_EQ(g[2].news, Tercile::middle);
    EXPECT_EQ(g[3].news, Tercile::middle);  // no news
    EXPECT_FALSE(sort_groups(cs)[0].news.has_value());
}

TEST(SortGroups, TooFewStocks) {
    EXPECT_THROW(sort_groups(cross_section(iota(5), iota(5), iota(5), iota(5))), ValidationError);
}

TEST(PortfolioGrid, SpreadFormulas) {
    EXPECT_NEAR(grid(0.02, 0.02, 0.02, 0.01, 0.01, 0.01).small_minus_big(), 0.01, 1e-15);
    EXPECT_NEAR(grid(0.01, 0.0, 0.03, 0.01, 0.0, 0.03).high_minus_low(), 0.02, 1e-15);
    // News: P is the high column, N the low one.
    EXPECT_NEAR(grid(0.01, 0.5, 0.03, 0.01, -0.5, 0.03).high_minus_low(), 0.02, 1e-15);
    const auto flat = grid(0.004, 0.004, 0.004, 0.004, 0.004, 0.004);
    EXPECT_EQ(flat.small_minus_big(), 0.0);
    EXPECT_EQ(flat.high_minus_low(), 0.0);
}

TEST(PortfolioGrid, ImputationOrder) {
    PortfolioGrid g;
    g.cell[0] = {0.01, std::nullopt, 0.03};
    g.cell[1] = {std::nullopt, std::nullopt, std::nullopt};
    const auto v = g.imputed();
    EXPECT_DOUBLE_EQ(v[0][1], 0.02);  // same size row
    EXPECT_DOUBLE_EQ(v[1][0], 0.01);  // same tercile, other row
    EXPECT_DOUBLE_EQ(v[1][1], 0.02);  // grid mean
    EXPECT_FALSE(g.degenerate());

    PortfolioGrid one;
    one.cell[0][1] = 0.05;
    one.cell[1][1] = 0.01;
    EXPECT_TRUE(one.degenerate());
}

TEST(FactorReturns, HandFixtureMatchesSpreadFormulas) {
    const auto fx = testkit::make_hand_fixture();
    const auto plain = sort_panel(fx.panel);
    const auto with_news = sort_panel(fx.panel, &fx.labels);
    const auto ff5 = factor_returns_ff5(fx.panel, plain);
    const auto ff5n = factor_returns_ff5news(fx.panel, with_news);
    ASSERT_EQ(ff5n.size(), 3);
    for (Eigen::Index t = 0; t < 3; ++t) {
        const auto& h = fx.expected[static_cast<std::size_t>(t)];
        EXPECT_NEAR(ff5n.smb(t), h.smb, 1e-12);
        EXPECT_NEAR(ff5n.hml(t), h.hml, 1e-12);
        EXPECT_NEAR(ff5n.rmw(t), h.rmw, 1e-12);
        EXPECT_NEAR(ff5n.cma(t), h.cma, 1e-12);
        EXPECT_NEAR((*ff5n.news)(t), h.news, 1e-12);
        EXPECT_NEAR(ff5n.mkt_excess(t), h.mkt, 1e-12);
        EXPECT_NEAR(ff5.smb(t), (h.smb_bp + h.smb_op + h.smb_inv) / 3.0, 1e-12);
        // The news dimension leaves the other components untouched.
        EXPECT_EQ(ff5.smb_components.row(t), ff5n.smb_components.row(t).head(3));
        EXPECT_EQ(ff5.hml(t), ff5n.hml(t));
    }
}

TEST(FactorReturns, IdenticalNewsLabelsDegenerate) {
    auto fx = testkit::make_hand_fixture();
    for (auto& [key, label] : fx.labels) label = Label::positive;
    for (const auto& row : fx.panel.rows) fx.labels[{row.symbol, row.date}] = Label::positive;
    const auto f = factor_returns_ff5news(fx.panel, sort_panel(fx.panel, &fx.labels));
    for (Eigen::Index t = 0; t < f.size(); ++t) {
        EXPECT_EQ(f.smb_components(t, 3), 0.0);
        EXPECT_EQ((*f.news)(t), 0.0);
    }
}

TEST(FactorReturns, EqualReturnsGiveZeroFactors) {
    auto fx = testkit::make_hand_fixture();
    for (auto& row : fx.panel.rows) row.return_1d = 0.013;
    const auto f = factor_returns_ff5news(fx.panel, sort_panel(fx.panel, &fx.labels));
    EXPECT_TRUE(f.smb.isZero(1e-15));
    EXPECT_TRUE(f.hml.isZero(1e-15));
    EXPECT_TRUE(f.rmw.isZero(1e-15));
    EXPECT_TRUE(f.cma.isZero(1e-15));
    EXPECT_TRUE(f.news->isZero(1e-15));
}

TEST(FactorReturns, RiskFreeAndCsvRoundTrip) {
    testkit::TempDir dir;
    const auto fx = testkit::make_hand_fixture();
    const std::map<Date, double> rf{{Date{2024, 3, 5}, 0.0002}};
    const auto f = factor_returns_ff5news(fx.panel, sort_panel(fx.panel, &fx.labels), Weighting::equal, rf);
    EXPECT_NEAR(f.mkt_excess(1), fx.expected[1].mkt - 0.0002, 1e-15);
    EXPECT_EQ(f.risk_free(0), 0.0);
    write_factor_csv(dir / "f.csv", f, "cafe");
    std::string hash;
    const auto back = read_factor_csv(dir / "f.csv", &hash);
    EXPECT_EQ(hash, "cafe");
    EXPECT_EQ(back.dates, f.dates);
    EXPECT_EQ(back.design(), f.design());
    EXPECT_EQ(back.risk_free, f.risk_free);
    EXPECT_EQ(back.names(), (std::vector<std::string>{"mkt_excess", "smb", "hml", "rmw", "cma", "news"}));
}

TEST(Ols, ExactLinearFit) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.01);
    MatrixXd f = MatrixXd::Zero(200, 5);
    for (Eigen::Index t = 0; t < 200; ++t) f(t, 0) = n(rng);
    // Other factors zero makes the design singular; give them independent noise
    // but no weight in y so their loadings must come out as 0.
    for (Eigen::Index t = 0; t < 200; ++t)
        for (int k = 1; k < 5; ++k) f(t, k) = n(rng);
    const VectorXd y = (0.002 + 1.5 * f.col(0).array()).matrix();
    const std::vector<std::string> names{"mkt_excess", "smb", "hml", "rmw", "cma"};
    const auto r = ols_regress(y, f, names);
    EXPECT_NEAR(r.alpha, 0.002, 1e-10);
    EXPECT_NEAR(r.loadings(0), 1.5, 1e-10);
    EXPECT_LT(r.loadings.tail(4).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(r.residuals.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ols, NoisyRecoveryAndOrthogonality) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.01), e(0.0, 0.001);
    const Eigen::Index T = 1000;
    MatrixXd f(T, 6);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = n(rng);
    const VectorXd b = (VectorXd(6) << 1.1, 0.4, -0.3, 0.2, 0.5, 0.8).finished();
    VectorXd y = f * b;
    for (auto& v : y) v += 0.0005 + e(rng);
    const std::vector<std::string> names{"mkt_excess", "smb", "hml", "rmw", "cma", "news"};
    const auto r = ols_regress(y, f, names);
    EXPECT_LT((r.loadings - b).cwiseAbs().maxCoeff(), 0.02);
    EXPECT_LT(std::abs(r.residuals.mean()), 1e-10);
    for (Eigen::Index k = 0; k < 6; ++k)
        EXPECT_LT(std::abs(r.residuals.dot(f.col(k))) / (r.residuals.norm() * f.col(k).norm()), 1e-8);
    EXPECT_EQ(*r.news_loading(), r.loading("news"));

    // Scaling returns and factors together scales alpha, keeps betas.
    const auto scaled = ols_regress(3.0 * y, 3.0 * f, names);
    EXPECT_NEAR(scaled.alpha, 3.0 * r.alpha, 1e-12);
    EXPECT_TRUE(scaled.loadings.isApprox(r.loadings, 1e-10));
}

TEST(Ols, CollinearColumnsNamed) {
    MatrixXd f = MatrixXd::Random(50, 3);
    f.col(2) = f.col(1);
    const std::vector<std::string> names{"mkt_excess", "smb", "smb_copy"};
    try {
        ols_regress(VectorXd::Random(50), f, names);
        FAIL();
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        EXPECT_TRUE(msg.find("smb") != std::string::npos) << msg;
    }
    MatrixXd c = MatrixXd::Random(50, 2);
    c.col(1).setConstant(0.01);  // collinear with the intercept
    EXPECT_THROW(ols_regress(VectorXd::Random(50), c, std::vector<std::string>{"a", "b"}), NumericalError);
}

TEST(Grs, MatchesOracleAndBoostPValue) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.01);
    const Eigen::Index T = 120, N = 4, K = 3;
    MatrixXd f(T, K);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = n(rng) + 0.001;
    std::vector<RegressionResult> results;
    const std::vector<std::string> names{"a", "b", "c"};
    for (Eigen::Index i = 0; i < N; ++i) {
        VectorXd y = f * VectorXd::Random(K);
        for (auto& v : y) v += 0.002 * (i - 1.5) / 1.5 + n(rng);
        results.push_back(ols_regress(y, f, names));
    }
    VectorXd alpha(N);
    MatrixXd resid(T, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        alpha(i) = results[i].alpha;
        resid.col(i) = results[i].residuals;
    }
    const auto g = grs_test(results, f);
    EXPECT_NEAR(g.statistic, grs_oracle(alpha, resid, f), 1e-10 * g.statistic);
    const boost::math::fisher_f dist(static_cast<double>(N), static_cast<double>(T - N - K));
    EXPECT_NEAR(g.p_value, boost::math::cdf(boost::math::complement(dist, g.statistic)), 1e-12);
    EXPECT_NEAR(g.mean_abs_alpha, alpha.cwiseAbs().mean(), 1e-18);

    std::reverse(results.begin(), results.end());
    EXPECT_NEAR(grs_test(results, f).statistic, g.statistic, 1e-12 * g.statistic);

    for (auto& r : results) r.alpha = 0.0;
    const auto zero = grs_test(results, f);
    EXPECT_EQ(zero.statistic, 0.0);
    EXPECT_EQ(zero.p_value, 1.0);
}

TEST(Grs, NeedsEnoughDates) {
    const MatrixXd f = MatrixXd::Random(8, 5);
    std::vector<RegressionResult> results(4);
    for (auto& r : results) r.residuals = VectorXd::Random(8);
    EXPECT_THROW(grs_test(results, f), ValidationError);
}

TEST(Regression, CsvRoundTrip) {
    testkit::TempDir dir;
    RegressionResult r;
    r.symbol = "AAA";
    r.alpha = 0.1 + 0.2;
    r.factor_names = {"mkt_excess", "smb", "hml", "rmw", "cma", "news"};
    r.loadings = VectorXd::LinSpaced(6, -1.0 / 3.0, 2.0 / 7.0);
    r.r_squared = 0.42;
    write_regression_csv(dir / "r.csv", std::vector{r}, "beef");
    const auto back = read_regression_csv(dir / "r.csv");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].symbol, "AAA");
    EXPECT_EQ(back[0].alpha, r.alpha);
    EXPECT_EQ(back[0].loadings, r.loadings);
    EXPECT_EQ(back[0].factor_names, r.factor_names);
    EXPECT_EQ(back[0].r_squared, 0.42);
}

TEST(ExcessReturns, CommonDatesOnly) {
    auto fx = testkit::make_hand_fixture();
    const auto f = factor_returns_ff5(fx.panel, sort_panel(fx.panel));
    fx.panel.rows[1].return_1d.reset();  // S01 on the second date
    const auto assets = excess_returns(fx.panel, f);
    EXPECT_EQ(assets.dates, (std::vector<Date>{Date{2024, 3, 4}, Date{2024, 3, 6}}));
    EXPECT_EQ(assets.excess.rows(), 2);
    EXPECT_EQ(assets.excess.cols(), 12);
}
