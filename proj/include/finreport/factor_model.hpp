#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finreport/classifier.hpp"
#include "finreport/date.hpp"
#include "finreport/market_data.hpp"

namespace finreport {

enum class SizeGroup { small, big };

// Position of a stock within a three-way sort, by characteristic value.
// BP: low=L, high=H. Profitability: low=W, high=R. Investment: low=C, high=A.
// News: low=N (negative), middle=M, high=P (positive).
enum class Tercile { low = 0, middle = 1, high = 2 };

struct GroupAssignment {
    std::string symbol;
    double mktcap = 0.0;
    SizeGroup size = SizeGroup::small;
    Tercile bp = Tercile::middle;
    Tercile profitability = Tercile::middle;
    Tercile investment = Tercile::middle;
    std::optional<Tercile> news;  // FF5-News only
};

struct Breakpoints {
    double size = 0.5;  // median
    double low = 0.3;
    double high = 0.7;
};

enum class Weighting { equal, value };

// Size split at the median market cap; BP / profitability / investment split at
// the 30th / 70th percentiles (values on a breakpoint go to the lower group).
// News groups come straight from labels: positive -> P, neutral -> M,
// negative -> N; symbols without a label (no news that day) go to M.
// A characteristic with no dispersion puts everyone in the middle group.
std::vector<GroupAssignment> sort_groups(std::span<const StockFactorRow> cross_section,
                                         const std::map<std::string, Label>* news_labels = nullptr,
                                         const Breakpoints& breakpoints = {});

// Returns of the six size x tercile portfolios of one sort dimension; nullopt = empty.
struct PortfolioGrid {
    std::array<std::array<std::optional<double>, 3>, 2> cell{};  // [size][tercile]

    std::optional<double>& at(SizeGroup s, Tercile t) {
        return cell[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
    }

    // Empty cells take the mean of the non-empty cells in the same size row;
    // failing that, the same tercile in the other row; failing that, the whole grid.
    std::array<std::array<double, 3>, 2> imputed() const;

    // True when at most one tercile column holds any stock.
    bool degenerate() const;

    // (S_low + S_mid + S_high)/3 - (B_low + B_mid + B_high)/3
    double small_minus_big() const;
    // (B_high + S_high)/2 - (B_low + S_low)/2
    double high_minus_low() const;
};

struct FactorReturnsSeries {
    std::vector<Date> dates;
    Eigen::VectorXd mkt_excess;
    Eigen::VectorXd smb;
    Eigen::VectorXd hml;
    Eigen::VectorXd rmw;
    Eigen::VectorXd cma;
    std::optional<Eigen::VectorXd> news;
    Eigen::VectorXd risk_free;
    // SMB_BP, SMB_op, SMB_inv[, SMB_news] per date.
    Eigen::MatrixXd smb_components;

    bool has_news() const { return news.has_value(); }
    Eigen::Index size() const { return static_cast<Eigen::Index>(dates.size()); }
    std::vector<std::string> names() const;
    // T x K regressor matrix, columns in names() order.
    Eigen::MatrixXd design() const;
    // Rows restricted to the given dates (all of which must be present).
    FactorReturnsSeries subset(std::span<const Date> keep) const;
};

struct DatedGroups {
    Date date;
    std::vector<GroupAssignment> groups;
};

// Per-date sorts over the panel rows that carry factors. With news_labels the
// news dimension is filled in as well.
std::vector<DatedGroups> sort_panel(const Panel& panel,
                                    const std::map<ReturnKey, Label>* news_labels = nullptr,
                                    const Breakpoints& breakpoints = {});

// Portfolio sorts to factor returns. Each date uses the return_1d of the stocks
// sorted on that date. MKT is the (equal or value weighted) market return minus rf.
FactorReturnsSeries factor_returns_ff5(const Panel& panel, std::span<const DatedGroups> groups,
                                       Weighting weighting = Weighting::equal,
                                       const std::map<Date, double>& risk_free = {});
FactorReturnsSeries factor_returns_ff5news(const Panel& panel, std::span<const DatedGroups> groups,
                                           Weighting weighting = Weighting::equal,
                                           const std::map<Date, double>& risk_free = {});

struct RegressionResult {
    std::string symbol;
    double alpha = 0.0;
    std::vector<std::string> factor_names;
    Eigen::VectorXd loadings;  // beta, b, h, r, c[, m]
    Eigen::VectorXd residuals;
    double r_squared = 0.0;

    double loading(const std::string& name) const;
    std::optional<double> news_loading() const;
};

// OLS with intercept of excess returns (length T) on a T x K factor matrix.
// Throws NumericalError naming collinear columns on a rank-deficient design.
RegressionResult ols_regress(const Eigen::VectorXd& excess_returns, const Eigen::MatrixXd& factors,
                             std::span<const std::string> factor_names);
RegressionResult ols_regress(const Eigen::VectorXd& excess_returns, const FactorReturnsSeries& factors);

struct GrsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double mean_abs_alpha = 0.0;
    Eigen::Index T = 0, N = 0, K = 0;
};

// Gibbons-Ross-Shanken F-test that all alphas are zero. Residual and factor
// covariances use divisor T; p-value from F(N, T - N - K).
GrsResult grs_test(std::span<const RegressionResult> results, const Eigen::MatrixXd& factors);
GrsResult grs_test(std::span<const RegressionResult> results, const FactorReturnsSeries& factors);

// Aligns each symbol's excess return (return_1d - rf) to the factor dates. Only
// dates on which every symbol traded are kept, so GRS sees a common sample.
struct AssetReturnPanel {
    std::vector<std::string> symbols;
    std::vector<Date> dates;
    Eigen::MatrixXd excess;  // T x N
};
AssetReturnPanel excess_returns(const Panel& panel, const FactorReturnsSeries& factors);

std::vector<RegressionResult> regress_all(const AssetReturnPanel& assets, const FactorReturnsSeries& factors);

// CSV: date,mkt_excess,smb,hml,rmw,cma[,news],rf
void write_factor_csv(const std::filesystem::path& path, const FactorReturnsSeries& series,
                      const std::string& config_hash = {});
FactorReturnsSeries read_factor_csv(const std::filesystem::path& path, std::string* config_hash = nullptr);

// CSV: symbol,alpha,<loadings...>,r_squared
void write_regression_csv(const std::filesystem::path& path, std::span<const RegressionResult> results,
                          const std::string& config_hash = {});
std::vector<RegressionResult> read_regression_csv(const std::filesystem::path& path,
                                                  std::string* config_hash = nullptr);

}  // namespace finreport
