#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finreport/date.hpp"

namespace finreport {

// E|z| for z ~ N(0, 1).
inline const double kExpectedAbsNormal = std::sqrt(2.0 / 3.14159265358979323846);

// as_printed: ln s2_t = w + sum a_l (|z_{t-l}| - E|z|) + sum b_j ln s2_{t-j} + sum g_k z_{t-k}^2
// textbook:   the g_k term uses the signed shock z_{t-k} (leverage effect).
// z is the standardised residual e / sigma.
enum class EgarchVariant { as_printed, textbook };

struct EgarchParams {
    double omega = 0.0;
    Eigen::VectorXd alpha;  // p shock-magnitude weights
    Eigen::VectorXd beta;   // q persistence weights
    Eigen::VectorXd gamma;  // q squared-shock weights

    int p() const { return static_cast<int>(alpha.size()); }
    int q() const { return static_cast<int>(beta.size()); }
    bool feasible() const;  // finite and sum(beta) < 1

    Eigen::VectorXd pack() const;
    static EgarchParams unpack(const Eigen::VectorXd& theta, int p, int q);
};

struct VolSeries {
    Eigen::VectorXd sigma;
    Eigen::VectorXd mu;
    Eigen::VectorXd residual;
};

// Runs the log-variance recursion over the residuals. Pre-sample log variance is
// ln(init_var) (default: sample variance of the residuals); pre-sample shock terms
// sit at their expectations. Throws NumericalError when |ln sigma^2| exceeds 700.
VolSeries egarch_filter(const EgarchParams& params, const Eigen::VectorXd& residuals,
                        std::optional<double> init_var = std::nullopt,
                        EgarchVariant variant = EgarchVariant::as_printed);

// Gaussian log-likelihood; -inf for infeasible or explosive parameters.
double egarch_log_likelihood(const EgarchParams& params, const Eigen::VectorXd& residuals,
                             std::optional<double> init_var = std::nullopt,
                             EgarchVariant variant = EgarchVariant::as_printed);

struct EgarchFitOptions {
    int p = 1;
    int q = 1;
    int starts = 20;
    std::uint64_t seed = 0;
    int max_evaluations = 3000;
    EgarchVariant variant = EgarchVariant::as_printed;
};

struct EgarchFit {
    EgarchParams params;
    VolSeries vol;
    double mu = 0.0;
    double init_var = 0.0;
    double log_likelihood = 0.0;
    std::vector<double> start_log_likelihoods;
};

// Gaussian quasi-maximum likelihood with a constant (sample) mean, by Nelder-Mead
// from seeded multi-starts. Needs at least 250 returns.
EgarchFit fit_egarch(const Eigen::VectorXd& returns, const EgarchFitOptions& options = {});

// One-step-ahead volatility over a (possibly longer) return series with fitted params,
// using the fit's mean and pre-sample variance.
VolSeries egarch_forecast(const EgarchFit& fit, const Eigen::VectorXd& returns,
                          EgarchVariant variant = EgarchVariant::as_printed);

// Simulates returns mu + sigma_t z_t with z ~ N(0,1) from the given recursion.
Eigen::VectorXd simulate_egarch(const EgarchParams& params, Eigen::Index length, std::uint64_t seed,
                                double mu = 0.0, EgarchVariant variant = EgarchVariant::as_printed,
                                Eigen::Index burn_in = 500);

struct VarEstimate {
    double var_value = 0.0;
    double alpha_level = 0.95;
    double z_alpha = 0.0;
};

// VaR_t = mu_t - sigma_t * z_alpha, alpha_level in (0.5, 1).
std::vector<VarEstimate> compute_var(const VolSeries& vol, double alpha_level);

struct VarMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double coverage_rate = 0.0;
    double var_loss = 0.0;
    std::size_t pairs = 0;  // dates with an ActualVaR
    std::size_t dates = 0;
};

// Empirical (1 - alpha) quantile of the trailing window ending at each date;
// nullopt for the first window - 1 dates.
std::vector<std::optional<double>> actual_var(const Eigen::VectorXd& realized, double alpha_level,
                                              std::size_t window);

// Compares predicted VaR with the trailing empirical quantile. Coverage counts
// dates where the realized return stays at or above the predicted VaR.
VarMetrics evaluate_var(std::span<const VarEstimate> predicted, const Eigen::VectorXd& realized,
                        std::size_t window);

// Per-stock metrics averaged with equal weight per stock.
VarMetrics average_metrics(std::span<const VarMetrics> per_stock);
// Metrics over all (stock, date) pairs pooled together.
VarMetrics pooled_metrics(std::span<const VarMetrics> per_stock);

struct RiskRow {
    std::string symbol;
    Date date;
    double mu, sigma, var;
    std::optional<double> actual_var;
    bool violation;
};

// CSV: symbol,date,mu,sigma,var,actual_var,violation_flag
void write_risk_csv(const std::filesystem::path& path, std::span<const RiskRow> rows,
                    const std::string& config_hash = {});
std::vector<RiskRow> read_risk_csv(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace finreport
