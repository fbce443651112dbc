#include "finreport/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "finreport/csv.hpp"
#include "finreport/error.hpp"
#include "finreport/nelder_mead.hpp"
#include "finreport/stats.hpp"

namespace finreport {

using Eigen::Index;
using Eigen::VectorXd;

namespace {
constexpr double kLogVarLimit = 700.0;
constexpr double kLog2Pi = 1.8378770664093454836;

double sample_variance(const VectorXd& x) {
    const double m = x.mean();
    return (x.array() - m).square().sum() / static_cast<double>(x.size());
}

// Returns false when the recursion explodes; fills log_var.
bool run_recursion(const EgarchParams& p, const VectorXd& e, double init_var, EgarchVariant variant,
                   VectorXd& log_var) {
    const Index T = e.size();
    const int lags_a = p.p(), lags_b = p.q();
    const double init_log = std::log(init_var);
    log_var.resize(T);
    VectorXd z(T);
    for (Index t = 0; t < T; ++t) {
        double h = p.omega;
        for (int l = 1; l <= lags_a; ++l)
            if (t - l >= 0) h += p.alpha(l - 1) * (std::abs(z(t - l)) - kExpectedAbsNormal);
        for (int j = 1; j <= lags_b; ++j) {
            h += p.beta(j - 1) * (t - j >= 0 ? log_var(t - j) : init_log);
            if (variant == EgarchVariant::as_printed)
                h += p.gamma(j - 1) * (t - j >= 0 ? z(t - j) * z(t - j) : 1.0);
            else if (t - j >= 0)
                h += p.gamma(j - 1) * z(t - j);
        }
        if (!std::isfinite(h) || std::abs(h) > kLogVarLimit) return false;
        log_var(t) = h;
        z(t) = e(t) * std::exp(-0.5 * h);
    }
    return true;
}

}  // namespace

bool EgarchParams::feasible() const {
    if (gamma.size() != beta.size()) return false;
    if (!std::isfinite(omega) || !alpha.allFinite() || !beta.allFinite() || !gamma.allFinite()) return false;
    return beta.sum() < 1.0;
}

VectorXd EgarchParams::pack() const {
    VectorXd theta(1 + alpha.size() + beta.size() + gamma.size());
    theta << omega, alpha, beta, gamma;
    return theta;
}

EgarchParams EgarchParams::unpack(const VectorXd& theta, int p, int q) {
    if (theta.size() != 1 + p + 2 * q) throw std::invalid_argument("EgarchParams::unpack: wrong length");
    EgarchParams out;
    out.omega = theta(0);
    out.alpha = theta.segment(1, p);
    out.beta = theta.segment(1 + p, q);
    out.gamma = theta.segment(1 + p + q, q);
    return out;
}

VolSeries egarch_filter(const EgarchParams& params, const VectorXd& residuals, std::optional<double> init_var,
                        EgarchVariant variant) {
    if (params.gamma.size() != params.beta.size()) throw ValidationError("egarch: gamma and beta need the same order");
    if (residuals.size() <= std::max(params.p(), params.q()))
        throw ValidationError("egarch_filter: residual series shorter than the model order");
    const double v0 = init_var.value_or(sample_variance(residuals));
    if (!(v0 > 0.0)) throw ValidationError("egarch_filter: initial variance must be positive");
    VectorXd log_var;
    if (!run_recursion(params, residuals, v0, variant, log_var))
        throw NumericalError("egarch_filter: log variance overflow, explosive parameters");
    VolSeries out;
    out.sigma = (0.5 * log_var.array()).exp().matrix();
    out.mu = VectorXd::Zero(residuals.size());
    out.residual = residuals;
    return out;
}

double egarch_log_likelihood(const EgarchParams& params, const VectorXd& residuals, std::optional<double> init_var,
                             EgarchVariant variant) {
    if (!params.feasible()) return -std::numeric_limits<double>::infinity();
    const double v0 = init_var.value_or(sample_variance(residuals));
    VectorXd log_var;
    if (!run_recursion(params, residuals, v0, variant, log_var)) return -std::numeric_limits<double>::infinity();
    double ll = 0.0;
    for (Index t = 0; t < residuals.size(); ++t)
        ll += -0.5 * kLog2Pi - 0.5 * log_var(t) - 0.5 * residuals(t) * residuals(t) * std::exp(-log_var(t));
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

EgarchFit fit_egarch(const VectorXd& returns, const EgarchFitOptions& options) {
    if (returns.size() < 250)
        throw ValidationError("fit_egarch needs at least 250 returns, got " + std::to_string(returns.size()));
    if (options.p < 1 || options.q < 1 || options.starts < 1) throw ValidationError("fit_egarch: invalid options");
    if (!returns.allFinite()) throw ValidationError("fit_egarch: non-finite returns");

    EgarchFit fit;
    fit.mu = returns.mean();
    const VectorXd e = returns.array() - fit.mu;
    fit.init_var = sample_variance(e);
    if (!(fit.init_var > 0.0)) throw ValidationError("fit_egarch: returns have zero variance");
    const double log_var = std::log(fit.init_var);

    auto objective = [&](const VectorXd& theta) {
        const auto params = EgarchParams::unpack(theta, options.p, options.q);
        return -egarch_log_likelihood(params, e, fit.init_var, options.variant);
    };

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> u_alpha(0.0, 0.3), u_beta(0.5, 0.98), u_gamma(-0.05, 0.1);
    const int n = 1 + options.p + 2 * options.q;
    VectorXd step = VectorXd::Constant(n, 0.05);
    step(0) = std::max(0.1, 0.05 * std::abs(log_var));

    double best_value = std::numeric_limits<double>::infinity();
    VectorXd best_theta;
    for (int s = 0; s < options.starts; ++s) {
        EgarchParams start;
        const double beta_total = u_beta(rng);
        const double gamma_total = u_gamma(rng);
        start.alpha = VectorXd::Constant(options.p, u_alpha(rng) / options.p);
        start.beta = VectorXd::Constant(options.q, beta_total / options.q);
        start.gamma = VectorXd::Constant(options.q, gamma_total / options.q);
        // Centre the stationary log variance on the sample variance.
        start.omega = (1.0 - beta_total) * log_var - (options.variant == EgarchVariant::as_printed ? gamma_total : 0.0);
        const VectorXd theta0 = start.pack();
        fit.start_log_likelihoods.push_back(-objective(theta0));
        const auto result = nelder_mead<double>(objective, theta0, step, {options.max_evaluations, 1e-10, 1e-9});
        if (result.value < best_value) {
            best_value = result.value;
            best_theta = result.x;
        }
    }
    if (!std::isfinite(best_value)) throw NumericalError("fit_egarch: no feasible parameter point found");
    fit.params = EgarchParams::unpack(best_theta, options.p, options.q);
    fit.log_likelihood = -best_value;
    fit.vol = egarch_filter(fit.params, e, fit.init_var, options.variant);
    fit.vol.mu = VectorXd::Constant(e.size(), fit.mu);
    return fit;
}

VolSeries egarch_forecast(const EgarchFit& fit, const VectorXd& returns, EgarchVariant variant) {
    VolSeries vol = egarch_filter(fit.params, (returns.array() - fit.mu).matrix(), fit.init_var, variant);
    vol.mu = VectorXd::Constant(returns.size(), fit.mu);
    return vol;
}

VectorXd simulate_egarch(const EgarchParams& params, Index length, std::uint64_t seed, double mu,
                         EgarchVariant variant, Index burn_in) {
    if (!params.feasible()) throw ValidationError("simulate_egarch: infeasible parameters");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index total = length + burn_in;
    const int p = params.p(), q = params.q();
    // Start at the stationary mean of ln sigma^2.
    const double gamma_mean = variant == EgarchVariant::as_printed ? params.gamma.sum() : 0.0;
    const double h0 = (params.omega + gamma_mean) / (1.0 - params.beta.sum());
    VectorXd h = VectorXd::Constant(total, h0);
    VectorXd z(total);
    VectorXd out(length);
    for (Index t = 0; t < total; ++t) {
        double ht = params.omega;
        for (int l = 1; l <= p; ++l)
            if (t - l >= 0) ht += params.alpha(l - 1) * (std::abs(z(t - l)) - kExpectedAbsNormal);
        for (int j = 1; j <= q; ++j) {
            ht += params.beta(j - 1) * (t - j >= 0 ? h(t - j) : h0);
            if (variant == EgarchVariant::as_printed)
                ht += params.gamma(j - 1) * (t - j >= 0 ? z(t - j) * z(t - j) : 1.0);
            else if (t - j >= 0)
                ht += params.gamma(j - 1) * z(t - j);
        }
        if (std::abs(ht) > kLogVarLimit) throw NumericalError("simulate_egarch: explosive parameters");
        h(t) = ht;
        z(t) = normal(rng);
        if (t >= burn_in) out(t - burn_in) = mu + std::exp(0.5 * ht) * z(t);
    }
    return out;
}

std::vector<VarEstimate> compute_var(const VolSeries& vol, double alpha_level) {
    if (!(alpha_level > 0.5 && alpha_level < 1.0)) throw ValidationError("compute_var: alpha_level must lie in (0.5, 1)");
    if (vol.mu.size() != vol.sigma.size()) throw ValidationError("compute_var: mu and sigma differ in length");
    const double z = stats::normal_quantile(alpha_level);
    std::vector<VarEstimate> out;
    out.reserve(static_cast<std::size_t>(vol.sigma.size()));
    for (Index t = 0; t < vol.sigma.size(); ++t) out.push_back({vol.mu(t) - vol.sigma(t) * z, alpha_level, z});
    return out;
}

std::vector<std::optional<double>> actual_var(const VectorXd& realized, double alpha_level, std::size_t window) {
    const auto T = static_cast<std::size_t>(realized.size());
    if (window > T) throw ValidationError("evaluate_var: window longer than the series");
    std::vector<std::optional<double>> out(T);
    for (std::size_t t = window - 1; t < T; ++t) {
        const std::span<const double> trailing(realized.data() + (t + 1 - window), window);
        out[t] = stats::quantile(trailing, 1.0 - alpha_level);
    }
    return out;
}

VarMetrics evaluate_var(std::span<const VarEstimate> predicted, const VectorXd& realized, std::size_t window) {
    if (predicted.size() != static_cast<std::size_t>(realized.size()))
        throw ValidationError("evaluate_var: predicted and realized series differ in length");
    if (window < 20) throw ValidationError("evaluate_var: window must be at least 20");
    if (predicted.empty()) throw ValidationError("evaluate_var: empty series");
    const auto actual = actual_var(realized, predicted.front().alpha_level, window);
    VarMetrics m;
    double sq = 0.0, abs_sum = 0.0;
    std::size_t covered = 0;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        covered += realized(static_cast<Index>(t)) >= predicted[t].var_value ? 1 : 0;
        if (!actual[t]) continue;
        const double d = predicted[t].var_value - *actual[t];
        sq += d * d;
        abs_sum += std::abs(d);
        ++m.pairs;
    }
    m.dates = predicted.size();
    m.coverage_rate = static_cast<double>(covered) / static_cast<double>(m.dates);
    m.rmse = std::sqrt(sq / static_cast<double>(m.pairs));
    m.mae = abs_sum / static_cast<double>(m.pairs);
    m.var_loss = m.mae;
    return m;
}

VarMetrics average_metrics(std::span<const VarMetrics> per_stock) {
    VarMetrics out;
    if (per_stock.empty()) return out;
    for (const auto& m : per_stock) {
        out.rmse += m.rmse;
        out.mae += m.mae;
        out.coverage_rate += m.coverage_rate;
        out.var_loss += m.var_loss;
        out.pairs += m.pairs;
        out.dates += m.dates;
    }
    const double n = static_cast<double>(per_stock.size());
    out.rmse /= n;
    out.mae /= n;
    out.coverage_rate /= n;
    out.var_loss /= n;
    return out;
}

VarMetrics pooled_metrics(std::span<const VarMetrics> per_stock) {
    VarMetrics out;
    double sq = 0.0, abs_sum = 0.0, covered = 0.0;
    for (const auto& m : per_stock) {
        sq += m.rmse * m.rmse * static_cast<double>(m.pairs);
        abs_sum += m.mae * static_cast<double>(m.pairs);
        covered += m.coverage_rate * static_cast<double>(m.dates);
        out.pairs += m.pairs;
        out.dates += m.dates;
    }
    if (out.pairs > 0) {
        out.rmse = std::sqrt(sq / static_cast<double>(out.pairs));
        out.mae = abs_sum / static_cast<double>(out.pairs);
        out.var_loss = out.mae;
    }
    if (out.dates > 0) out.coverage_rate = covered / static_cast<double>(out.dates);
    return out;
}

void write_risk_csv(const std::filesystem::path& path, std::span<const RiskRow> rows, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    csv::write_hash_comment(out, config_hash);
    out << "symbol,date,mu,sigma,var,actual_var,violation_flag\n";
    for (const auto& r : rows) {
        out << r.symbol << ',' << r.date.iso() << ',' << csv::format(r.mu) << ',' << csv::format(r.sigma) << ','
            << csv::format(r.var) << ',' << (r.actual_var ? csv::format(*r.actual_var) : std::string()) << ','
            << (r.violation ? 1 : 0) << '\n';
    }
}

std::vector<RiskRow> read_risk_csv(const std::filesystem::path& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open risk file " + path.string());
    if (config_hash) *config_hash = csv::peek_config_hash(path);
    const auto lines = csv::read_lines(in);
    if (lines.empty() || lines[0].second != "symbol,date,mu,sigma,var,actual_var,violation_flag")
        throw ParseError(path.string(), lines.empty() ? 1 : lines[0].first, "unexpected header");
    std::vector<RiskRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i].second);
        if (f.size() != 7) throw ParseError(path.string(), lines[i].first, "expected 7 fields");
        try {
            RiskRow r{std::string(f[0]), Date::parse(f[1]), csv::to_double(f[2]), csv::to_double(f[3]),
                      csv::to_double(f[4]), std::nullopt, f[6] == "1"};
            if (!f[5].empty()) r.actual_var = csv::to_double(f[5]);
            rows.push_back(std::move(r));
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), lines[i].first, e.what());
        }
    }
    return rows;
}

}  // namespace finreport
