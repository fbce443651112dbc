#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace finreport {

struct NelderMeadOptions {
    int max_evaluations = 4000;
    double f_tolerance = 1e-10;
    double x_tolerance = 1e-9;
};

template <typename Scalar>
struct NelderMeadResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
    Scalar value;
    int evaluations;
};

// Derivative-free minimisation. `f` may return +inf for infeasible points.
// The start point is a simplex vertex, so the result is never worse than f(start).
template <typename Scalar, typename Fn>
NelderMeadResult<Scalar> nelder_mead(Fn&& f, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& start,
                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& step,
                                     const NelderMeadOptions& options = {}) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index n = start.size();
    std::vector<Vec> simplex(static_cast<std::size_t>(n + 1), start);
    std::vector<Scalar> values(static_cast<std::size_t>(n + 1));
    int evals = 0;
    auto eval = [&](const Vec& x) {
        ++evals;
        const Scalar v = f(x);
        return std::isnan(v) ? std::numeric_limits<Scalar>::infinity() : v;
    };
    values[0] = eval(start);
    for (Eigen::Index i = 0; i < n; ++i) {
        simplex[static_cast<std::size_t>(i + 1)](i) += step(i);
        values[static_cast<std::size_t>(i + 1)] = eval(simplex[static_cast<std::size_t>(i + 1)]);
    }

    std::vector<std::size_t> order(simplex.size());
    while (evals < options.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

        Scalar size = 0;
        for (const auto& v : simplex) size = std::max(size, (v - simplex[best]).cwiseAbs().maxCoeff());
        if (std::isfinite(values[worst]) && std::abs(values[worst] - values[best]) <= options.f_tolerance &&
            size <= options.x_tolerance)
            break;

        Vec centroid = Vec::Zero(n);
        for (std::size_t i = 0; i < simplex.size(); ++i)
            if (i != worst) centroid += simplex[i];
        centroid /= static_cast<Scalar>(n);

        const Vec reflected = centroid + (centroid - simplex[worst]);
        const Scalar fr = eval(reflected);
        if (fr < values[best]) {
            const Vec expanded = centroid + 2 * (centroid - simplex[worst]);
            const Scalar fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Vec contracted = outside ? Vec(centroid + 0.5 * (reflected - centroid))
                                       : Vec(centroid + 0.5 * (simplex[worst] - centroid));
        const Scalar fc = eval(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i == best) continue;
            simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
            values[i] = eval(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best], evals};
}

}  // namespace finreport
