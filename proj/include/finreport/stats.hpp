#pragma once

#include <span>

namespace finreport::stats {

double normal_cdf(double x);

// Inverse standard-normal CDF; p in (0, 1).
double normal_quantile(double p);

// Regularised incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

// Upper tail P(F > x) of the F(d1, d2) distribution.
double f_survival(double x, double d1, double d2);

// Sample quantile with linear interpolation between order statistics (type 7).
double quantile(std::span<const double> values, double q);

double mean(std::span<const double> values);

// Sample standard deviation, divisor n - 1.
double stddev(std::span<const double> values);

}  // namespace finreport::stats
