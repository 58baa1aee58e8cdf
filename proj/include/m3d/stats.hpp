#pragma once

#include <vector>

#include "m3d/common.hpp"

namespace m3d::stats {

double digamma(double x);

/// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

double normal_cdf(double z);

/// Two-sided p-value of Student's t with nu degrees of freedom.
double student_t_two_sided(double t, double nu);

struct TestResult {
    double statistic = 0;
    double p_value = 1;
};

/// Welch's unequal-variance t-test, two-sided.
TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Wilcoxon rank-sum (Mann-Whitney U) with average-rank ties, tie-corrected
/// normal approximation and continuity correction, two-sided.
TestResult rank_sum_test(const std::vector<double>& a, const std::vector<double>& b);

/// D'Agostino K^2 omnibus normality test (skewness + kurtosis components).
/// Requires n >= 8; callers should treat smaller groups as non-normal.
TestResult dagostino_k2(const std::vector<double>& x);

}  // namespace m3d::stats
