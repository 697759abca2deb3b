#pragma once

#include <cstddef>
#include <vector>

namespace mim::stats {

double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs); // ddof = 1
double sample_stddev(const std::vector<double>& xs);

// Rank-based (Mann-Whitney) AUC; ties contribute 1/2. Both classes must be
// present. labels are 0/1.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double reg_incomplete_beta(double a, double b, double x);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double dof = 0.0;
};

// Welch's unequal-variance t statistic with Welch-Satterthwaite degrees of
// freedom and a two-sided p from the t CDF.
TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

} // namespace mim::stats
