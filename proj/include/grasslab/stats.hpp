#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace grasslab::stats {

/// Mean and standard error of the mean.
std::pair<double, double> mean_se(const std::vector<double>& xs);

/// Sample standard deviation (n-1 denominator).
double sample_std(const std::vector<double>& xs);

double median(std::vector<double> xs);

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
double ks_statistic(std::vector<double> sample,
                    const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

/// Asymptotic Kolmogorov p-value for statistic d at effective size n_eff.
double ks_pvalue(double d, double n_eff);

/// Two-sided p-value of the two-sample KS test.
double ks_test_two_sample(std::vector<double> a, std::vector<double> b);

/// Least-squares slope of y against x.
double regression_slope(const std::vector<double>& x,
                        const std::vector<double>& y);

/// Standard normal CDF and quantile (Acklam approximation).
double normal_cdf(double x);
double normal_quantile(double p);

/// Normal-approximation binomial proportion interval, clamped to [0,1].
struct BinomialCI {
  double p;
  double se;
  double lo;
  double hi;
};
BinomialCI binomial_ci(std::int64_t successes, std::int64_t trials,
                       double z = 2.0);

}  // namespace grasslab::stats
