#ifndef DOSEINS_STATS_HPP
#define DOSEINS_STATS_HPP

namespace doseins {

double logit(double p);
double inv_logit(double x);

/// log(1 + exp(x)) without overflow.
double log1p_exp(double x);

double normal_cdf(double x);

/// Inverse standard normal CDF, accurate to roughly 1e-15 on (0, 1).
double normal_quantile(double p);

double log_choose(int n, int k);
double binomial_pmf(int k, int n, double p);

/// Regularized incomplete beta I_x(a, b) for positive integer a, b.
double beta_cdf(int a, int b, double x);

}  // namespace doseins

#endif  // DOSEINS_STATS_HPP
