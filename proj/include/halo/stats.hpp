#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace halo::stats {

// I_x(a, b), the regularised incomplete beta function. `one_minus_x` must
// equal 1 - x; passing it separately keeps precision when x is close to 1.
// Continued fraction (modified Lentz), relative accuracy ~1e-14.
double regularized_incomplete_beta(double x, double one_minus_x, double a, double b);
double regularized_incomplete_beta(double x, double a, double b);

// Upper tail P(T > t) of Student's t with df degrees of freedom.
double student_t_sf(double t, double df);
// P(|T| > |t|).
double student_t_two_sided(double t, double df);

// Significance marks: "***" p<0.01, "**" p<0.05, "*" p<0.1,
// otherwise "ns".
std::string significance_stars(double p);

struct TTestResult {
  double mean = 0.0;  // sample mean (or mean difference)
  double t_statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  std::size_t n = 0;
  std::vector<double> significant_at;  // subset of {0.01, 0.05, 0.1}
};

// H0: mean <= null. Requires n >= 2 and non-zero sample variance.
TTestResult one_tailed_ttest_greater(std::span<const double> values, double null = 0.0);

// H0: mean(a) - mean(b) <= 0. Paired reduces to the one-sample test on the
// element-wise differences a - b. Unpaired uses the pooled-variance
// two-sample statistic with df = n_a + n_b - 2.
TTestResult mean_difference_test(std::span<const double> a, std::span<const double> b,
                                 bool paired);

struct NormalityScreen {
  double skewness = 0.0;         // m3 / m2^1.5
  double excess_kurtosis = 0.0;  // m4 / m2^2 - 3
  bool pass = false;             // |skew| < 2 and |excess kurtosis| < 7
};

NormalityScreen normality_screen(std::span<const double> values);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double slope_t = 0.0;
  double intercept_t = 0.0;
  double slope_p = 1.0;      // two-sided
  double intercept_p = 1.0;  // two-sided
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  double f_statistic = 0.0;
  double f_p = 1.0;
  double residual_se = 0.0;
  std::size_t df = 0;  // n - 2
  std::size_t n = 0;
};

// y = intercept + slope * x by closed-form least squares.
RegressionResult ols_simple(std::span<const double> x, std::span<const double> y);

}  // namespace halo::stats
