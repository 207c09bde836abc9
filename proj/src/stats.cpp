#include "halo/stats.hpp"

#include <cmath>
#include <limits>

#include "halo/error.hpp"

namespace halo::stats {

namespace {

constexpr double kFpMin = 1e-300;
constexpr double kEps = 1e-15;
constexpr int kMaxIterations = 100000;

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_continued_fraction(double x, double a, double b) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw DataError("incomplete beta continued fraction did not converge");
}

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double regularized_incomplete_beta(double x, double y, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw UsageError("incomplete beta needs a, b > 0");
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) throw UsageError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (y == 0.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log(y) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(y, b, a) / b;
}

double regularized_incomplete_beta(double x, double a, double b) {
  return regularized_incomplete_beta(x, 1.0 - x, a, b);
}

double student_t_sf(double t, double df) {
  if (!(df > 0.0)) throw UsageError("Student t needs df > 0");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double y = t2 / (df + t2);
  const double tail = 0.5 * regularized_incomplete_beta(x, y, 0.5 * df, 0.5);
  return t > 0.0 ? tail : 1.0 - tail;
}

double student_t_two_sided(double t, double df) {
  return 2.0 * student_t_sf(std::abs(t), df);
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "ns";
}

TTestResult one_tailed_ttest_greater(std::span<const double> values, double null) {
  const std::size_t n = values.size();
  if (n < 2) throw DataError("t-test needs at least two values");
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw DataError("t-test: zero variance");

  TTestResult r;
  r.n = n;
  r.df = n - 1;
  r.mean = mean;
  r.t_statistic = (mean - null) / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = student_t_sf(r.t_statistic, static_cast<double>(r.df));
  for (double level : {0.01, 0.05, 0.1}) {
    if (r.p_value < level) r.significant_at.push_back(level);
  }
  return r;
}

TTestResult mean_difference_test(std::span<const double> a, std::span<const double> b,
                                 bool paired) {
  if (paired) {
    if (a.size() != b.size()) {
      throw DataError("paired test: length mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
    }
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return one_tailed_ttest_greater(diff, 0.0);
  }
  if (a.size() < 2 || b.size() < 2) throw DataError("two-sample test needs n >= 2 per group");
  const double ma = mean_of(a), mb = mean_of(b);
  double ssa = 0.0, ssb = 0.0;
  for (double v : a) ssa += (v - ma) * (v - ma);
  for (double v : b) ssb += (v - mb) * (v - mb);
  const std::size_t df = a.size() + b.size() - 2;
  const double pooled = (ssa + ssb) / static_cast<double>(df);
  if (pooled == 0.0) throw DataError("two-sample test: zero variance");

  TTestResult r;
  r.n = a.size() + b.size();
  r.df = df;
  r.mean = ma - mb;
  r.t_statistic = r.mean / std::sqrt(pooled * (1.0 / static_cast<double>(a.size()) +
                                               1.0 / static_cast<double>(b.size())));
  r.p_value = student_t_sf(r.t_statistic, static_cast<double>(df));
  for (double level : {0.01, 0.05, 0.1}) {
    if (r.p_value < level) r.significant_at.push_back(level);
  }
  return r;
}

NormalityScreen normality_screen(std::span<const double> values) {
  if (values.size() < 8) throw DataError("normality screen needs at least 8 values");
  const double n = static_cast<double>(values.size());
  const double mean = mean_of(values);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 == 0.0) throw DataError("normality screen: zero variance");
  NormalityScreen s;
  s.skewness = m3 / std::pow(m2, 1.5);
  s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  s.pass = std::abs(s.skewness) < 2.0 && std::abs(s.excess_kurtosis) < 7.0;
  return s;
}

RegressionResult ols_simple(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("regression: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw DataError("regression needs at least three points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DataError("regression: x has zero variance");

  RegressionResult r;
  r.n = n;
  r.df = n - 2;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    ssr += e * e;
  }
  const double df = static_cast<double>(r.df);
  const double sigma2 = ssr / df;
  r.residual_se = std::sqrt(sigma2);
  r.slope_se = std::sqrt(sigma2 / sxx);
  r.intercept_se = std::sqrt(sigma2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  r.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  r.adjusted_r_squared = 1.0 - (1.0 - r.r_squared) * static_cast<double>(n - 1) / df;
  r.slope_t = r.slope / r.slope_se;
  r.intercept_t = r.intercept / r.intercept_se;
  r.slope_p = student_t_two_sided(r.slope_t, df);
  r.intercept_p = student_t_two_sided(r.intercept_t, df);
  r.f_statistic = (r.slope * sxy) / sigma2;
  r.f_p = r.slope_p;  // F(1, df) tail equals the two-sided t tail
  return r;
}

}  // namespace halo::stats
