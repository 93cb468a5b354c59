#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mmscope {

struct Description {
  std::size_t n = 0;
  double mean = 0.0;
  double std_population = 0.0;
  std::optional<double> std_sample;  // absent for n = 1
  double min = 0.0;
  double max = 0.0;
};

struct ZTestResult {
  double z = 0.0;
  double p_two_sided = 1.0;
};

// Descriptive summary; std_sample uses the n-1 denominator.
Description describe(std::span<const double> samples);

// Standard normal CDF via erfc.
double normal_cdf(double x);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double betainc(double a, double b, double x);

// Two-sided survival probability of Student's t with df degrees of
// freedom: P(|T| >= t).
double student_t_sf_two_sided(double t, int df);

// Scott's rule bandwidth: sigma_hat * n^(-1/5), sample standard deviation.
double scott_bandwidth(std::span<const double> samples);

// Kernel evaluation without precondition checks; h must be positive.
std::vector<double> kde_eval(std::span<const double> samples,
                             std::span<const double> grid, double h);

// Gaussian KDE on a sorted grid. Bandwidth defaults to Scott's rule.
// Throws DegenerateSamples for fewer than two samples or zero variance.
std::vector<double> gaussian_kde(std::span<const double> samples,
                                 std::span<const double> grid,
                                 std::optional<double> bandwidth = {});

// Welch-style large-sample z test (unpooled sample variances). Requires
// at least 30 observations on each side.
ZTestResult two_sample_z(std::span<const double> a,
                         std::span<const double> b);

}  // namespace mmscope
