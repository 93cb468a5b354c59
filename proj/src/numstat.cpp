#include "mmscope/numstat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmscope/errors.hpp"

namespace mmscope {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double variance_sum(std::span<const double> xs, double mean) {
  double acc = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    acc += d * d;
  }
  return acc;
}

// Continued fraction for the incomplete beta function (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

Description describe(std::span<const double> samples) {
  if (samples.empty()) fail(errc::empty_input, "describe: no samples");
  Description out;
  out.n = samples.size();
  double sum = 0.0;
  out.min = samples[0];
  out.max = samples[0];
  for (double x : samples) {
    sum += x;
    out.min = std::min(out.min, x);
    out.max = std::max(out.max, x);
  }
  out.mean = sum / static_cast<double>(out.n);
  const double ss = variance_sum(samples, out.mean);
  out.std_population = std::sqrt(ss / static_cast<double>(out.n));
  if (out.n > 1) {
    out.std_sample = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double betainc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_sf_two_sided(double t, int df) {
  const double v = static_cast<double>(df);
  return betainc(v / 2.0, 0.5, v / (v + t * t));
}

double scott_bandwidth(std::span<const double> samples) {
  const Description d = describe(samples);
  if (!d.std_sample.has_value() || *d.std_sample <= 0.0) {
    fail(errc::degenerate_samples,
         "scott_bandwidth: need >= 2 samples with nonzero variance");
  }
  return *d.std_sample *
         std::pow(static_cast<double>(d.n), -1.0 / 5.0);
}

std::vector<double> kde_eval(std::span<const double> samples,
                             std::span<const double> grid, double h) {
  std::vector<double> out(grid.size(), 0.0);
  const double norm =
      1.0 / (static_cast<double>(samples.size()) * h);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    double acc = 0.0;
    for (double x : samples) {
      const double u = (grid[gi] - x) / h;
      acc += kInvSqrt2Pi * std::exp(-0.5 * u * u);
    }
    out[gi] = acc * norm;
  }
  return out;
}

std::vector<double> gaussian_kde(std::span<const double> samples,
                                 std::span<const double> grid,
                                 std::optional<double> bandwidth) {
  if (samples.size() < 2) {
    fail(errc::degenerate_samples, "gaussian_kde: need >= 2 samples");
  }
  if (!std::is_sorted(grid.begin(), grid.end())) {
    fail(errc::invalid_input, "gaussian_kde: grid must be sorted");
  }
  double h;
  if (bandwidth.has_value()) {
    if (*bandwidth <= 0.0) {
      fail(errc::invalid_input, "gaussian_kde: bandwidth must be > 0");
    }
    h = *bandwidth;
  } else {
    h = scott_bandwidth(samples);
  }
  return kde_eval(samples, grid, h);
}

ZTestResult two_sample_z(std::span<const double> a,
                         std::span<const double> b) {
  if (a.size() < 30 || b.size() < 30) {
    fail(errc::too_few_samples,
         "two_sample_z: need n >= 30 on both sides");
  }
  const Description da = describe(a);
  const Description db = describe(b);
  const double va = *da.std_sample * *da.std_sample;
  const double vb = *db.std_sample * *db.std_sample;
  const double denom = std::sqrt(va / static_cast<double>(da.n) +
                                 vb / static_cast<double>(db.n));
  ZTestResult r;
  if (denom == 0.0) {
    r.z = 0.0;
    r.p_two_sided = 1.0;
    return r;
  }
  r.z = (da.mean - db.mean) / denom;
  r.p_two_sided = 2.0 * (1.0 - normal_cdf(std::fabs(r.z)));
  return r;
}

}  // namespace mmscope
