#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace lobkit {

// Compensated (Neumaier) accumulator for long sums of small increments.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance needs two points");
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

// One-sample Kolmogorov-Smirnov statistic against the uniform law on [0,1].
inline double ks_statistic_uniform(std::vector<double> u) {
  if (u.empty()) return 0.0;
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  return d;
}

// Critical value of the KS statistic at the given significance, using the
// Stephens small-sample correction of the asymptotic quantile.
inline double ks_critical(std::size_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("ks_critical: empty sample");
  const double k_alpha = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double sn = std::sqrt(static_cast<double>(n));
  return k_alpha / (sn + 0.12 + 0.11 / sn);
}

// Newey-West (Bartlett tapered) long-run variance of a scalar sequence.
inline double long_run_variance(std::span<const double> xs, int max_lag) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  const double n = static_cast<double>(xs.size());
  double gamma0 = 0.0;
  for (double x : xs) gamma0 += (x - m) * (x - m);
  gamma0 /= n;
  double v = gamma0;
  const int lag_cap = std::min<int>(max_lag, static_cast<int>(xs.size()) - 1);
  for (int l = 1; l <= lag_cap; ++l) {
    double g = 0.0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(l) < xs.size(); ++i)
      g += (xs[i] - m) * (xs[i + static_cast<std::size_t>(l)] - m);
    g /= n;
    v += 2.0 * (1.0 - static_cast<double>(l) / (lag_cap + 1.0)) * g;
  }
  return v;
}

}  // namespace lobkit
