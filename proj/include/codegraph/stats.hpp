// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace codegraph::stats {

// Linear-interpolation quantile (Hyndman-Fan type 7) of an ascending range.
// p in [0, 1]; the range must be non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

// Type-7 quantile of an unsorted sample (copies and sorts).
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> values);

// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double variance(std::span<const double> values);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
// the Exp(rate) CDF 1 - exp(-rate x).
double ks_exponential(std::span<const double> samples, double rate);

double harmonic_number(std::size_t n);

// Streaming mean/variance (Welford).
class RunningMoments {
 public:
  void add(double x) noexcept;
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace codegraph::stats
