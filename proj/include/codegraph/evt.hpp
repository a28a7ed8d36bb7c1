// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "codegraph/msm.hpp"

namespace codegraph {

// Hill tail-index estimate from the k largest of a positive sample:
// k / sum_{j<=k} ln(X_(j) / X_(k+1)), X descending. 1 <= k < n.
// DegenerateTail when the top k + 1 values coincide.
double hill_estimator(std::span<const double> samples, std::size_t k);

struct Plateau {
  std::size_t k_lo = 0;
  std::size_t k_hi = 0;
  double value = 0.0;
  double spread = 0.0;  // (max - min) / mean over the window
};

struct TailEstimate {
  std::vector<std::size_t> k_values;
  std::vector<double> alpha_hats;
  std::optional<Plateau> plateau;

  // Mean estimate over k in [k_lo, k_hi].
  double average(std::size_t k_lo, std::size_t k_hi) const;
};

// Estimates on a log-spaced grid of at most `points` values of k in
// [k_min, k_max]. The plateau is the decade-wide window (or the whole grid
// when it spans less) with the smallest spread, kept only when every
// estimate in it lies within +-tolerance of the window mean.
TailEstimate hill_plot(std::span<const double> samples, std::size_t k_min, std::size_t k_max,
                       std::size_t points = 200, double tolerance = 0.15);

// tau^(i) = ln(Z_(i+1) / Z_(i)) from ascending Beta(alpha, 1) samples
// Z = U^(1/alpha), omega per trial. Trial t uses RNG stream t.
struct SpacingSimulation {
  double alpha = 0.0;
  std::size_t omega = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> tau;  // [trials, omega - 1]

  std::size_t n_indices() const noexcept { return omega - 1; }
  std::vector<double> samples(std::size_t i) const;  // 1-based index
  double mean(std::size_t i) const;
  double variance(std::size_t i) const;
  // KS distance between tau^(i) and Exp(alpha * i).
  double ks(std::size_t i) const;
  // Delta^(i,j) = sum_{k=i}^{j-1} tau^(k), one value per trial.
  std::vector<double> cumulative(std::size_t i, std::size_t j) const;
  double correlation(std::size_t i, std::size_t j) const;
};

SpacingSimulation simulate_log_spacings(double alpha, std::size_t omega, std::size_t trials,
                                        std::uint64_t seed);

// n draws of -ln(U^(1/alpha)).
std::vector<double> negative_log_beta_samples(double alpha, std::size_t n, std::uint64_t seed);

// Mean spacing E_(k+1) - E_(k) (E_(0) = 0) of n ascending Exp(lambda)
// order statistics, for k = 0..n-1, over `trials` repetitions.
std::vector<double> exponential_spacing_means(double lambda, std::size_t n, std::size_t trials,
                                              std::uint64_t seed);

struct CouponEstimate {
  std::size_t m = 0;
  double p = 0.0;
  double classical = 0.0;    // m * H_m
  double exact = 0.0;        // absorbing-chain expectation for the mixed draw
  double coefficient = 0.0;  // H_m / a1 + a2 / a1^2
  double asymptotic = 0.0;   // m ln m / (1 + p) + p / (1 + p)^2
  double mc_mean = 0.0;
  double mc_standard_error = 0.0;
  std::size_t trials = 0;
};

// Turns until all m balls are drawn when each turn draws 2 distinct balls
// with probability p and 1 ball otherwise.
CouponEstimate coupon_collector_expected_turns(std::size_t m, double p, std::size_t trials,
                                               std::uint64_t seed);

// Mean number of uniformly random distinct-pair links over m nodes until
// at least ceil(tau * m) nodes have degree >= 1.
double simulate_link_coverage(std::size_t m, double tau, std::size_t trials, std::uint64_t seed);

struct QqResult {
  std::vector<std::pair<double, double>> pairs;  // (empirical, Beta quantile)
  bool degenerate = false;
};

// Sorted samples against Beta(a, b) quantiles at (j - 0.5) / n.
// OutOfRangeSample unless every sample lies in (0, 1].
QqResult qq_pairs(std::span<const double> samples, double a, double b);

enum class PatchClass : std::uint8_t { kNormal = 0, kConsistent = 1, kInconsistent = 2 };

std::string_view to_string(PatchClass c) noexcept;

struct GrowthCurve {
  std::string label;
  std::vector<double> mean;    // index i - 1 for i = 1..row_length-1
  std::vector<double> stddev;
  std::size_t rows = 0;
};

// Mean and standard deviation of tau^(i) over rows, distances clamped at
// kDistanceFloor. One curve per class present when classes are given
// (one entry per row), otherwise a single "all" curve.
std::vector<GrowthCurve> growth_curves(const AggregatedDistanceIndex& index,
                                       std::span<const PatchClass> classes = {});
std::vector<GrowthCurve> growth_curves(const MutualSimilarityIndex& index,
                                       std::span<const PatchClass> classes = {});

void write_hill_csv(const TailEstimate& estimate, const std::filesystem::path& path);
void write_qq_csv(const QqResult& qq, const std::filesystem::path& path);
void write_growth_csv(std::span<const GrowthCurve> curves, const std::filesystem::path& path);
void write_spacing_csv(const SpacingSimulation& sim, const std::filesystem::path& path);
void write_coupon_csv(std::span<const CouponEstimate> rows, const std::filesystem::path& path);

}  // namespace codegraph
