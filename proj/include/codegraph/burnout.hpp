// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codegraph/error.hpp"
#include "codegraph/msm.hpp"

namespace codegraph {

// Distances below this floor are raised to it under ZeroPolicy::kClamp.
inline constexpr double kDistanceFloor = 1e-12;

enum class ZeroPolicy { kThrow, kClamp };

namespace detail {
template <class T>
double ranked(std::span<const T> sorted, std::size_t rank, const char* what) {
  if (rank == 0 || rank > sorted.size())
    fail(ErrorCode::kInvalidArgument,
         std::string(what) + " rank " + std::to_string(rank) + " outside 1.." +
             std::to_string(sorted.size()));
  return static_cast<double>(sorted[rank - 1]);
}
}  // namespace detail

// ln(d_(i+1) / d_(i)) with 1-based rank i, 1 <= i < size.
template <class T>
double growth_rate(std::span<const T> sorted, std::size_t i, ZeroPolicy policy = ZeroPolicy::kThrow) {
  double lo = detail::ranked(sorted, i, "growth");
  double hi = detail::ranked(sorted, i + 1, "growth");
  if (policy == ZeroPolicy::kClamp) {
    lo = std::max(lo, kDistanceFloor);
    hi = std::max(hi, kDistanceFloor);
  } else if (lo <= 0.0) {
    fail(ErrorCode::kZeroDistance, "d_(" + std::to_string(i) + ") is zero");
  }
  return std::log(hi / lo);
}

// d_(i)^(1 - alpha) / d_(omega) with 1-based ranks, i <= omega <= size.
// alpha = 0 is the plain endurance ratio.
template <class T>
double weighted_endurance_ratio(std::span<const T> sorted, std::size_t i, std::size_t omega,
                                double alpha, ZeroPolicy policy = ZeroPolicy::kThrow) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1)");
  if (i > omega) fail(ErrorCode::kInvalidArgument, "rank exceeds the reference index");
  double d = detail::ranked(sorted, i, "endurance");
  double ref = detail::ranked(sorted, omega, "reference");
  if (policy == ZeroPolicy::kClamp) {
    d = std::max(d, kDistanceFloor);
    ref = std::max(ref, kDistanceFloor);
  } else if (ref <= 0.0) {
    fail(ErrorCode::kZeroReference, "d_(omega) is zero");
  }
  return (alpha == 0.0 ? d : std::pow(d, 1.0 - alpha)) / ref;
}

template <class T>
double endurance_ratio(std::span<const T> sorted, std::size_t i, std::size_t omega,
                       ZeroPolicy policy = ZeroPolicy::kThrow) {
  return weighted_endurance_ratio(sorted, i, omega, 0.0, policy);
}

// ceil(fraction * N) clamped to [2, row_length].
std::size_t omega_from_fraction(double fraction, std::size_t n_images, std::size_t row_length);

// A (patch, image) pair at rank < omega of the layer-averaged ranking.
struct LinkCandidate {
  std::uint32_t source_image = 0;
  std::uint32_t source_patch = 0;
  std::uint32_t target_image = 0;
  std::uint32_t target_rank = 0;  // 1-based
  double distance = 0.0;
  double raw_ratio = 0.0;
  double weighted_ratio = 0.0;
};

// Ranks 1..omega-1 of every row, distances clamped at kDistanceFloor,
// sorted by (weighted_ratio, source_image, source_patch, target_rank).
std::vector<LinkCandidate> collect_link_candidates(const AggregatedDistanceIndex& index,
                                                   std::size_t omega, double alpha);

// Admitted pairs, in admission order. Every pair stands for one link per
// layer, so it adds n_layers to its edge weight.
struct SuspiciousLinkSet {
  std::vector<LinkCandidate> links;
  std::uint32_t n_images = 0;
  std::uint32_t n_layers = 1;
  double lambda_effective = 0.0;
  double coverage_achieved = 0.0;
  std::size_t batches = 0;
  bool exhausted = false;
};

// Adds the next N(N-1)/2 candidates per batch until the fraction of
// images touched by an admitted pair reaches tau_cov or candidates run out.
SuspiciousLinkSet coverage_based_selection(std::span<const LinkCandidate> sorted,
                                           double tau_cov, std::size_t n_images,
                                           std::size_t n_layers = 1);

// Admits exactly the first `budget` candidates (or all of them).
SuspiciousLinkSet fixed_budget_selection(std::span<const LinkCandidate> sorted,
                                         std::size_t budget, std::size_t n_images,
                                         std::size_t n_layers = 1);

double coverage_of(std::span<const LinkCandidate> links, std::size_t n_images);

std::string link_set_json(const SuspiciousLinkSet& set, std::span<const std::string> image_ids);

}  // namespace codegraph
