// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codegraph/lnamd.hpp"
#include "codegraph/msm.hpp"

namespace codegraph {

struct ExcludedPatch {
  std::uint32_t image = 0;
  std::uint32_t patch = 0;
  std::uint32_t community = 0;
  double ratio = 0.0;
};

struct CommunityFilterReport {
  std::uint32_t community = 0;
  std::vector<std::uint32_t> images;
  double theta = 0.0;
  std::size_t excluded = 0;
  bool aborted = false;
  std::string message;
  std::vector<double> ratios;  // r(p) for every patch, row-major [N, M]
};

// The patches removed from the base set, with per-community provenance.
struct ExclusionSet {
  std::uint32_t n_images = 0;
  std::uint32_t n_patches = 0;
  std::vector<std::uint8_t> mask;  // [N, M]
  std::vector<ExcludedPatch> members;
  std::vector<CommunityFilterReport> communities;

  bool empty() const noexcept { return members.empty(); }
  bool contains(std::size_t image, std::size_t patch) const noexcept {
    return !mask.empty() && mask[image * n_patches + patch] != 0;
  }
  static ExclusionSet none(std::uint32_t n_images, std::uint32_t n_patches);
};

// Score floor used in r(p) so zero-distance rows give a finite ratio.
inline constexpr double kRatioFloor = 1e-12;

// Per patch, the layer mean of the K-smallest mean of the r = 1 rows after
// dropping entries whose target image is marked in removed_images (empty
// span: nothing removed). Rows left with fewer than K entries set
// *short_rows (when given) and average what remains.
std::vector<double> restricted_scores(std::span<const MutualSimilarityIndex* const> layer_tables,
                                      std::size_t k, std::span<const std::uint8_t> removed_images,
                                      std::size_t* short_rows = nullptr);

std::vector<double> baseline_scores(std::span<const MutualSimilarityIndex* const> layer_tables,
                                    std::size_t k);

// For each flagged community C: r(p) = a_{B\C}(p) / a_B(p), theta = the
// given percentile of r over patches of images outside C, and the patches
// of C's images with r > theta are excluded. A community whose removal
// leaves some row with fewer than K entries is skipped (aborted report).
ExclusionSet targeted_filtering(std::span<const std::vector<std::uint32_t>> communities,
                                std::span<const MutualSimilarityIndex* const> layer_tables,
                                std::size_t k, double theta_percentile = 0.99);

// Copy of `table` with excluded base patches invalidated: an entry whose
// matched patch is excluded is re-matched to the nearest remaining patch of
// its image (dropped when none remain) and the row re-sorted.
// EmptyBase when a row loses every entry.
MutualSimilarityIndex apply_exclusions(const MutualSimilarityIndex& table,
                                       const AggregatedFeatures& features,
                                       const ExclusionSet& exclusions);

struct ScoringCell {
  const AggregatedFeatures* features = nullptr;
  const MutualSimilarityIndex* table = nullptr;
};

// final_patch_scores over the cells after apply_exclusions.
std::vector<double> rescore_with_exclusions(std::span<const ScoringCell> cells,
                                            const ExclusionSet& exclusions, std::size_t k);

std::string exclusion_json(const ExclusionSet& set, std::span<const std::string> image_ids);

}  // namespace codegraph
