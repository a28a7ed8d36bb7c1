// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "codegraph/feature_io.hpp"
#include "codegraph/lnamd.hpp"

namespace codegraph {

struct PatchMatch {
  float distance = 0.0f;
  std::uint32_t patch = 0;
};

// min_n ||query - image_n||^2 over the rows of image_tokens (M x dim);
// ties go to the lowest patch index. DimensionMismatch on ragged input.
PatchMatch patch_to_image_distance(std::span<const float> query,
                                   std::span<const float> image_tokens, std::size_t dim);

// Per image, the candidate base images ordered by descending class-token
// cosine similarity (ties by ascending index), truncated to ceil(eta*(N-1)).
struct ScreeningPlan {
  double eta = 1.0;
  std::vector<std::vector<std::uint32_t>> neighbors;
};

ScreeningPlan build_screening_plan(const FeatureSet& fs, double eta);
ScreeningPlan build_screening_plan(std::span<const float> class_tokens, std::size_t n_images,
                                   std::size_t dim, double eta);

// One (layer, receptive field) ranking table. Row (i, m) holds, for every
// candidate base image j, d(x_{i,m}, I_j) and the matched patch of I_j,
// ascending by distance with ties broken by image index. Entries at and
// beyond valid(i, m) are dropped (filtering can shorten a row).
class MutualSimilarityIndex {
 public:
  std::uint32_t receptive_field = 1;
  std::uint32_t layer = 0;
  std::uint32_t n_images = 0;
  std::uint32_t n_patches = 0;
  std::uint32_t row_length = 0;
  std::vector<float> distances;
  std::vector<std::uint32_t> images;
  std::vector<std::uint32_t> patches;
  std::vector<std::uint32_t> valid_counts;

  std::size_t n_rows() const noexcept { return std::size_t{n_images} * n_patches; }
  std::size_t row_index(std::size_t image, std::size_t patch) const noexcept {
    return image * n_patches + patch;
  }
  std::uint32_t valid(std::size_t row) const noexcept { return valid_counts[row]; }
  std::span<const float> row_distances(std::size_t row) const noexcept {
    return {distances.data() + row * row_length, valid_counts[row]};
  }
  std::span<const std::uint32_t> row_images(std::size_t row) const noexcept {
    return {images.data() + row * row_length, valid_counts[row]};
  }
  std::span<const std::uint32_t> row_patches(std::size_t row) const noexcept {
    return {patches.data() + row * row_length, valid_counts[row]};
  }

  bool operator==(const MutualSimilarityIndex&) const = default;
};

struct MsrOptions {
  const ScreeningPlan* screening = nullptr;
  // Query images are processed in this many equal chunks. Memory knob only.
  std::uint32_t chunks = 1;
};

MutualSimilarityIndex build_msr(const AggregatedFeatures& agg, std::uint32_t layer,
                                const MsrOptions& options = {});

// K = ceil(percent * row_length), at least 1.
std::size_t interval_size(double percent, std::size_t row_length);

// Mean of the first min(K, size) entries of an ascending row.
// EmptyRow when the row is empty, InvalidArgument when K == 0.
double interval_average_score(std::span<const float> sorted, std::size_t k);
double interval_average_score(std::span<const double> sorted, std::size_t k);

// Per-patch mean over all tables of the interval average score. Tables
// must share n_images and n_patches.
std::vector<double> final_patch_scores(std::span<const MutualSimilarityIndex* const> tables,
                                       std::size_t k);

// Layer-averaged r = 1 ranking used by the burnout statistics. For each
// row, candidate j is scored by mean_l d(x^l, I_j) and candidates are
// re-sorted ascending (ties by image index). matched(row, k, l) keeps the
// per-layer matched patch of the k-th candidate.
class AggregatedDistanceIndex {
 public:
  std::uint32_t n_images = 0;
  std::uint32_t n_patches = 0;
  std::uint32_t n_layers = 0;
  std::uint32_t row_length = 0;
  std::vector<double> distances;
  std::vector<std::uint32_t> images;
  std::vector<std::uint32_t> matched;

  std::size_t n_rows() const noexcept { return std::size_t{n_images} * n_patches; }
  std::span<const double> row_distances(std::size_t row) const noexcept {
    return {distances.data() + row * row_length, row_length};
  }
  std::span<const std::uint32_t> row_images(std::size_t row) const noexcept {
    return {images.data() + row * row_length, row_length};
  }
  std::uint32_t matched_patch(std::size_t row, std::size_t k, std::size_t layer) const noexcept {
    return matched[(row * row_length + k) * n_layers + layer];
  }
};

// Tables must be r = 1, unfiltered, and share candidate sets row by row.
AggregatedDistanceIndex build_aggregated_index(
    std::span<const MutualSimilarityIndex* const> per_layer);

// CDGX cache of one table, tagged with a caller-chosen 64-bit key.
std::string encode_msr(const MutualSimilarityIndex& index, std::uint64_t key);
MutualSimilarityIndex decode_msr(std::string_view bytes, std::uint64_t expected_key);
void write_msr(const MutualSimilarityIndex& index, std::uint64_t key,
               const std::filesystem::path& path);
MutualSimilarityIndex load_msr(const std::filesystem::path& path, std::uint64_t expected_key);

}  // namespace codegraph
