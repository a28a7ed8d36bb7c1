// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace codegraph {

// Final per-patch anomaly scores ([N, S, S], row-major) and image scores.
struct AnomalyScoreMap {
  std::uint32_t n_images = 0;
  std::uint32_t grid_side = 0;
  std::vector<double> patch_scores;
  std::vector<double> image_scores;
  std::vector<std::string> image_ids;

  std::size_t n_patches() const noexcept { return std::size_t{grid_side} * grid_side; }
  std::span<const double> image_map(std::size_t image) const noexcept {
    return {patch_scores.data() + image * n_patches(), n_patches()};
  }

  bool operator==(const AnomalyScoreMap&) const = default;
};

// Image score = max over the image's patch scores.
void fill_image_scores(AnomalyScoreMap& map);

// CDGS file: magic "CDGS", u32 version, u32 N, u32 S, N*S*S little-endian
// f32 scores, then N length-prefixed UTF-8 ids. Scores are narrowed to f32.
std::string encode_score_map(const AnomalyScoreMap& map);
AnomalyScoreMap decode_score_map(std::string_view bytes);
void write_score_map(const AnomalyScoreMap& map, const std::filesystem::path& path);
AnomalyScoreMap load_score_map(const std::filesystem::path& path);

}  // namespace codegraph
