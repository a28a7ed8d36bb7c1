// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace codegraph {

inline constexpr std::uint32_t kFormatVersion = 1;

// Patch and class tokens of a whole test set. Patch tokens are stored
// image-major, then layer, then row-major grid position, then channel:
// index ((i * L + l) * M + m) * C + c with M = grid_side^2.
struct FeatureSet {
  std::uint32_t n_images = 0;
  std::uint32_t n_layers = 0;
  std::uint32_t grid_side = 0;
  std::uint32_t n_channels = 0;
  std::uint32_t cls_dim = 0;
  std::vector<float> patch_tokens;
  std::vector<float> class_tokens;
  std::vector<std::string> image_ids;

  std::size_t n_patches() const noexcept { return std::size_t{grid_side} * grid_side; }

  // All M x C tokens of one (image, layer).
  std::span<const float> layer_tokens(std::size_t image, std::size_t layer) const noexcept {
    const std::size_t block = n_patches() * n_channels;
    return {patch_tokens.data() + (image * n_layers + layer) * block, block};
  }

  std::span<const float> patch(std::size_t image, std::size_t layer, std::size_t m) const noexcept {
    return layer_tokens(image, layer).subspan(m * n_channels, n_channels);
  }

  std::span<const float> class_token(std::size_t image) const noexcept {
    return {class_tokens.data() + image * cls_dim, cls_dim};
  }

  // Throws Error on any violated invariant (N >= 2, positive dims, tensor
  // sizes, unique ids, finite values).
  void validate() const;

  bool operator==(const FeatureSet&) const = default;
};

// Optional evaluation sidecar: per-patch and per-image binary labels.
struct GroundTruth {
  std::uint32_t n_images = 0;
  std::uint32_t grid_side = 0;
  std::vector<std::uint8_t> patch_labels;  // [N, S, S]
  std::vector<std::uint8_t> image_labels;  // [N]

  std::size_t n_patches() const noexcept { return std::size_t{grid_side} * grid_side; }
  std::uint8_t patch_label(std::size_t image, std::size_t m) const noexcept {
    return patch_labels[image * n_patches() + m];
  }
  void validate() const;

  bool operator==(const GroundTruth&) const = default;
};

std::string encode_feature_set(const FeatureSet& fs);
FeatureSet decode_feature_set(std::string_view bytes);
FeatureSet load_feature_set(const std::filesystem::path& path);
void write_feature_set(const FeatureSet& fs, const std::filesystem::path& path);

std::string encode_ground_truth(const GroundTruth& gt);
GroundTruth decode_ground_truth(std::string_view bytes);
GroundTruth load_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);

// 64-bit FNV-1a of a file's bytes; used to key the index cache.
std::uint64_t hash_file(const std::filesystem::path& path);
std::uint64_t hash_bytes(std::string_view bytes) noexcept;

}  // namespace codegraph
