// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codegraph/feature_io.hpp"

namespace codegraph {

// Patch tokens pooled over r x r neighbourhoods; same layout as FeatureSet.
struct AggregatedFeatures {
  std::uint32_t receptive_field = 1;
  std::uint32_t n_images = 0;
  std::uint32_t n_layers = 0;
  std::uint32_t grid_side = 0;
  std::uint32_t n_channels = 0;
  std::vector<float> tokens;

  std::size_t n_patches() const noexcept { return std::size_t{grid_side} * grid_side; }

  std::span<const float> layer_tokens(std::size_t image, std::size_t layer) const noexcept {
    const std::size_t block = n_patches() * n_channels;
    return {tokens.data() + (image * n_layers + layer) * block, block};
  }

  std::span<const float> patch(std::size_t image, std::size_t layer, std::size_t m) const noexcept {
    return layer_tokens(image, layer).subspan(m * n_channels, n_channels);
  }
};

// Mean of the base tokens over the r x r window centred on each grid cell,
// clipped to the grid and normalised by the number of in-grid cells.
// r must be odd and <= grid_side (InvalidReceptiveField otherwise); r = 1
// copies the tokens unchanged.
AggregatedFeatures aggregate(const FeatureSet& fs, std::uint32_t r);

// Scales every token to unit L2 norm (zero tokens are left as is).
void normalize_tokens(AggregatedFeatures& agg);

}  // namespace codegraph
