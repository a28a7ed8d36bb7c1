// SPDX-License-Identifier: Apache-2.0
#include "codegraph/lnamd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "codegraph/error.hpp"
#include "codegraph/kernels.hpp"
#include "codegraph/parallel.hpp"

namespace codegraph {

AggregatedFeatures aggregate(const FeatureSet& fs, std::uint32_t r) {
  if (r == 0 || r % 2 == 0 || r > fs.grid_side)
    fail(ErrorCode::kInvalidReceptiveField,
         "receptive field " + std::to_string(r) + " must be odd and at most the grid side " +
             std::to_string(fs.grid_side));
  AggregatedFeatures out;
  out.receptive_field = r;
  out.n_images = fs.n_images;
  out.n_layers = fs.n_layers;
  out.grid_side = fs.grid_side;
  out.n_channels = fs.n_channels;
  if (r == 1) {
    out.tokens = fs.patch_tokens;
    return out;
  }
  out.tokens.assign(fs.patch_tokens.size(), 0.0f);

  const int side = static_cast<int>(fs.grid_side);
  const int half = static_cast<int>(r / 2);
  const std::size_t channels = fs.n_channels;
  const std::size_t block = fs.n_patches() * channels;

  parallel_for(std::size_t{fs.n_images} * fs.n_layers, [&](std::size_t unit) {
    const float* src = fs.patch_tokens.data() + unit * block;
    float* dst = out.tokens.data() + unit * block;
    for (int u = 0; u < side; ++u) {
      const int u0 = std::max(0, u - half), u1 = std::min(side - 1, u + half);
      for (int v = 0; v < side; ++v) {
        const int v0 = std::max(0, v - half), v1 = std::min(side - 1, v + half);
        float* cell = dst + (static_cast<std::size_t>(u) * side + v) * channels;
        for (int a = u0; a <= u1; ++a)
          for (int b = v0; b <= v1; ++b)
            kernels::accumulate(cell, src + (static_cast<std::size_t>(a) * side + b) * channels,
                                channels);
        const auto count = static_cast<float>((u1 - u0 + 1) * (v1 - v0 + 1));
        for (std::size_t c = 0; c < channels; ++c) cell[c] /= count;
      }
    }
  });
  return out;
}

void normalize_tokens(AggregatedFeatures& agg) {
  const std::size_t channels = agg.n_channels;
  for (std::size_t off = 0; off < agg.tokens.size(); off += channels) {
    float* t = agg.tokens.data() + off;
    double norm2 = 0.0;
    for (std::size_t c = 0; c < channels; ++c) norm2 += double{t[c]} * t[c];
    if (norm2 > 0.0) kernels::scale(t, static_cast<float>(1.0 / std::sqrt(norm2)), channels);
  }
}

}  // namespace codegraph
