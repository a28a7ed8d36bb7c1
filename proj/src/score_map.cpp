// SPDX-License-Identifier: Apache-2.0
#include "codegraph/score_map.hpp"

#include <algorithm>
#include <limits>

#include "binary_io.hpp"
#include "codegraph/feature_io.hpp"

namespace codegraph {

namespace {
constexpr std::string_view kScoreMagic = "CDGS";
}

void fill_image_scores(AnomalyScoreMap& map) {
  map.image_scores.assign(map.n_images, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < map.n_images; ++i) {
    const auto scores = map.image_map(i);
    map.image_scores[i] = *std::max_element(scores.begin(), scores.end());
  }
}

std::string encode_score_map(const AnomalyScoreMap& map) {
  if (map.patch_scores.size() != map.n_images * map.n_patches() ||
      map.image_ids.size() != map.n_images)
    fail(ErrorCode::kDimensionError, "score map tensor size mismatch");
  detail::ByteWriter w;
  w.magic(kScoreMagic);
  w.u32(kFormatVersion);
  w.u32(map.n_images);
  w.u32(map.grid_side);
  std::vector<float> narrowed(map.patch_scores.begin(), map.patch_scores.end());
  w.f32s(narrowed);
  for (const auto& id : map.image_ids) w.str(id);
  return w.bytes();
}

AnomalyScoreMap decode_score_map(std::string_view bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kScoreMagic);
  if (const auto v = r.u32(); v != kFormatVersion)
    fail(ErrorCode::kVersionMismatch, "score map version " + std::to_string(v));
  AnomalyScoreMap map;
  map.n_images = r.u32();
  map.grid_side = r.u32();
  if (map.n_images == 0 || map.grid_side == 0)
    fail(ErrorCode::kDimensionError, "score map header declares a zero dimension");
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(map.n_images) * map.grid_side * map.grid_side * sizeof(float);
  if (wide > r.remaining()) fail(ErrorCode::kDimensionError, "payload shorter than the header declares");
  const auto n = static_cast<std::size_t>(wide / sizeof(float));
  std::vector<float> narrowed(n);
  r.f32s(narrowed);
  map.patch_scores.assign(narrowed.begin(), narrowed.end());
  for (std::uint32_t i = 0; i < map.n_images; ++i) map.image_ids.push_back(r.str());
  r.expect_end();
  fill_image_scores(map);
  return map;
}

void write_score_map(const AnomalyScoreMap& map, const std::filesystem::path& path) {
  detail::write_file(path, encode_score_map(map));
}

AnomalyScoreMap load_score_map(const std::filesystem::path& path) {
  return decode_score_map(detail::read_file(path));
}

}  // namespace codegraph
