// SPDX-License-Identifier: Apache-2.0
#include "codegraph/feature_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "binary_io.hpp"
#include "codegraph/error.hpp"

namespace codegraph {

namespace detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIoError, "read error on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIoError, "write error on '" + path.string() + "'");
}

}  // namespace detail

namespace {

constexpr std::string_view kFeatureMagic = "CDGF";
constexpr std::string_view kTruthMagic = "CDGT";

// Product of header fields, or DimensionError if it cannot fit in the
// payload that follows (guards against overflow from corrupted headers).
std::size_t checked_product(std::initializer_list<std::uint64_t> factors, std::size_t limit) {
  unsigned __int128 p = 1;
  for (std::uint64_t f : factors) {
    p *= f;
    if (p > limit) fail(ErrorCode::kDimensionError, "header dimensions exceed the payload size");
  }
  return static_cast<std::size_t>(p);
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) { ++i; continue; }
    if ((c & 0xE0) == 0xC0) { len = 2; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { len = 3; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { len = 4; cp = c & 0x07; }
    else return false;
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

void require_finite(std::span<const float> values, const char* what) {
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!std::isfinite(values[k]))
      fail(ErrorCode::kNonFiniteValue,
           std::string(what) + " value at flat index " + std::to_string(k) + " is not finite");
}

}  // namespace

void FeatureSet::validate() const {
  if (n_images < 2) fail(ErrorCode::kDimensionError, "a feature set needs at least 2 images");
  if (n_layers == 0 || grid_side == 0 || n_channels == 0 || cls_dim == 0)
    fail(ErrorCode::kDimensionError, "all tensor dimensions must be strictly positive");
  const std::size_t expected_patch =
      std::size_t{n_images} * n_layers * grid_side * grid_side * n_channels;
  if (patch_tokens.size() != expected_patch)
    fail(ErrorCode::kDimensionError, "patch token tensor has " +
                                         std::to_string(patch_tokens.size()) + " values, expected " +
                                         std::to_string(expected_patch));
  if (class_tokens.size() != std::size_t{n_images} * cls_dim)
    fail(ErrorCode::kDimensionError, "class token tensor size mismatch");
  if (image_ids.size() != n_images) fail(ErrorCode::kDimensionError, "image id count mismatch");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : image_ids) {
    if (!valid_utf8(id)) fail(ErrorCode::kDimensionError, "image id is not valid UTF-8");
    if (!seen.insert(id).second) fail(ErrorCode::kDimensionError, "duplicate image id '" + id + "'");
  }
  require_finite(patch_tokens, "patch token");
  require_finite(class_tokens, "class token");
}

void GroundTruth::validate() const {
  if (n_images == 0 || grid_side == 0)
    fail(ErrorCode::kDimensionError, "ground truth dimensions must be positive");
  if (patch_labels.size() != std::size_t{n_images} * grid_side * grid_side ||
      image_labels.size() != n_images)
    fail(ErrorCode::kDimensionError, "ground truth label tensor size mismatch");
  for (std::size_t i = 0; i < n_images; ++i) {
    bool any = false;
    for (std::size_t m = 0; m < n_patches(); ++m) {
      const auto v = patch_label(i, m);
      if (v > 1) fail(ErrorCode::kDimensionError, "patch labels must be 0 or 1");
      any = any || v == 1;
    }
    if (image_labels[i] > 1 || (image_labels[i] == 1) != any)
      fail(ErrorCode::kDimensionError,
           "image label of image " + std::to_string(i) + " disagrees with its patch labels");
  }
}

std::string encode_feature_set(const FeatureSet& fs) {
  fs.validate();
  detail::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u32(kFormatVersion);
  w.u32(fs.n_images);
  w.u32(fs.n_layers);
  w.u32(fs.grid_side);
  w.u32(fs.n_channels);
  w.u32(fs.cls_dim);
  w.f32s(fs.patch_tokens);
  w.f32s(fs.class_tokens);
  for (const auto& id : fs.image_ids) w.str(id);
  return w.bytes();
}

FeatureSet decode_feature_set(std::string_view bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kFeatureMagic);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    fail(ErrorCode::kVersionMismatch, "feature file version " + std::to_string(version) +
                                          ", this build reads version " +
                                          std::to_string(kFormatVersion));
  FeatureSet fs;
  fs.n_images = r.u32();
  fs.n_layers = r.u32();
  fs.grid_side = r.u32();
  fs.n_channels = r.u32();
  fs.cls_dim = r.u32();
  if (fs.n_images < 2 || fs.n_layers == 0 || fs.grid_side == 0 || fs.n_channels == 0 ||
      fs.cls_dim == 0)
    fail(ErrorCode::kDimensionError, "header declares a non-positive dimension or fewer than 2 images");
  const std::size_t floats_left = r.remaining() / sizeof(float);
  const std::size_t n_patch = checked_product(
      {fs.n_images, fs.n_layers, fs.grid_side, fs.grid_side, fs.n_channels}, floats_left);
  const std::size_t n_cls = checked_product({fs.n_images, fs.cls_dim}, floats_left);
  fs.patch_tokens.resize(n_patch);
  r.f32s(fs.patch_tokens);
  fs.class_tokens.resize(n_cls);
  r.f32s(fs.class_tokens);
  fs.image_ids.reserve(fs.n_images);
  for (std::uint32_t i = 0; i < fs.n_images; ++i) fs.image_ids.push_back(r.str());
  r.expect_end();
  fs.validate();
  return fs;
}

FeatureSet load_feature_set(const std::filesystem::path& path) {
  return decode_feature_set(detail::read_file(path));
}

void write_feature_set(const FeatureSet& fs, const std::filesystem::path& path) {
  detail::write_file(path, encode_feature_set(fs));
}

std::string encode_ground_truth(const GroundTruth& gt) {
  gt.validate();
  detail::ByteWriter w;
  w.magic(kTruthMagic);
  w.u32(kFormatVersion);
  w.u32(gt.n_images);
  w.u32(gt.grid_side);
  w.u8s(gt.patch_labels);
  w.u8s(gt.image_labels);
  return w.bytes();
}

GroundTruth decode_ground_truth(std::string_view bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kTruthMagic);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    fail(ErrorCode::kVersionMismatch, "ground truth version " + std::to_string(version));
  GroundTruth gt;
  gt.n_images = r.u32();
  gt.grid_side = r.u32();
  if (gt.n_images == 0 || gt.grid_side == 0)
    fail(ErrorCode::kDimensionError, "ground truth header declares a zero dimension");
  const std::size_t n =
      checked_product({gt.n_images, gt.grid_side, gt.grid_side}, r.remaining());
  gt.patch_labels.resize(n);
  r.u8s(gt.patch_labels);
  gt.image_labels.resize(gt.n_images);
  r.u8s(gt.image_labels);
  r.expect_end();
  gt.validate();
  return gt;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  return decode_ground_truth(detail::read_file(path));
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  detail::write_file(path, encode_ground_truth(gt));
}

std::uint64_t hash_bytes(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  return hash_bytes(detail::read_file(path));
}

}  // namespace codegraph
