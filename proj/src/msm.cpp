// SPDX-License-Identifier: Apache-2.0
#include "codegraph/msm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "codegraph/error.hpp"
#include "codegraph/kernels.hpp"
#include "codegraph/parallel.hpp"

namespace codegraph {

namespace {

constexpr std::string_view kIndexMagic = "CDGX";

struct Entry {
  float distance;
  std::uint32_t image;
  std::uint32_t patch;
};

bool entry_less(const Entry& a, const Entry& b) noexcept {
  return a.distance < b.distance || (a.distance == b.distance && a.image < b.image);
}

PatchMatch argmin(std::span<const float> d) noexcept {
  PatchMatch best{d[0], 0};
  for (std::size_t n = 1; n < d.size(); ++n)
    if (d[n] < best.distance) best = {d[n], static_cast<std::uint32_t>(n)};
  return best;
}

template <class T>
double mean_of_prefix(std::span<const T> sorted, std::size_t k) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "interval size K must be at least 1");
  if (sorted.empty()) fail(ErrorCode::kEmptyRow, "every entry of the ranking row is excluded");
  const std::size_t n = std::min(k, sorted.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) sum += static_cast<double>(sorted[t]);
  return sum / static_cast<double>(n);
}

}  // namespace

PatchMatch patch_to_image_distance(std::span<const float> query,
                                   std::span<const float> image_tokens, std::size_t dim) {
  if (dim == 0 || query.size() != dim || image_tokens.empty() || image_tokens.size() % dim != 0)
    fail(ErrorCode::kDimensionMismatch, "query and image tokens disagree on channel count");
  const std::size_t m = image_tokens.size() / dim;
  std::vector<float> d(m);
  kernels::squared_l2_rows(query.data(), image_tokens.data(), m, dim, d.data());
  return argmin(d);
}

ScreeningPlan build_screening_plan(const FeatureSet& fs, double eta) {
  return build_screening_plan(fs.class_tokens, fs.n_images, fs.cls_dim, eta);
}

ScreeningPlan build_screening_plan(std::span<const float> class_tokens, std::size_t n_images,
                                   std::size_t dim, double eta) {
  if (!(eta > 0.0 && eta <= 1.0))
    fail(ErrorCode::kInvalidEta, "eta must lie in (0, 1], got " + std::to_string(eta));
  if (n_images < 2 || dim == 0 || class_tokens.size() != n_images * dim)
    fail(ErrorCode::kDimensionMismatch, "class token tensor does not match N x C_cls");
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(eta * static_cast<double>(n_images - 1) - 1e-9)));

  std::vector<double> norms(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += double{class_tokens[i * dim + c]} * class_tokens[i * dim + c];
    norms[i] = std::sqrt(s);
  }

  ScreeningPlan plan;
  plan.eta = eta;
  plan.neighbors.resize(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    std::vector<std::pair<double, std::uint32_t>> sims;
    for (std::size_t j = 0; j < n_images; ++j) {
      if (j == i) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < dim; ++c)
        dot += double{class_tokens[i * dim + c]} * class_tokens[j * dim + c];
      const double denom = norms[i] * norms[j];
      sims.emplace_back(denom > 0.0 ? dot / denom : 0.0, static_cast<std::uint32_t>(j));
    }
    std::stable_sort(sims.begin(), sims.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t t = 0; t < keep; ++t) plan.neighbors[i].push_back(sims[t].second);
  }
  return plan;
}

MutualSimilarityIndex build_msr(const AggregatedFeatures& agg, std::uint32_t layer,
                                const MsrOptions& options) {
  if (layer >= agg.n_layers)
    fail(ErrorCode::kInvalidArgument, "layer " + std::to_string(layer) + " out of range");
  if (agg.n_images < 2) fail(ErrorCode::kDimensionMismatch, "mutual scoring needs N >= 2");
  if (options.chunks == 0) fail(ErrorCode::kInvalidArgument, "chunk count must be positive");
  if (agg.tokens.size() != std::size_t{agg.n_images} * agg.n_layers * agg.n_patches() * agg.n_channels)
    fail(ErrorCode::kDimensionMismatch, "aggregated token tensor has the wrong size");

  const std::size_t n_images = agg.n_images;
  const std::size_t m_patches = agg.n_patches();
  const std::size_t channels = agg.n_channels;

  std::vector<std::vector<std::uint32_t>> candidates(n_images);
  if (options.screening) {
    if (options.screening->neighbors.size() != n_images)
      fail(ErrorCode::kDimensionMismatch, "screening plan covers a different image count");
    candidates = options.screening->neighbors;
    for (std::size_t i = 0; i < n_images; ++i) {
      if (candidates[i].size() != candidates[0].size() || candidates[i].empty())
        fail(ErrorCode::kDimensionMismatch, "screening lists must share one non-zero length");
      for (auto j : candidates[i])
        if (j == i || j >= n_images)
          fail(ErrorCode::kDimensionMismatch, "screening list holds an invalid image");
    }
  } else {
    for (std::size_t i = 0; i < n_images; ++i)
      for (std::size_t j = 0; j < n_images; ++j)
        if (j != i) candidates[i].push_back(static_cast<std::uint32_t>(j));
  }

  MutualSimilarityIndex index;
  index.receptive_field = agg.receptive_field;
  index.layer = layer;
  index.n_images = agg.n_images;
  index.n_patches = static_cast<std::uint32_t>(m_patches);
  index.row_length = static_cast<std::uint32_t>(candidates[0].size());
  const std::size_t row_len = index.row_length;
  index.distances.resize(index.n_rows() * row_len);
  index.images.resize(index.n_rows() * row_len);
  index.patches.resize(index.n_rows() * row_len);
  index.valid_counts.assign(index.n_rows(), index.row_length);

  const std::size_t chunks = std::min<std::size_t>(options.chunks, n_images);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * n_images / chunks;
    const std::size_t end = (c + 1) * n_images / chunks;
    parallel_for(end - begin, [&](std::size_t offset) {
      const std::size_t i = begin + offset;
      const auto query = agg.layer_tokens(i, layer);
      std::vector<Entry> rows(m_patches * row_len);
      std::vector<float> d(m_patches);
      for (std::size_t t = 0; t < row_len; ++t) {
        const std::uint32_t j = candidates[i][t];
        const auto target = agg.layer_tokens(j, layer);
        for (std::size_t m = 0; m < m_patches; ++m) {
          kernels::squared_l2_rows(query.data() + m * channels, target.data(), m_patches,
                                   channels, d.data());
          const PatchMatch best = argmin(d);
          rows[m * row_len + t] = {best.distance, j, best.patch};
        }
      }
      for (std::size_t m = 0; m < m_patches; ++m) {
        Entry* row = rows.data() + m * row_len;
        std::sort(row, row + row_len, entry_less);
        const std::size_t base = index.row_index(i, m) * row_len;
        for (std::size_t t = 0; t < row_len; ++t) {
          index.distances[base + t] = row[t].distance;
          index.images[base + t] = row[t].image;
          index.patches[base + t] = row[t].patch;
        }
      }
    });
  }
  return index;
}

std::size_t interval_size(double percent, std::size_t row_length) {
  if (!(percent > 0.0 && percent <= 1.0))
    fail(ErrorCode::kInvalidArgument, "interval percent must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(percent * static_cast<double>(row_length) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(row_length, 1));
}

double interval_average_score(std::span<const float> sorted, std::size_t k) {
  return mean_of_prefix(sorted, k);
}

double interval_average_score(std::span<const double> sorted, std::size_t k) {
  return mean_of_prefix(sorted, k);
}

std::vector<double> final_patch_scores(std::span<const MutualSimilarityIndex* const> tables,
                                       std::size_t k) {
  if (tables.empty()) fail(ErrorCode::kInvalidArgument, "no ranking tables to score");
  const std::size_t rows = tables[0]->n_rows();
  for (const auto* t : tables)
    if (t->n_images != tables[0]->n_images || t->n_patches != tables[0]->n_patches)
      fail(ErrorCode::kDimensionMismatch, "ranking tables disagree on shape");
  std::vector<double> scores(rows);
  parallel_for(rows, [&](std::size_t row) {
    double sum = 0.0;
    for (const auto* t : tables) sum += interval_average_score(t->row_distances(row), k);
    scores[row] = sum / static_cast<double>(tables.size());
  });
  return scores;
}

AggregatedDistanceIndex build_aggregated_index(
    std::span<const MutualSimilarityIndex* const> per_layer) {
  if (per_layer.empty()) fail(ErrorCode::kInvalidArgument, "no layer tables to aggregate");
  const auto& first = *per_layer[0];
  for (const auto* t : per_layer) {
    if (t->n_images != first.n_images || t->n_patches != first.n_patches ||
        t->row_length != first.row_length)
      fail(ErrorCode::kDimensionMismatch, "layer tables disagree on shape");
    if (t->receptive_field != 1)
      fail(ErrorCode::kInvalidArgument, "aggregated distances use r = 1 tables only");
    for (auto v : t->valid_counts)
      if (v != t->row_length)
        fail(ErrorCode::kInvalidArgument, "aggregated distances need unfiltered tables");
  }

  AggregatedDistanceIndex out;
  out.n_images = first.n_images;
  out.n_patches = first.n_patches;
  out.n_layers = static_cast<std::uint32_t>(per_layer.size());
  out.row_length = first.row_length;
  const std::size_t row_len = out.row_length;
  const std::size_t n_layers = out.n_layers;
  out.distances.resize(out.n_rows() * row_len);
  out.images.resize(out.n_rows() * row_len);
  out.matched.resize(out.n_rows() * row_len * n_layers);

  parallel_for(out.n_images, [&](std::size_t i) {
    std::vector<double> sum(out.n_images);
    std::vector<std::uint32_t> seen(out.n_images);
    std::vector<std::uint32_t> match(std::size_t{out.n_images} * n_layers);
    std::vector<std::pair<double, std::uint32_t>> order(row_len);
    for (std::size_t m = 0; m < out.n_patches; ++m) {
      const std::size_t row = i * out.n_patches + m;
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0u);
      for (std::size_t l = 0; l < n_layers; ++l) {
        const auto d = per_layer[l]->row_distances(row);
        const auto img = per_layer[l]->row_images(row);
        const auto pat = per_layer[l]->row_patches(row);
        for (std::size_t t = 0; t < row_len; ++t) {
          sum[img[t]] += d[t];
          ++seen[img[t]];
          match[img[t] * n_layers + l] = pat[t];
        }
      }
      const auto img0 = first.row_images(row);
      for (std::size_t t = 0; t < row_len; ++t) {
        if (seen[img0[t]] != n_layers)
          fail(ErrorCode::kDimensionMismatch, "layer tables hold different candidate sets");
        order[t] = {sum[img0[t]] / static_cast<double>(n_layers), img0[t]};
      }
      std::sort(order.begin(), order.end());
      for (std::size_t t = 0; t < row_len; ++t) {
        out.distances[row * row_len + t] = order[t].first;
        out.images[row * row_len + t] = order[t].second;
        for (std::size_t l = 0; l < n_layers; ++l)
          out.matched[(row * row_len + t) * n_layers + l] = match[order[t].second * n_layers + l];
      }
    }
  });
  return out;
}

std::string encode_msr(const MutualSimilarityIndex& index, std::uint64_t key) {
  detail::ByteWriter w;
  w.magic(kIndexMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(key));
  w.u32(static_cast<std::uint32_t>(key >> 32));
  w.u32(index.receptive_field);
  w.u32(index.layer);
  w.u32(index.n_images);
  w.u32(index.n_patches);
  w.u32(index.row_length);
  w.f32s(index.distances);
  for (auto v : index.images) w.u32(v);
  for (auto v : index.patches) w.u32(v);
  for (auto v : index.valid_counts) w.u32(v);
  return w.bytes();
}

MutualSimilarityIndex decode_msr(std::string_view bytes, std::uint64_t expected_key) {
  detail::ByteReader r(bytes);
  r.expect_magic(kIndexMagic);
  if (const auto v = r.u32(); v != kFormatVersion)
    fail(ErrorCode::kVersionMismatch, "index cache version " + std::to_string(v));
  const std::uint64_t lo = r.u32();
  const std::uint64_t key = lo | (std::uint64_t{r.u32()} << 32);
  if (key != expected_key) fail(ErrorCode::kVersionMismatch, "index cache key mismatch");
  MutualSimilarityIndex index;
  index.receptive_field = r.u32();
  index.layer = r.u32();
  index.n_images = r.u32();
  index.n_patches = r.u32();
  index.row_length = r.u32();
  const auto declared = static_cast<unsigned __int128>(index.n_rows()) * index.row_length;
  if (declared * 12 + static_cast<unsigned __int128>(index.n_rows()) * 4 != r.remaining())
    fail(ErrorCode::kDimensionError, "index cache payload does not match its header");
  const auto n = static_cast<std::size_t>(declared);
  index.distances.resize(n);
  r.f32s(index.distances);
  index.images.resize(n);
  for (auto& v : index.images) v = r.u32();
  index.patches.resize(n);
  for (auto& v : index.patches) v = r.u32();
  index.valid_counts.resize(index.n_rows());
  for (auto& v : index.valid_counts) v = r.u32();
  r.expect_end();
  return index;
}

void write_msr(const MutualSimilarityIndex& index, std::uint64_t key,
               const std::filesystem::path& path) {
  detail::write_file(path, encode_msr(index, key));
}

MutualSimilarityIndex load_msr(const std::filesystem::path& path, std::uint64_t expected_key) {
  return decode_msr(detail::read_file(path), expected_key);
}

}  // namespace codegraph
