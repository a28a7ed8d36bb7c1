// SPDX-License-Identifier: Apache-2.0
#include "codegraph/filtering.hpp"

#include <algorithm>
#include <json.hpp>

#include "codegraph/error.hpp"
#include "codegraph/kernels.hpp"
#include "codegraph/parallel.hpp"
#include "codegraph/stats.hpp"

namespace codegraph {

ExclusionSet ExclusionSet::none(std::uint32_t n_images, std::uint32_t n_patches) {
  ExclusionSet set;
  set.n_images = n_images;
  set.n_patches = n_patches;
  set.mask.assign(std::size_t{n_images} * n_patches, 0);
  return set;
}

std::vector<double> restricted_scores(std::span<const MutualSimilarityIndex* const> layer_tables,
                                      std::size_t k, std::span<const std::uint8_t> removed_images,
                                      std::size_t* short_rows) {
  if (layer_tables.empty()) fail(ErrorCode::kInvalidArgument, "no layer tables");
  if (k == 0) fail(ErrorCode::kInvalidArgument, "interval size K must be at least 1");
  const std::size_t rows = layer_tables[0]->n_rows();
  for (const auto* t : layer_tables)
    if (t->n_rows() != rows) fail(ErrorCode::kDimensionMismatch, "layer tables disagree on shape");
  std::vector<double> scores(rows);
  std::vector<std::uint8_t> is_short(rows, 0);
  parallel_for(rows, [&](std::size_t row) {
    double layer_sum = 0.0;
    for (const auto* t : layer_tables) {
      const auto d = t->row_distances(row);
      const auto img = t->row_images(row);
      double sum = 0.0;
      std::size_t taken = 0;
      for (std::size_t e = 0; e < d.size() && taken < k; ++e) {
        if (!removed_images.empty() && removed_images[img[e]]) continue;
        sum += d[e];
        ++taken;
      }
      if (taken < k) is_short[row] = 1;
      if (taken == 0) fail(ErrorCode::kEmptyRow, "every base image of a row was removed");
      layer_sum += sum / static_cast<double>(taken);
    }
    scores[row] = layer_sum / static_cast<double>(layer_tables.size());
  });
  if (short_rows) *short_rows = static_cast<std::size_t>(std::count(is_short.begin(), is_short.end(), 1));
  return scores;
}

std::vector<double> baseline_scores(std::span<const MutualSimilarityIndex* const> layer_tables,
                                    std::size_t k) {
  return restricted_scores(layer_tables, k, {});
}

ExclusionSet targeted_filtering(std::span<const std::vector<std::uint32_t>> communities,
                                std::span<const MutualSimilarityIndex* const> layer_tables,
                                std::size_t k, double theta_percentile) {
  if (layer_tables.empty()) fail(ErrorCode::kInvalidArgument, "no layer tables");
  if (!(theta_percentile > 0.0 && theta_percentile <= 1.0))
    fail(ErrorCode::kInvalidArgument, "theta percentile must lie in (0, 1]");
  const auto& shape = *layer_tables[0];
  ExclusionSet set = ExclusionSet::none(shape.n_images, shape.n_patches);
  if (communities.empty()) return set;

  const std::size_t m_patches = shape.n_patches;
  const auto base = baseline_scores(layer_tables, k);

  for (std::size_t c = 0; c < communities.size(); ++c) {
    CommunityFilterReport report;
    report.community = static_cast<std::uint32_t>(c);
    report.images = communities[c];
    std::vector<std::uint8_t> removed(shape.n_images, 0);
    for (auto i : report.images) {
      if (i >= shape.n_images) fail(ErrorCode::kInvalidArgument, "community holds an unknown image");
      removed[i] = 1;
    }

    std::size_t short_rows = 0;
    std::vector<double> reduced;
    try {
      reduced = restricted_scores(layer_tables, k, removed, &short_rows);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyRow) throw;
      short_rows = 1;
    }
    if (short_rows > 0) {
      report.aborted = true;
      report.message = std::string(to_string(ErrorCode::kBaseTooSmall)) + ": removing the community leaves " +
                       "fewer than K base images for some patch";
      set.communities.push_back(std::move(report));
      continue;
    }

    report.ratios.resize(base.size());
    for (std::size_t p = 0; p < base.size(); ++p)
      report.ratios[p] = std::max(reduced[p], kRatioFloor) / std::max(base[p], kRatioFloor);

    std::vector<double> outside;
    for (std::size_t p = 0; p < base.size(); ++p)
      if (!removed[p / m_patches]) outside.push_back(report.ratios[p]);
    if (outside.empty()) {
      report.aborted = true;
      report.message = std::string(to_string(ErrorCode::kBaseTooSmall)) + ": no images outside the community";
      set.communities.push_back(std::move(report));
      continue;
    }
    report.theta = stats::quantile(outside, theta_percentile);

    for (auto i : report.images) {
      for (std::size_t m = 0; m < m_patches; ++m) {
        const std::size_t p = std::size_t{i} * m_patches + m;
        if (report.ratios[p] > report.theta) {
          ++report.excluded;
          if (!set.mask[p]) {
            set.mask[p] = 1;
            set.members.push_back({i, static_cast<std::uint32_t>(m), report.community,
                                   report.ratios[p]});
          }
        }
      }
    }
    set.communities.push_back(std::move(report));
  }
  std::sort(set.members.begin(), set.members.end(), [](const auto& a, const auto& b) {
    return a.image != b.image ? a.image < b.image : a.patch < b.patch;
  });
  return set;
}

MutualSimilarityIndex apply_exclusions(const MutualSimilarityIndex& table,
                                       const AggregatedFeatures& features,
                                       const ExclusionSet& exclusions) {
  if (features.receptive_field != table.receptive_field || features.n_images != table.n_images ||
      features.n_patches() != table.n_patches)
    fail(ErrorCode::kDimensionMismatch, "features do not match the ranking table");
  MutualSimilarityIndex out = table;
  if (exclusions.empty()) return out;
  if (exclusions.n_images != table.n_images || exclusions.n_patches != table.n_patches)
    fail(ErrorCode::kDimensionMismatch, "exclusion mask does not match the ranking table");

  const std::size_t m_patches = table.n_patches;
  const std::size_t channels = features.n_channels;
  const std::size_t row_len = table.row_length;

  struct Entry {
    float distance;
    std::uint32_t image;
    std::uint32_t patch;
  };

  parallel_for(table.n_images, [&](std::size_t i) {
    std::vector<float> d(m_patches);
    std::vector<Entry> entries;
    for (std::size_t m = 0; m < m_patches; ++m) {
      const std::size_t row = table.row_index(i, m);
      const auto dist = table.row_distances(row);
      const auto img = table.row_images(row);
      const auto pat = table.row_patches(row);
      bool touched = false;
      for (std::size_t e = 0; e < dist.size() && !touched; ++e)
        touched = exclusions.contains(img[e], pat[e]);
      if (!touched) continue;

      const auto query = features.patch(i, table.layer, m);
      entries.clear();
      for (std::size_t e = 0; e < dist.size(); ++e) {
        if (!exclusions.contains(img[e], pat[e])) {
          entries.push_back({dist[e], img[e], pat[e]});
          continue;
        }
        const auto target = features.layer_tokens(img[e], table.layer);
        kernels::squared_l2_rows(query.data(), target.data(), m_patches, channels, d.data());
        bool found = false;
        Entry best{0.0f, img[e], 0};
        for (std::size_t n = 0; n < m_patches; ++n) {
          if (exclusions.contains(img[e], n)) continue;
          if (!found || d[n] < best.distance) {
            best = {d[n], img[e], static_cast<std::uint32_t>(n)};
            found = true;
          }
        }
        if (found) entries.push_back(best);
      }
      if (entries.empty())
        fail(ErrorCode::kEmptyBase, "every base patch of a row is excluded");
      std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.image < b.image);
      });
      const std::size_t base = row * row_len;
      for (std::size_t e = 0; e < entries.size(); ++e) {
        out.distances[base + e] = entries[e].distance;
        out.images[base + e] = entries[e].image;
        out.patches[base + e] = entries[e].patch;
      }
      for (std::size_t e = entries.size(); e < row_len; ++e) {
        out.distances[base + e] = 0.0f;
        out.images[base + e] = 0;
        out.patches[base + e] = 0;
      }
      out.valid_counts[row] = static_cast<std::uint32_t>(entries.size());
    }
  });
  return out;
}

std::vector<double> rescore_with_exclusions(std::span<const ScoringCell> cells,
                                            const ExclusionSet& exclusions, std::size_t k) {
  std::vector<MutualSimilarityIndex> filtered;
  filtered.reserve(cells.size());
  std::vector<const MutualSimilarityIndex*> tables;
  for (const auto& cell : cells) {
    if (exclusions.empty()) {
      tables.push_back(cell.table);
    } else {
      filtered.push_back(apply_exclusions(*cell.table, *cell.features, exclusions));
      tables.push_back(&filtered.back());
    }
  }
  return final_patch_scores(tables, k);
}

std::string exclusion_json(const ExclusionSet& set, std::span<const std::string> image_ids) {
  const auto id = [&](std::uint32_t i) {
    return i < image_ids.size() ? image_ids[i] : std::to_string(i);
  };
  nlohmann::json j;
  j["n_images"] = set.n_images;
  j["n_patches"] = set.n_patches;
  j["excluded"] = set.members.size();
  auto& members = j["members"] = nlohmann::json::array();
  for (const auto& p : set.members)
    members.push_back({{"image", id(p.image)},
                       {"image_index", p.image},
                       {"patch", p.patch},
                       {"community", p.community},
                       {"ratio", p.ratio}});
  auto& coms = j["communities"] = nlohmann::json::array();
  for (const auto& c : set.communities) {
    nlohmann::json images = nlohmann::json::array();
    for (auto i : c.images) images.push_back(id(i));
    coms.push_back({{"community", c.community},
                    {"images", images},
                    {"theta", c.theta},
                    {"excluded", c.excluded},
                    {"aborted", c.aborted},
                    {"message", c.message}});
  }
  return j.dump(1);
}

}  // namespace codegraph
