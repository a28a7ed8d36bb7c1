// SPDX-License-Identifier: Apache-2.0
#include "codegraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "codegraph/error.hpp"
#include "codegraph/stats.hpp"

namespace codegraph {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    fail(ErrorCode::kDimensionMismatch, "scores and labels differ in length");
  for (double s : scores)
    if (!std::isfinite(s)) fail(ErrorCode::kNonFiniteValue, "scores must be finite");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const std::uint8_t> labels) {
  std::size_t pos = 0;
  for (auto l : labels) pos += l != 0;
  return {pos, labels.size() - pos};
}

// Indices ordered by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) fail(ErrorCode::kSingleClass, "AUROC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b + 1 < order.size() && scores[order[b + 1]] == scores[order[a]]) ++b;
    const double mid_rank = (static_cast<double>(a) + static_cast<double>(b)) / 2.0 + 1.0;
    for (std::size_t t = a; t <= b; ++t)
      if (labels[order[t]]) rank_sum += mid_rank;
    a = b + 1;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double f1_max(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) fail(ErrorCode::kSingleClass, "F1 needs both classes");
  const auto order = descending(scores);
  double best = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b < order.size() && scores[order[b]] == scores[order[a]]) {
      (labels[order[b]] ? tp : fp) += 1;
      ++b;
    }
    const double f1 = 2.0 * static_cast<double>(tp) /
                      (2.0 * static_cast<double>(tp) + static_cast<double>(fp) +
                       static_cast<double>(pos - tp));
    best = std::max(best, f1);
    a = b;
  }
  return best;
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0) fail(ErrorCode::kNoPositives, "average precision needs a positive label");
  const auto order = descending(scores);
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b < order.size() && scores[order[b]] == scores[order[a]]) {
      tp += labels[order[b]] != 0;
      ++seen;
      ++b;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    a = b;
  }
  return ap;
}

std::size_t label_regions(std::span<const std::uint8_t> mask, std::size_t height,
                          std::size_t width, std::vector<std::uint32_t>& regions) {
  if (mask.size() != height * width) fail(ErrorCode::kDimensionMismatch, "mask size mismatch");
  regions.assign(mask.size(), 0);
  std::uint32_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < mask.size(); ++s) {
    if (!mask[s] || regions[s]) continue;
    regions[s] = ++next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const auto y = static_cast<long>(p / width), x = static_cast<long>(p % width);
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          const long ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<long>(height) || nx >= static_cast<long>(width))
            continue;
          const auto q = static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
          if (mask[q] && !regions[q]) {
            regions[q] = next;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return next;
}

AuproResult aupro(std::span<const double> score_maps, std::span<const std::uint8_t> label_maps,
                  std::size_t n_maps, std::size_t height, std::size_t width, double fpr_limit) {
  check_inputs(score_maps, label_maps);
  const std::size_t per_map = height * width;
  if (score_maps.size() != n_maps * per_map)
    fail(ErrorCode::kDimensionMismatch, "score maps do not match n_maps x height x width");
  if (!(fpr_limit > 0.0 && fpr_limit <= 1.0))
    fail(ErrorCode::kInvalidArgument, "FPR limit must lie in (0, 1]");

  // Global region id per pixel (0 = normal).
  std::vector<std::uint32_t> region(score_maps.size(), 0);
  std::vector<double> region_size(1, 0.0);
  std::vector<std::uint32_t> local;
  for (std::size_t i = 0; i < n_maps; ++i) {
    const std::size_t count =
        label_regions(label_maps.subspan(i * per_map, per_map), height, width, local);
    const auto offset = static_cast<std::uint32_t>(region_size.size() - 1);
    region_size.resize(region_size.size() + count, 0.0);
    for (std::size_t p = 0; p < per_map; ++p) {
      if (local[p]) {
        region[i * per_map + p] = local[p] + offset;
        region_size[local[p] + offset] += 1.0;
      }
    }
  }
  const std::size_t n_regions = region_size.size() - 1;
  if (n_regions == 0) fail(ErrorCode::kNoAnomalousRegion, "no anomalous region in the labels");
  std::size_t n_normal = 0;
  for (auto r : region) n_normal += r == 0;

  AuproResult out;
  const auto [lo, hi] = std::minmax_element(score_maps.begin(), score_maps.end());
  out.degenerate = n_normal == 0 || *lo == *hi;

  const auto order = descending(score_maps);
  std::vector<double> hits(region_size.size(), 0.0);
  double overlap_sum = 0.0;
  std::size_t fp = 0;
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b < order.size() && score_maps[order[b]] == score_maps[order[a]]) {
      const auto r = region[order[b]];
      if (r == 0) {
        ++fp;
      } else {
        hits[r] += 1.0;
        overlap_sum += 1.0 / region_size[r];
      }
      ++b;
    }
    const double fpr = n_normal == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(n_normal);
    curve.emplace_back(fpr, overlap_sum / static_cast<double>(n_regions));
    a = b;
  }

  if (n_normal == 0) {
    out.value = curve.back().second;
    return out;
  }
  double area = 0.0;
  for (std::size_t t = 1; t < curve.size(); ++t) {
    const auto [x0, y0] = curve[t - 1];
    auto [x1, y1] = curve[t];
    if (x0 >= fpr_limit) break;
    if (x1 > fpr_limit) {
      y1 = y0 + (y1 - y0) * (fpr_limit - x0) / (x1 - x0);
      x1 = fpr_limit;
    }
    area += (x1 - x0) * (y0 + y1) / 2.0;
  }
  out.value = area / fpr_limit;
  return out;
}

std::vector<PatchClass> classify_patches(const GroundTruth& truth,
                                         std::span<const double> baseline_scores,
                                         double percentile) {
  if (baseline_scores.size() != truth.patch_labels.size())
    fail(ErrorCode::kDimensionMismatch, "baseline scores do not match the ground truth");
  std::vector<double> normal;
  for (std::size_t p = 0; p < baseline_scores.size(); ++p)
    if (!truth.patch_labels[p]) normal.push_back(baseline_scores[p]);
  const double cut = normal.empty() ? 0.0 : stats::quantile(normal, percentile);
  std::vector<PatchClass> out(baseline_scores.size(), PatchClass::kNormal);
  for (std::size_t p = 0; p < baseline_scores.size(); ++p)
    if (truth.patch_labels[p])
      out[p] = baseline_scores[p] < cut ? PatchClass::kConsistent : PatchClass::kInconsistent;
  return out;
}

CaptureDiagnostics capture_and_exclusion(const ExclusionSet& excluded, const GroundTruth& truth,
                                         std::span<const double> baseline_scores) {
  const auto classes = classify_patches(truth, baseline_scores);
  if (!excluded.mask.empty() && excluded.mask.size() != classes.size())
    fail(ErrorCode::kDimensionMismatch, "exclusion mask does not match the ground truth");
  CaptureDiagnostics d;
  for (std::size_t p = 0; p < classes.size(); ++p) {
    const bool out = !excluded.mask.empty() && excluded.mask[p];
    d.excluded += out;
    switch (classes[p]) {
      case PatchClass::kNormal: ++d.n_normal; d.excluded_normal += out; break;
      case PatchClass::kConsistent: ++d.n_consistent; d.excluded_consistent += out; break;
      case PatchClass::kInconsistent: ++d.n_inconsistent; d.excluded_inconsistent += out; break;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  d.capture_rate = ratio(d.excluded_consistent, d.n_consistent);
  d.excluded_rate = ratio(d.excluded, classes.size());
  d.normal_excluded_rate = ratio(d.excluded_normal, d.n_normal);
  return d;
}

EvalReport evaluate(const AnomalyScoreMap& scores, const GroundTruth& truth) {
  if (scores.n_images != truth.n_images || scores.grid_side != truth.grid_side)
    fail(ErrorCode::kDimensionMismatch, "score map and ground truth differ in shape");
  EvalReport report;
  const auto [img_pos, img_neg] = class_counts(truth.image_labels);
  if (img_pos > 0 && img_neg > 0) {
    report.auroc_cls = auroc(scores.image_scores, truth.image_labels);
    report.f1_cls = f1_max(scores.image_scores, truth.image_labels);
  }
  if (img_pos > 0) report.ap_cls = average_precision(scores.image_scores, truth.image_labels);
  const auto [pos, neg] = class_counts(truth.patch_labels);
  if (pos > 0 && neg > 0) {
    report.auroc_seg = auroc(scores.patch_scores, truth.patch_labels);
    report.f1_seg = f1_max(scores.patch_scores, truth.patch_labels);
  }
  if (pos > 0) {
    report.ap_seg = average_precision(scores.patch_scores, truth.patch_labels);
    const auto pro = aupro(scores.patch_scores, truth.patch_labels, truth.n_images,
                           truth.grid_side, truth.grid_side);
    report.pro_seg = pro.value;
    report.pro_degenerate = pro.degenerate;
  }
  return report;
}

std::string EvalReport::to_json() const {
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
  };
  nlohmann::json j{{"auroc_cls", opt(auroc_cls)}, {"f1_cls", opt(f1_cls)},
                   {"ap_cls", opt(ap_cls)},       {"auroc_seg", opt(auroc_seg)},
                   {"f1_seg", opt(f1_seg)},       {"ap_seg", opt(ap_seg)},
                   {"pro_seg", opt(pro_seg)},     {"pro_degenerate", pro_degenerate}};
  if (capture) {
    const auto& c = *capture;
    j["capture"] = {{"n_normal", c.n_normal},
                    {"n_consistent", c.n_consistent},
                    {"n_inconsistent", c.n_inconsistent},
                    {"excluded", c.excluded},
                    {"excluded_normal", c.excluded_normal},
                    {"excluded_consistent", c.excluded_consistent},
                    {"excluded_inconsistent", c.excluded_inconsistent},
                    {"capture_rate", c.capture_rate},
                    {"excluded_rate", c.excluded_rate},
                    {"normal_excluded_rate", c.normal_excluded_rate}};
  }
  return j.dump(1);
}

}  // namespace codegraph
