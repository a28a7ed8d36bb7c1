// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codegraph/evt.hpp"
#include "codegraph/feature_io.hpp"
#include "codegraph/filtering.hpp"
#include "codegraph/score_map.hpp"

namespace codegraph {

// Mann-Whitney AUROC, ties counted one half. SingleClass without both labels.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Best F1 over thresholds t in the distinct scores, predicting score >= t.
double f1_max(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Sum of (R_k - R_{k-1}) P_k over a descending sweep with tied scores
// entering together. NoPositives without a positive label.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct AuproResult {
  double value = 0.0;
  bool degenerate = false;  // constant scores or no normal pixels
};

// Per-region overlap against false-positive rate, integrated (trapezoid)
// up to fpr_limit and divided by it. Maps are [n_maps, height, width];
// regions are 8-connected components of each label map.
// NoAnomalousRegion when no label is set.
AuproResult aupro(std::span<const double> score_maps, std::span<const std::uint8_t> label_maps,
                  std::size_t n_maps, std::size_t height, std::size_t width,
                  double fpr_limit = 0.3);

// 8-connected components of one binary map; 0 marks background, regions
// are numbered from 1. Returns the region count.
std::size_t label_regions(std::span<const std::uint8_t> mask, std::size_t height,
                          std::size_t width, std::vector<std::uint32_t>& regions);

// Normal / consistent / inconsistent per patch: an anomalous patch is
// consistent when its baseline score is below the given percentile of
// the normal patches' baseline scores.
std::vector<PatchClass> classify_patches(const GroundTruth& truth,
                                         std::span<const double> baseline_scores,
                                         double percentile = 0.8);

struct CaptureDiagnostics {
  std::size_t n_normal = 0;
  std::size_t n_consistent = 0;
  std::size_t n_inconsistent = 0;
  std::size_t excluded = 0;
  std::size_t excluded_normal = 0;
  std::size_t excluded_consistent = 0;
  std::size_t excluded_inconsistent = 0;
  double capture_rate = 0.0;          // excluded_consistent / n_consistent
  double excluded_rate = 0.0;         // excluded / all patches
  double normal_excluded_rate = 0.0;  // excluded_normal / n_normal
};

CaptureDiagnostics capture_and_exclusion(const ExclusionSet& excluded, const GroundTruth& truth,
                                         std::span<const double> baseline_scores);

struct EvalReport {
  std::optional<double> auroc_cls, f1_cls, ap_cls;
  std::optional<double> auroc_seg, f1_seg, ap_seg, pro_seg;
  bool pro_degenerate = false;
  std::optional<CaptureDiagnostics> capture;

  std::string to_json() const;
};

// Metrics that are undefined for the given labels stay empty.
EvalReport evaluate(const AnomalyScoreMap& scores, const GroundTruth& truth);

}  // namespace codegraph
