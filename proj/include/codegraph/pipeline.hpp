// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codegraph/burnout.hpp"
#include "codegraph/feature_io.hpp"
#include "codegraph/filtering.hpp"
#include "codegraph/graph.hpp"
#include "codegraph/lnamd.hpp"
#include "codegraph/metrics.hpp"
#include "codegraph/msm.hpp"
#include "codegraph/score_map.hpp"

namespace codegraph {

enum class LinkSelection { kCoverage, kFixedBudget };

struct PipelineConfig {
  std::filesystem::path features;
  std::filesystem::path ground_truth;  // empty: no evaluation
  std::filesystem::path output;
  std::filesystem::path cache_dir;     // empty: no index cache

  double k_percent = 0.10;
  double omega_fraction = 0.3;
  double alpha = 0.2;
  double tau_cov = 0.95;
  double gamma_quantile = 0.25;
  double k_iqr = 4.5;
  double theta_percentile = 99.0;
  std::vector<std::uint32_t> r_set{1, 3, 5};
  double eta = 1.0;
  std::uint32_t chunks = 1;
  std::uint64_t seed = 0;
  bool normalize_features = false;
  LinkSelection selection = LinkSelection::kCoverage;
  std::uint64_t link_budget = 0;  // fixed-budget selection; 0 means N(N-1)/2

  // ConfigError on an unknown key or malformed value.
  void set(std::string_view key, std::string_view value);
  // key=value lines; '#' starts a comment.
  void merge_text(std::string_view text);
  void merge_file(const std::filesystem::path& path);
  // ConfigError on any out-of-range field.
  void validate() const;
  std::string to_text() const;
};

std::string to_string(LinkSelection selection);

// Outcome of the detection stages for one parameter setting.
struct Detection {
  std::size_t omega = 0;
  std::size_t candidates = 0;
  SuspiciousLinkSet links;
  SimilarityGraph graph;
  CommunityPartition partition;
  bool graph_empty = true;
};

struct RunResult {
  Detection detection;
  ExclusionSet exclusions;
  AnomalyScoreMap scores;
  AnomalyScoreMap baseline;
  std::optional<EvalReport> report;
};

// Holds the aggregated features and similarity tables of one feature set.
// Detection and filtering can be rerun with different parameters without
// rebuilding the tables; only fields that shape the tables (r_set, eta,
// chunks, normalize_features, k_percent) are fixed at construction.
class Engine {
 public:
  Engine(FeatureSet features, const PipelineConfig& config, std::uint64_t feature_hash = 0);

  const FeatureSet& features() const noexcept { return features_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t row_length() const noexcept { return row_length_; }
  const AggregatedDistanceIndex& aggregated_index() const noexcept { return aggregated_index_; }
  std::vector<const MutualSimilarityIndex*> tables() const;
  std::vector<const MutualSimilarityIndex*> tables_at(std::uint32_t r) const;
  std::size_t cache_hits() const noexcept { return cache_hits_; }

  AnomalyScoreMap baseline() const;
  Detection detect(const PipelineConfig& config) const;
  ExclusionSet filter(const Detection& detection, const PipelineConfig& config) const;
  AnomalyScoreMap rescore(const ExclusionSet& exclusions) const;
  RunResult run(const PipelineConfig& config, const GroundTruth* truth = nullptr) const;

 private:
  AnomalyScoreMap to_map(std::vector<double> scores) const;

  FeatureSet features_;
  std::vector<std::uint32_t> r_set_;
  std::vector<std::unique_ptr<AggregatedFeatures>> aggregated_;           // per r
  std::vector<std::vector<std::unique_ptr<MutualSimilarityIndex>>> tables_;  // [r][layer]
  AggregatedDistanceIndex aggregated_index_;
  std::size_t k_ = 1;
  std::size_t row_length_ = 0;
  std::size_t cache_hits_ = 0;
};

// Full pipeline from config paths; writes every artefact into config.output.
RunResult run_pipeline(const PipelineConfig& config);
// Mutual scoring only; no detection, no filtering.
AnomalyScoreMap run_baseline(const PipelineConfig& config);

void write_run_outputs(const PipelineConfig& config, const RunResult& result,
                       std::uint64_t feature_hash);
std::string image_scores_json(const AnomalyScoreMap& map);

}  // namespace codegraph
