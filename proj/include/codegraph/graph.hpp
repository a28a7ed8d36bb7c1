// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codegraph/burnout.hpp"

namespace codegraph {

struct Edge {
  std::uint32_t u = 0;  // u < v
  std::uint32_t v = 0;
  double weight = 0.0;
};

// Weighted undirected image graph without self-loops.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;
  // Merges duplicate (u, v) entries by summing weights; drops zero weights.
  SimilarityGraph(std::size_t n_nodes, std::vector<Edge> edges);

  std::size_t n_nodes() const noexcept { return adjacency_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::pair<std::uint32_t, double>>& neighbors(std::size_t v) const noexcept {
    return adjacency_[v];
  }
  double weight(std::uint32_t a, std::uint32_t b) const noexcept;

  std::vector<std::string> node_ids;

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency_;
};

// w_ij = number of admitted links between i and j in either direction.
SimilarityGraph build_graph(const SuspiciousLinkSet& links, std::size_t n_images);

// Sum over ordered intra-community pairs i != j of (w_ij - gamma).
double cpm_objective(const SimilarityGraph& graph, std::span<const std::uint32_t> assignment,
                     double gamma);

// 25th-percentile (type 7) edge weight by default. NoEdges on an empty graph.
double select_gamma(const SimilarityGraph& graph, double quantile = 0.25);

struct Community {
  std::vector<std::uint32_t> members;
  std::optional<double> density;  // absent for singletons
  bool outlier = false;
};

struct CommunityPartition {
  std::vector<std::uint32_t> assignment;
  std::vector<Community> communities;
  double gamma = 0.0;
  double quality = 0.0;
  double fence = 0.0;
  double k_iqr = 0.0;

  std::vector<std::uint32_t> flagged() const;
};

// Leiden optimisation of the CPM objective. Communities are numbered by
// their smallest member and are connected in the graph.
CommunityPartition leiden_cpm(const SimilarityGraph& graph, double gamma, std::uint64_t seed);

// Ordered-pair intra weight over n_C (n_C - 1). SingletonCommunity if n_C < 2.
double community_density(const SimilarityGraph& graph, std::span<const std::uint32_t> members);

struct OutlierResult {
  std::vector<bool> flags;
  double q1 = 0.0;
  double q3 = 0.0;
  double fence = 0.0;
};

// Flags densities strictly above Q3 + k_iqr * IQR (type-7 quantiles).
OutlierResult detect_outlier_communities(std::span<const double> densities, double k_iqr);

// Fills densities and outlier flags of every community with n_C > 1.
void flag_outlier_communities(const SimilarityGraph& graph, CommunityPartition& partition,
                              double k_iqr);

std::string graph_json(const SimilarityGraph& graph, const CommunityPartition* partition);

}  // namespace codegraph
