// SPDX-License-Identifier: Apache-2.0
#include "codegraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>

#include "codegraph/stats.hpp"

namespace codegraph {

SimilarityGraph::SimilarityGraph(std::size_t n_nodes, std::vector<Edge> edges)
    : adjacency_(n_nodes) {
  for (auto& e : edges) {
    if (e.u == e.v) fail(ErrorCode::kInvalidArgument, "self-loops are not allowed");
    if (e.u >= n_nodes || e.v >= n_nodes) fail(ErrorCode::kInvalidArgument, "edge endpoint out of range");
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
      fail(ErrorCode::kInvalidArgument, "edge weights must be finite and non-negative");
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
  for (const auto& e : edges) {
    if (!edges_.empty() && edges_.back().u == e.u && edges_.back().v == e.v)
      edges_.back().weight += e.weight;
    else
      edges_.push_back(e);
  }
  std::erase_if(edges_, [](const Edge& e) { return e.weight == 0.0; });
  for (const auto& e : edges_) {
    adjacency_[e.u].emplace_back(e.v, e.weight);
    adjacency_[e.v].emplace_back(e.u, e.weight);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

double SimilarityGraph::weight(std::uint32_t a, std::uint32_t b) const noexcept {
  const auto& adj = adjacency_[a];
  const auto it = std::lower_bound(adj.begin(), adj.end(), std::make_pair(b, -1.0));
  return it != adj.end() && it->first == b ? it->second : 0.0;
}

SimilarityGraph build_graph(const SuspiciousLinkSet& links, std::size_t n_images) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> counts;
  for (const auto& c : links.links) {
    if (c.source_image == c.target_image)
      fail(ErrorCode::kInvariantViolation, "a link joins an image to itself");
    const auto key = std::minmax(c.source_image, c.target_image);
    counts[{key.first, key.second}] += links.n_layers;
  }
  std::vector<Edge> edges;
  edges.reserve(counts.size());
  for (const auto& [key, w] : counts) edges.push_back({key.first, key.second, w});
  return SimilarityGraph(n_images, std::move(edges));
}

double cpm_objective(const SimilarityGraph& graph, std::span<const std::uint32_t> assignment,
                     double gamma) {
  if (assignment.size() != graph.n_nodes())
    fail(ErrorCode::kInvalidArgument, "assignment does not cover every node");
  double internal = 0.0;
  for (const auto& e : graph.edges())
    if (assignment[e.u] == assignment[e.v]) internal += e.weight;
  std::map<std::uint32_t, double> sizes;
  for (auto c : assignment) sizes[c] += 1.0;
  double pairs = 0.0;
  for (const auto& [c, n] : sizes) pairs += n * (n - 1.0);
  return 2.0 * internal - gamma * pairs;
}

double select_gamma(const SimilarityGraph& graph, double quantile) {
  if (graph.edges().empty()) fail(ErrorCode::kNoEdges, "the similarity graph has no edges");
  std::vector<double> w;
  w.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) w.push_back(e.weight);
  return stats::quantile(w, quantile);
}

double community_density(const SimilarityGraph& graph, std::span<const std::uint32_t> members) {
  if (members.size() < 2)
    fail(ErrorCode::kSingletonCommunity, "density is undefined for a single-node community");
  std::vector<std::uint8_t> in(graph.n_nodes(), 0);
  for (auto v : members) in.at(v) = 1;
  double ordered = 0.0;
  for (auto v : members)
    for (const auto& [u, w] : graph.neighbors(v))
      if (in[u]) ordered += w;
  const double n = static_cast<double>(members.size());
  return ordered / (n * (n - 1.0));
}

OutlierResult detect_outlier_communities(std::span<const double> densities, double k_iqr) {
  OutlierResult out;
  out.flags.assign(densities.size(), false);
  if (densities.empty()) return out;
  std::vector<double> sorted(densities.begin(), densities.end());
  std::sort(sorted.begin(), sorted.end());
  out.q1 = stats::quantile_sorted(sorted, 0.25);
  out.q3 = stats::quantile_sorted(sorted, 0.75);
  out.fence = out.q3 + k_iqr * (out.q3 - out.q1);
  for (std::size_t c = 0; c < densities.size(); ++c) out.flags[c] = densities[c] > out.fence;
  return out;
}

void flag_outlier_communities(const SimilarityGraph& graph, CommunityPartition& partition,
                              double k_iqr) {
  std::vector<double> densities;
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < partition.communities.size(); ++c) {
    auto& com = partition.communities[c];
    com.outlier = false;
    if (com.members.size() < 2) continue;
    com.density = community_density(graph, com.members);
    densities.push_back(*com.density);
    eligible.push_back(c);
  }
  const auto result = detect_outlier_communities(densities, k_iqr);
  for (std::size_t t = 0; t < eligible.size(); ++t)
    partition.communities[eligible[t]].outlier = result.flags[t];
  partition.fence = result.fence;
  partition.k_iqr = k_iqr;
}

std::vector<std::uint32_t> CommunityPartition::flagged() const {
  std::vector<std::uint32_t> out;
  for (std::size_t c = 0; c < communities.size(); ++c)
    if (communities[c].outlier) out.push_back(static_cast<std::uint32_t>(c));
  return out;
}

std::string graph_json(const SimilarityGraph& graph, const CommunityPartition* partition) {
  nlohmann::json j;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (std::size_t v = 0; v < graph.n_nodes(); ++v) {
    nlohmann::json node{{"index", v},
                        {"id", v < graph.node_ids.size() ? graph.node_ids[v] : std::to_string(v)}};
    if (partition) node["community"] = partition->assignment[v];
    nodes.push_back(node);
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges()) edges.push_back({{"u", e.u}, {"v", e.v}, {"weight", e.weight}});
  if (partition) {
    j["gamma"] = partition->gamma;
    j["quality"] = partition->quality;
    j["k_iqr"] = partition->k_iqr;
    j["fence"] = partition->fence;
    auto& coms = j["communities"] = nlohmann::json::array();
    for (std::size_t c = 0; c < partition->communities.size(); ++c) {
      const auto& com = partition->communities[c];
      coms.push_back({{"id", c},
                      {"members", com.members},
                      {"size", com.members.size()},
                      {"density", com.density ? nlohmann::json(*com.density) : nlohmann::json()},
                      {"outlier", com.outlier}});
    }
  }
  return j.dump(1);
}

}  // namespace codegraph
