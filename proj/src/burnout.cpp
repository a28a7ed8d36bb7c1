// SPDX-License-Identifier: Apache-2.0
#include "codegraph/burnout.hpp"

#include <json.hpp>
#include <tuple>

#include "codegraph/parallel.hpp"

namespace codegraph {

std::size_t omega_from_fraction(double fraction, std::size_t n_images, std::size_t row_length) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorCode::kInvalidArgument, "omega fraction must lie in (0, 1]");
  if (row_length < 2) fail(ErrorCode::kInvalidArgument, "ranking rows are too short for omega");
  const auto omega =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_images) - 1e-9));
  return std::clamp<std::size_t>(omega, 2, row_length);
}

std::vector<LinkCandidate> collect_link_candidates(const AggregatedDistanceIndex& index,
                                                   std::size_t omega, double alpha) {
  if (omega < 2 || omega > index.row_length)
    fail(ErrorCode::kInvalidArgument, "omega must lie in [2, row length]");
  const std::size_t per_row = omega - 1;
  std::vector<LinkCandidate> out(index.n_rows() * per_row);
  parallel_for(index.n_rows(), [&](std::size_t row) {
    const auto d = index.row_distances(row);
    const auto img = index.row_images(row);
    for (std::size_t k = 1; k < omega; ++k) {
      LinkCandidate& c = out[row * per_row + (k - 1)];
      c.source_image = static_cast<std::uint32_t>(row / index.n_patches);
      c.source_patch = static_cast<std::uint32_t>(row % index.n_patches);
      c.target_image = img[k - 1];
      c.target_rank = static_cast<std::uint32_t>(k);
      c.distance = d[k - 1];
      c.raw_ratio = endurance_ratio(d, k, omega, ZeroPolicy::kClamp);
      c.weighted_ratio = weighted_endurance_ratio(d, k, omega, alpha, ZeroPolicy::kClamp);
    }
  });
  std::sort(out.begin(), out.end(), [](const LinkCandidate& a, const LinkCandidate& b) {
    return std::tie(a.weighted_ratio, a.source_image, a.source_patch, a.target_rank) <
           std::tie(b.weighted_ratio, b.source_image, b.source_patch, b.target_rank);
  });
  return out;
}

namespace {

class CoverageTracker {
 public:
  explicit CoverageTracker(std::size_t n) : touched_(n, 0) {}
  void add(const LinkCandidate& c) {
    mark(c.source_image);
    mark(c.target_image);
  }
  double coverage() const {
    return touched_.empty() ? 0.0 : static_cast<double>(count_) / static_cast<double>(touched_.size());
  }

 private:
  void mark(std::uint32_t v) {
    if (v >= touched_.size()) fail(ErrorCode::kInvalidArgument, "link references an unknown image");
    if (!touched_[v]) {
      touched_[v] = 1;
      ++count_;
    }
  }
  std::vector<std::uint8_t> touched_;
  std::size_t count_ = 0;
};

SuspiciousLinkSet start_set(std::size_t n_images, std::size_t n_layers) {
  if (n_images < 2) fail(ErrorCode::kInvalidArgument, "link selection needs N >= 2");
  if (n_layers == 0) fail(ErrorCode::kInvalidArgument, "layer count must be positive");
  SuspiciousLinkSet set;
  set.n_images = static_cast<std::uint32_t>(n_images);
  set.n_layers = static_cast<std::uint32_t>(n_layers);
  return set;
}

}  // namespace

SuspiciousLinkSet coverage_based_selection(std::span<const LinkCandidate> sorted,
                                           double tau_cov, std::size_t n_images,
                                           std::size_t n_layers) {
  if (!(tau_cov > 0.0 && tau_cov <= 1.0))
    fail(ErrorCode::kInvalidArgument, "coverage target must lie in (0, 1]");
  SuspiciousLinkSet set = start_set(n_images, n_layers);
  const std::size_t batch = n_images * (n_images - 1) / 2;
  CoverageTracker tracker(n_images);
  std::size_t admitted = 0;
  do {
    const std::size_t stop = std::min(sorted.size(), admitted + batch);
    for (; admitted < stop; ++admitted) {
      tracker.add(sorted[admitted]);
      set.links.push_back(sorted[admitted]);
    }
    ++set.batches;
    set.coverage_achieved = tracker.coverage();
  } while (set.coverage_achieved < tau_cov && admitted < sorted.size());
  set.exhausted = set.coverage_achieved < tau_cov;
  if (!set.links.empty()) set.lambda_effective = set.links.back().weighted_ratio;
  return set;
}

SuspiciousLinkSet fixed_budget_selection(std::span<const LinkCandidate> sorted,
                                         std::size_t budget, std::size_t n_images,
                                         std::size_t n_layers) {
  SuspiciousLinkSet set = start_set(n_images, n_layers);
  CoverageTracker tracker(n_images);
  const std::size_t stop = std::min(budget, sorted.size());
  for (std::size_t t = 0; t < stop; ++t) {
    tracker.add(sorted[t]);
    set.links.push_back(sorted[t]);
  }
  set.batches = 1;
  set.coverage_achieved = tracker.coverage();
  set.exhausted = budget >= sorted.size();
  if (!set.links.empty()) set.lambda_effective = set.links.back().weighted_ratio;
  return set;
}

double coverage_of(std::span<const LinkCandidate> links, std::size_t n_images) {
  CoverageTracker tracker(n_images);
  for (const auto& c : links) tracker.add(c);
  return tracker.coverage();
}

std::string link_set_json(const SuspiciousLinkSet& set, std::span<const std::string> image_ids) {
  nlohmann::json j;
  j["n_images"] = set.n_images;
  j["n_layers"] = set.n_layers;
  j["lambda_effective"] = set.lambda_effective;
  j["coverage_achieved"] = set.coverage_achieved;
  j["batches"] = set.batches;
  j["exhausted"] = set.exhausted;
  auto& links = j["links"] = nlohmann::json::array();
  for (const auto& c : set.links) {
    const auto id = [&](std::uint32_t i) {
      return i < image_ids.size() ? image_ids[i] : std::to_string(i);
    };
    links.push_back({{"source_image", id(c.source_image)},
                     {"source_patch", c.source_patch},
                     {"target_image", id(c.target_image)},
                     {"rank", c.target_rank},
                     {"distance", c.distance},
                     {"zeta", c.raw_ratio},
                     {"zeta_weighted", c.weighted_ratio}});
  }
  return j.dump(1);
}

}  // namespace codegraph
