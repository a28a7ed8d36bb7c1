#include <doctest.h>

#include "codegraph/error.hpp"
#include "codegraph/filtering.hpp"
#include "support.hpp"

using namespace codegraph;

namespace {

// Random features where images 0..q-1 share one nearly identical 2x2 block.
FeatureSet with_clique(CounterRng& rng, std::uint32_t n, std::uint32_t q) {
  auto fs = support::random_features(rng, n, 2, 4, 6);
  std::vector<float> plant(6);
  for (std::uint32_t l = 0; l < 2; ++l) {
    for (auto& x : plant) x = static_cast<float>(20.0 + rng.normal());
    for (std::uint32_t i = 0; i < q; ++i)
      for (std::size_t m : {5u, 6u, 9u, 10u})
        for (std::size_t c = 0; c < 6; ++c)
          fs.patch_tokens[((i * 2 + l) * 16 + m) * 6 + c] = plant[c] + static_cast<float>(0.01 * rng.normal());
  }
  return fs;
}

struct Built {
  AggregatedFeatures agg;
  std::vector<MutualSimilarityIndex> tables;
  std::vector<const MutualSimilarityIndex*> ptrs;
  std::vector<ScoringCell> cells;
};

Built build(const FeatureSet& fs) {
  Built b;
  b.agg = aggregate(fs, 1);
  for (std::uint32_t l = 0; l < fs.n_layers; ++l) b.tables.push_back(build_msr(b.agg, l));
  for (const auto& t : b.tables) {
    b.ptrs.push_back(&t);
    b.cells.push_back({&b.agg, &t});
  }
  return b;
}

}  // namespace

TEST_CASE("ratios are at least one and exclusions stay inside the community") {
  CounterRng rng(3);
  const auto fs = with_clique(rng, 12, 4);
  const auto b = build(fs);
  const std::vector<std::vector<std::uint32_t>> communities{{0, 1, 2, 3}};
  const auto ex = targeted_filtering(communities, b.ptrs, 2);
  REQUIRE(ex.communities.size() == 1u);
  REQUIRE_FALSE(ex.communities[0].aborted);
  for (double r : ex.communities[0].ratios) CHECK(r >= 1.0);
  CHECK_FALSE(ex.empty());
  for (const auto& m : ex.members) {
    CHECK(m.image < 4u);
    CHECK(m.ratio > ex.communities[0].theta);
  }
  for (std::uint32_t i = 0; i < 4; ++i)
    for (std::size_t m : {5u, 6u, 9u, 10u}) CHECK(ex.contains(i, m));
}

TEST_CASE("patches whose nearest matches lie outside the community keep ratio one") {
  CounterRng rng(4);
  const auto fs = with_clique(rng, 10, 3);
  const auto b = build(fs);
  const std::vector<std::vector<std::uint32_t>> communities{{0, 1, 2}};
  const std::size_t k = 2;
  const auto ex = targeted_filtering(communities, b.ptrs, k);
  const auto& ratios = ex.communities[0].ratios;
  for (std::size_t row = 0; row < b.tables[0].n_rows(); ++row) {
    bool outside = true;
    for (const auto* t : b.ptrs)
      for (std::size_t a = 0; a < k; ++a) outside = outside && t->row_images(row)[a] >= 3;
    if (outside) CHECK(ratios[row] == 1.0);
  }
}

TEST_CASE("an empty exclusion set reproduces the plain scores bitwise") {
  CounterRng rng(5);
  const auto fs = support::random_features(rng, 6, 2, 3, 4);
  const auto b = build(fs);
  const auto none = ExclusionSet::none(6, 9);
  CHECK(rescore_with_exclusions(b.cells, none, 2) == final_patch_scores(b.ptrs, 2));
  const std::vector<std::vector<std::uint32_t>> no_communities;
  CHECK(targeted_filtering(no_communities, b.ptrs, 2).empty());
}

TEST_CASE("rescoring never lowers a score and lifts the planted patches") {
  CounterRng rng(6);
  const auto fs = with_clique(rng, 12, 4);
  const auto b = build(fs);
  const std::vector<std::vector<std::uint32_t>> communities{{0, 1, 2, 3}};
  const auto ex = targeted_filtering(communities, b.ptrs, 2);
  const auto before = final_patch_scores(b.ptrs, 2);
  const auto after = rescore_with_exclusions(b.cells, ex, 2);
  for (std::size_t p = 0; p < before.size(); ++p) CHECK(after[p] >= before[p]);
  for (std::size_t m : {5u, 6u, 9u, 10u}) CHECK(after[m] > 2.0 * before[m]);
}

TEST_CASE("excluding the only zero-distance match strictly raises the score") {
  CounterRng rng(7);
  auto fs = support::random_features(rng, 4, 1, 3, 3);
  for (std::size_t c = 0; c < 3; ++c) fs.patch_tokens[(1 * 9 + 4) * 3 + c] = fs.patch_tokens[4 * 3 + c];
  const auto b = build(fs);
  CHECK(b.tables[0].row_distances(4)[0] == 0.0f);
  auto ex = ExclusionSet::none(4, 9);
  ex.mask[1 * 9 + 4] = 1;
  ex.members.push_back({1, 4, 0, 0.0});
  const auto before = final_patch_scores(b.ptrs, 1);
  const auto after = rescore_with_exclusions(b.cells, ex, 1);
  CHECK(after[4] > before[4]);
}

TEST_CASE("exclusions re-match to the nearest remaining patch") {
  CounterRng rng(8);
  const auto fs = support::random_features(rng, 5, 1, 3, 2);
  const auto b = build(fs);
  auto ex = ExclusionSet::none(5, 9);
  for (std::size_t p = 0; p < ex.mask.size(); ++p)
    if (rng.uniform() < 0.4 && p % 9 != 0) {
      ex.mask[p] = 1;
      ex.members.push_back({static_cast<std::uint32_t>(p / 9), static_cast<std::uint32_t>(p % 9), 0, 0.0});
    }
  const auto table = apply_exclusions(b.tables[0], b.agg, ex);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t m = 0; m < 9; ++m) {
      std::vector<std::pair<double, std::uint32_t>> want;
      for (std::uint32_t j = 0; j < 5; ++j) {
        if (j == i) continue;
        double best = INFINITY;
        for (std::size_t n = 0; n < 9; ++n) {
          if (ex.contains(j, n)) continue;
          double d = 0.0;
          for (std::size_t c = 0; c < 2; ++c) {
            const double diff = double{b.agg.patch(i, 0, m)[c]} - b.agg.patch(j, 0, n)[c];
            d += diff * diff;
          }
          best = std::min(best, d);
        }
        want.emplace_back(best, j);
      }
      std::sort(want.begin(), want.end());
      const auto row = table.row_index(i, m);
      REQUIRE(table.valid(row) == 4u);
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(support::close_rel(table.row_distances(row)[k], want[k].first, 1e-5, 1e-6));
        CHECK(table.row_images(row)[k] == want[k].second);
      }
    }
}

TEST_CASE("over-filtering is reported") {
  CounterRng rng(9);
  const auto fs = support::random_features(rng, 4, 1, 2, 2);
  const auto b = build(fs);
  const std::vector<std::vector<std::uint32_t>> everyone{{0, 1, 2}};
  const auto ex = targeted_filtering(everyone, b.ptrs, 2);
  REQUIRE(ex.communities.size() == 1u);
  CHECK(ex.communities[0].aborted);
  CHECK(ex.empty());

  auto all = ExclusionSet::none(4, 4);
  std::fill(all.mask.begin(), all.mask.end(), std::uint8_t{1});
  for (std::uint32_t p = 0; p < 16; ++p) all.members.push_back({p / 4, p % 4, 0, 0.0});
  try {
    apply_exclusions(b.tables[0], b.agg, all);
    FAIL("expected EmptyBase");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyBase);
  }
  CHECK_THROWS_AS(targeted_filtering(everyone, b.ptrs, 2, 1.5), Error);
}
