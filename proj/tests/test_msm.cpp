#include <doctest.h>

#include <filesystem>

#include "codegraph/error.hpp"
#include "codegraph/lnamd.hpp"
#include "codegraph/msm.hpp"
#include "support.hpp"

using namespace codegraph;

namespace {

std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("patch to image distance") {
  const std::vector<float> query{0.0f};
  const std::vector<float> image{3.0f, -1.0f, 2.0f};
  const auto match = patch_to_image_distance(query, image, 1);
  CHECK(match.distance == 1.0f);
  CHECK(match.patch == 1u);

  const std::vector<float> same{5.0f, 1.0f, 2.0f, 1.0f};
  const std::vector<float> q2{2.0f, 1.0f};
  CHECK(patch_to_image_distance(q2, same, 2).distance == 0.0f);
  CHECK(patch_to_image_distance(q2, same, 2).patch == 1u);

  const std::vector<float> ragged{1.0f, 2.0f, 3.0f};
  CHECK_THROWS_AS(patch_to_image_distance(q2, ragged, 2), Error);
}

TEST_CASE("patch to image distance matches the double loop on small instances") {
  CounterRng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = 1 + rng.below(16), c = 1 + rng.below(8);
    std::vector<float> q(c), img(m * c);
    for (auto& x : q) x = static_cast<float>(rng.normal());
    for (auto& x : img) x = static_cast<float>(rng.normal());
    double best = INFINITY;
    std::uint32_t arg = 0;
    for (std::size_t n = 0; n < m; ++n) {
      double d = 0.0;
      for (std::size_t k = 0; k < c; ++k) d += (double{q[k]} - img[n * c + k]) * (double{q[k]} - img[n * c + k]);
      if (d < best) {
        best = d;
        arg = static_cast<std::uint32_t>(n);
      }
    }
    const auto got = patch_to_image_distance(q, img, c);
    CHECK(support::close_rel(got.distance, best, 1e-5, 1e-6));
    CHECK(got.patch == arg);
  }
}

TEST_CASE("ranking tables match the brute-force oracle") {
  CounterRng rng(31);
  for (int t = 0; t < 8; ++t) {
    const auto fs = support::random_features(rng, 2 + t % 4, 2, 2 + t % 2, 2 + t % 3);
    for (std::uint32_t r : {1u, 3u}) {
      if (r > fs.grid_side) continue;
      const auto agg = aggregate(fs, r);
      const auto tokens = to_double(agg.tokens);
      for (std::uint32_t l = 0; l < fs.n_layers; ++l) {
        const auto table = build_msr(agg, l);
        REQUIRE(table.row_length == fs.n_images - 1);
        for (std::size_t i = 0; i < fs.n_images; ++i)
          for (std::size_t m = 0; m < fs.n_patches(); ++m) {
            const auto row = table.row_index(i, m);
            const auto ref = support::brute_row(tokens, fs.n_images, fs.n_layers, fs.n_patches(),
                                                fs.n_channels, l, i, m);
            REQUIRE(table.valid(row) == ref.size());
            for (std::size_t k = 0; k < ref.size(); ++k) {
              CHECK(support::close_rel(table.row_distances(row)[k], ref[k].distance, 1e-5, 1e-6));
              CHECK(table.row_images(row)[k] == ref[k].image);
              CHECK(table.row_patches(row)[k] == ref[k].patch);
            }
          }
      }
    }
  }
}

TEST_CASE("two images give rows of length one") {
  CounterRng rng(1);
  const auto fs = support::random_features(rng, 2, 1, 3, 2);
  const auto table = build_msr(aggregate(fs, 1), 0);
  CHECK(table.row_length == 1u);
  for (std::size_t row = 0; row < table.n_rows(); ++row)
    CHECK(table.row_images(row)[0] == (row < 9 ? 1u : 0u));
}

TEST_CASE("interval averages") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(interval_average_score(std::span<const double>(a), 1) == 1.0);
  CHECK(interval_average_score(std::span<const double>(a), 2) == 1.5);
  const std::vector<double> b{1, 3, 5, 9};
  CHECK(interval_average_score(std::span<const double>(b), 3) == 3.0);
  CHECK(interval_average_score(std::span<const double>(b), 10) == 4.5);
  CHECK_THROWS_AS(interval_average_score(std::span<const double>(), 1), Error);
  CHECK_THROWS_AS(interval_average_score(std::span<const double>(a), 0), Error);
  CHECK(interval_size(0.10, 49) == 5u);
  CHECK(interval_size(0.10, 5) == 1u);
  CHECK(interval_size(0.0001, 3) == 1u);
}

TEST_CASE("final scores average every (layer, r) cell like the oracle") {
  CounterRng rng(41);
  for (int t = 0; t < 5; ++t) {
    const auto fs = support::random_features(rng, 4, 2, 3, 3);
    const std::vector<std::uint32_t> r_set{1, 3};
    std::vector<MutualSimilarityIndex> tables;
    for (auto r : r_set) {
      const auto agg = aggregate(fs, r);
      for (std::uint32_t l = 0; l < 2; ++l) tables.push_back(build_msr(agg, l));
    }
    std::vector<const MutualSimilarityIndex*> ptrs;
    for (const auto& t2 : tables) ptrs.push_back(&t2);
    const auto got = final_patch_scores(ptrs, 2);
    const auto ref = support::brute_scores(fs, r_set, 2);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(support::close_rel(got[k], ref[k], 1e-5, 1e-6));

    const std::vector<const MutualSimilarityIndex*> one{&tables[0]};
    const auto single = final_patch_scores(one, 2);
    for (std::size_t row = 0; row < tables[0].n_rows(); ++row)
      CHECK(single[row] == interval_average_score(tables[0].row_distances(row), 2));
  }
}

TEST_CASE("screening plans") {
  const std::vector<float> cls{1.0f, 0.0f, 0.0f, 1.0f, 0.9f, 0.1f};
  const auto plan = build_screening_plan(cls, 3, 2, 0.5);
  REQUIRE(plan.neighbors[0].size() == 1u);
  CHECK(plan.neighbors[0][0] == 2u);

  const std::vector<float> same(5 * 3, 1.0f);
  const auto tied = build_screening_plan(same, 5, 3, 0.5);
  CHECK(tied.neighbors[0] == std::vector<std::uint32_t>{1, 2});
  CHECK(tied.neighbors[3] == std::vector<std::uint32_t>{0, 1});

  const auto full = build_screening_plan(same, 5, 3, 1.0);
  for (std::size_t i = 0; i < 5; ++i) CHECK(full.neighbors[i].size() == 4u);

  for (double eta : {0.0, -0.5, 1.5}) {
    try {
      build_screening_plan(same, 5, 3, eta);
      FAIL("expected InvalidEta");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidEta);
    }
  }
}

TEST_CASE("full screening and chunking leave tables bitwise unchanged") {
  CounterRng rng(51);
  const auto fs = support::random_features(rng, 7, 2, 4, 5);
  const auto agg = aggregate(fs, 3);
  const auto plain = build_msr(agg, 1);
  const auto plan = build_screening_plan(fs, 1.0);
  MsrOptions screened;
  screened.screening = &plan;
  CHECK(build_msr(agg, 1, screened) == plain);
  for (std::uint32_t s : {2u, 3u, 7u, 20u}) {
    MsrOptions chunked;
    chunked.chunks = s;
    CHECK(build_msr(agg, 1, chunked) == plain);
  }

  const auto half = build_screening_plan(fs, 0.5);
  MsrOptions partial;
  partial.screening = &half;
  const auto table = build_msr(agg, 1, partial);
  CHECK(table.row_length == 3u);
  for (std::size_t row = 0; row < table.n_rows(); ++row) {
    const auto images = table.row_images(row);
    const auto& allowed = half.neighbors[row / table.n_patches];
    for (auto j : images) CHECK(std::find(allowed.begin(), allowed.end(), j) != allowed.end());
  }
}

TEST_CASE("aggregated index averages layers then re-sorts") {
  CounterRng rng(61);
  for (std::uint32_t layers : {1u, 4u}) {
    const auto fs = support::random_features(rng, 4, layers, 3, 3);
    const auto agg = aggregate(fs, 1);
    std::vector<MutualSimilarityIndex> tables;
    for (std::uint32_t l = 0; l < layers; ++l) tables.push_back(build_msr(agg, l));
    std::vector<const MutualSimilarityIndex*> ptrs;
    for (const auto& t : tables) ptrs.push_back(&t);
    const auto index = build_aggregated_index(ptrs);
    const auto tokens = to_double(agg.tokens);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t m = 0; m < 9; ++m) {
        std::vector<std::pair<double, std::uint32_t>> want;
        for (std::uint32_t j = 0; j < 4; ++j) {
          if (j == i) continue;
          double sum = 0.0;
          for (std::size_t l = 0; l < layers; ++l)
            for (const auto& e : support::brute_row(tokens, 4, layers, 9, 3, l, i, m))
              if (e.image == j) sum += e.distance;
          want.emplace_back(sum / layers, j);
        }
        std::sort(want.begin(), want.end());
        const auto row = i * 9 + m;
        for (std::size_t k = 0; k < 3; ++k) {
          CHECK(support::close_rel(index.row_distances(row)[k], want[k].first, 1e-5, 1e-6));
          CHECK(index.row_images(row)[k] == want[k].second);
        }
        if (layers == 1)
          for (std::size_t k = 0; k < 3; ++k) {
            CHECK(index.row_distances(row)[k] == double{tables[0].row_distances(row)[k]});
            CHECK(index.matched_patch(row, k, 0) == tables[0].row_patches(row)[k]);
          }
      }
  }
}

TEST_CASE("two layers at distances 2 and 4 aggregate to 3") {
  FeatureSet fs;
  fs.n_images = 2;
  fs.n_layers = 2;
  fs.grid_side = 1;
  fs.n_channels = 1;
  fs.cls_dim = 1;
  // sqrt(2) and 2 apart: squared distances 2 and 4.
  fs.patch_tokens = {0.0f, 0.0f, std::sqrt(2.0f), 2.0f};
  fs.class_tokens = {1.0f, 1.0f};
  fs.image_ids = {"a", "b"};
  const auto agg = aggregate(fs, 1);
  const auto t0 = build_msr(agg, 0), t1 = build_msr(agg, 1);
  const std::vector<const MutualSimilarityIndex*> ptrs{&t0, &t1};
  CHECK(build_aggregated_index(ptrs).row_distances(0)[0] == doctest::Approx(3.0));
}

TEST_CASE("ranking table cache round trip and key check") {
  CounterRng rng(71);
  const auto fs = support::random_features(rng, 5, 1, 3, 4);
  const auto table = build_msr(aggregate(fs, 3), 0);
  const auto bytes = encode_msr(table, 0xABCDu);
  CHECK(decode_msr(bytes, 0xABCDu) == table);
  CHECK_THROWS_AS(decode_msr(bytes, 0xABCEu), Error);
  const auto path = std::filesystem::temp_directory_path() / "codegraph_msr_rt.cdgx";
  write_msr(table, 7, path);
  CHECK(load_msr(path, 7) == table);
  auto bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_AS(decode_msr(bad, 0xABCDu), Error);
}
