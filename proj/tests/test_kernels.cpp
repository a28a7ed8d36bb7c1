#include <doctest.h>

#include <cmath>
#include <vector>

#include "codegraph/kernels.hpp"
#include "codegraph/rng.hpp"

using namespace codegraph;
using kernels::Backend;

namespace {

double reference_l2(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double{a[i]} - b[i]) * (double{a[i]} - b[i]);
  return s;
}

}  // namespace

TEST_CASE("every supported backend agrees with the double reference") {
  CounterRng rng(9);
  for (Backend backend : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
    if (!kernels::backend_supported(backend)) continue;
    const auto* table = kernels::table_for(backend);
    REQUIRE(table != nullptr);
    for (std::size_t dim : {1u, 3u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u, 1024u}) {
      std::vector<float> a(dim), b(dim);
      for (auto& x : a) x = static_cast<float>(rng.normal());
      for (auto& x : b) x = static_cast<float>(rng.normal());
      const double ref = reference_l2(a, b);
      CHECK(std::abs(table->squared_l2(a.data(), b.data(), dim) - ref) <= 1e-5 * (1.0 + ref));

      const std::size_t rows = 5;
      std::vector<float> block(rows * dim);
      for (auto& x : block) x = static_cast<float>(rng.normal());
      std::vector<float> out(rows);
      table->squared_l2_rows(a.data(), block.data(), rows, dim, out.data());
      for (std::size_t r = 0; r < rows; ++r) {
        const std::vector<float> row(block.begin() + r * dim, block.begin() + (r + 1) * dim);
        CHECK(out[r] == doctest::Approx(table->squared_l2(a.data(), row.data(), dim)).epsilon(1e-5));
      }

      std::vector<float> acc(dim, 1.0f);
      table->accumulate(acc.data(), a.data(), dim);
      table->scale(acc.data(), 0.5f, dim);
      for (std::size_t i = 0; i < dim; ++i) CHECK(acc[i] == doctest::Approx((1.0f + a[i]) * 0.5f));
    }
  }
}

TEST_CASE("backend selection") {
  CHECK(kernels::backend_supported(Backend::kScalar));
  CHECK(kernels::parse_backend("scalar") == Backend::kScalar);
  CHECK_THROWS(kernels::parse_backend("sse9"));
  const auto before = kernels::active_backend();
  kernels::set_backend(Backend::kScalar);
  CHECK(kernels::active_backend() == Backend::kScalar);
  kernels::set_backend(before);
}
