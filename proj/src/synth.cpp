// SPDX-License-Identifier: Apache-2.0
#include "codegraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <set>

#include "codegraph/error.hpp"
#include "codegraph/rng.hpp"

namespace codegraph {

namespace {

using Vec = std::vector<double>;

Vec gaussian(CounterRng& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Vec unit(Vec v) {
  const double n = std::sqrt(dot(v, v));
  for (auto& x : v) x /= n;
  return v;
}

// count orthonormal vectors in R^dim (modified Gram-Schmidt).
std::vector<Vec> orthonormal(CounterRng& rng, std::size_t count, std::size_t dim) {
  std::vector<Vec> basis;
  while (basis.size() < count) {
    Vec v = gaussian(rng, dim);
    for (const auto& b : basis) {
      const double p = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    if (std::sqrt(dot(v, v)) > 1e-6) basis.push_back(unit(std::move(v)));
  }
  return basis;
}

[[noreturn]] void infeasible(const std::string& why) { fail(ErrorCode::kConfigInfeasible, why); }

std::pair<std::uint32_t, std::uint32_t> block_shape(std::uint32_t count) {
  auto rows = static_cast<std::uint32_t>(std::floor(std::sqrt(static_cast<double>(count))));
  rows = std::max(rows, 1u);
  return {rows, (count + rows - 1) / rows};
}

// Cells of a count-cell block (row-major fill) anchored at (top, left).
std::vector<std::uint32_t> block_cells(std::uint32_t count, std::uint32_t top, std::uint32_t left,
                                       std::uint32_t side) {
  const auto [rows, cols] = block_shape(count);
  (void)rows;
  std::vector<std::uint32_t> cells;
  for (std::uint32_t c = 0; c < count; ++c) cells.push_back((top + c / cols) * side + left + c % cols);
  return cells;
}

}  // namespace

std::string synth_config_json(const SynthConfig& c) {
  nlohmann::json j{{"n_images", c.n_images},
                   {"n_layers", c.n_layers},
                   {"grid_side", c.grid_side},
                   {"n_channels", c.n_channels},
                   {"cls_dim", c.cls_dim},
                   {"n_consistent", c.n_consistent},
                   {"plant_patch_count", c.plant_patch_count},
                   {"plant_spread", c.plant_spread},
                   {"normal_tail_alpha", c.normal_tail_alpha},
                   {"n_inconsistent", c.n_inconsistent},
                   {"inconsistent_patch_count", c.inconsistent_patch_count},
                   {"noise_scale", c.noise_scale},
                   {"prototype_block", c.prototype_block},
                   {"prototype_scale", c.prototype_scale},
                   {"anomaly_scale", c.anomaly_scale},
                   {"pose_drift", c.pose_drift},
                   {"pose_jitter", c.pose_jitter},
                   {"layer_correlation", c.layer_correlation},
                   {"duplicate_images", c.duplicate_images},
                   {"seed", c.seed}};
  return j.dump();
}

std::vector<std::uint32_t> PlantManifest::consistent_images() const {
  std::vector<std::uint32_t> out;
  for (const auto& p : consistent) out.push_back(p.image);
  std::sort(out.begin(), out.end());
  return out;
}

std::string PlantManifest::to_json(const std::vector<std::string>& image_ids) const {
  const auto dump = [&](const std::vector<PlantedImage>& list) {
    auto arr = nlohmann::json::array();
    for (const auto& p : list)
      arr.push_back({{"image", p.image}, {"id", image_ids.at(p.image)}, {"cells", p.cells}});
    return arr;
  };
  nlohmann::json j{{"horizon", horizon},
                   {"consistent", dump(consistent)},
                   {"inconsistent", dump(inconsistent)},
                   {"poses", poses},
                   {"config", nlohmann::json::parse(config_json)}};
  return j.dump(1);
}

SynthOutput generate(const SynthConfig& cfg) {
  const double latent_real = 2.0 * cfg.normal_tail_alpha;
  const auto latent = static_cast<std::size_t>(std::llround(latent_real));
  const std::uint32_t side = cfg.grid_side;
  const std::uint32_t m_patches = side * side;
  const std::size_t channels = cfg.n_channels;

  if (cfg.n_images < 2 || cfg.n_layers == 0 || side == 0 || channels == 0 || cfg.cls_dim < 2)
    infeasible("need N >= 2, L >= 1, positive grid and channels, cls_dim >= 2");
  if (std::abs(latent_real - static_cast<double>(latent)) > 1e-9 || latent == 0)
    infeasible("2 * normal_tail_alpha must be a positive integer");
  if (latent + 2 > channels) infeasible("channels must exceed the latent dimension by 2");
  if (cfg.n_consistent >= cfg.n_images) infeasible("need q < N");
  if (cfg.n_consistent + cfg.n_inconsistent > cfg.n_images)
    infeasible("consistent plus inconsistent images exceed N");
  if (cfg.n_consistent > 0 && (cfg.plant_patch_count == 0 || cfg.plant_patch_count >= m_patches))
    infeasible("need 0 < plant_patch_count < M");
  if (cfg.n_inconsistent > 0 &&
      (cfg.inconsistent_patch_count == 0 || cfg.inconsistent_patch_count >= m_patches))
    infeasible("need 0 < inconsistent_patch_count < M");
  if (cfg.prototype_block == 0 || cfg.prototype_block > side || side % cfg.prototype_block != 0)
    infeasible("prototype_block must divide the grid side");
  if (!(cfg.noise_scale > 0.0) || !(cfg.plant_spread >= 0.0) || !(cfg.pose_drift >= 0.0) ||
      !(cfg.pose_jitter >= 0.0 && cfg.pose_jitter <= 1.0) ||
      !(cfg.prototype_scale > 0.0) || !(cfg.anomaly_scale > 0.0) ||
      !(cfg.layer_correlation >= 0.0 && cfg.layer_correlation <= 1.0))
    infeasible("scales must be non-negative and layer_correlation in [0, 1]");
  {
    const auto [rows, cols] = block_shape(cfg.plant_patch_count);
    if (cfg.n_consistent > 0 && (rows > cfg.prototype_block || cols > cfg.prototype_block))
      infeasible("the plant block does not fit inside one prototype block");
    const auto [irows, icols] = block_shape(cfg.inconsistent_patch_count);
    if (cfg.n_inconsistent > 0 && (irows > side || icols > side))
      infeasible("the inconsistent block does not fit the grid");
  }

  const double u = cfg.noise_scale * std::sqrt(static_cast<double>(latent));
  const std::uint32_t blocks_per_side = side / cfg.prototype_block;
  const std::uint32_t n_blocks = blocks_per_side * blocks_per_side;
  CounterRng geo(cfg.seed, 1);

  // Per-layer geometry: latent basis, pose plane, normal prototypes.
  struct Layer {
    std::vector<Vec> basis;
    Vec pose_a, pose_b;
    std::vector<Vec> prototypes;
  };
  std::vector<Layer> layers(cfg.n_layers);
  for (auto& layer : layers) {
    auto frame = orthonormal(geo, latent + 2, channels);
    layer.pose_a = frame[latent];
    layer.pose_b = frame[latent + 1];
    frame.resize(latent);
    layer.basis = std::move(frame);
    for (std::uint32_t b = 0; b < n_blocks; ++b) {
      Vec p = unit(gaussian(geo, channels));
      for (auto& x : p) x *= cfg.prototype_scale * u;
      layer.prototypes.push_back(std::move(p));
    }
  }

  // Anomaly prototypes keep 10 noise units clear of every normal token centre.
  const double clearance = 10.0 * cfg.noise_scale + cfg.pose_drift * u;
  const auto anomaly_prototype = [&](std::size_t layer) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Vec a = unit(gaussian(geo, channels));
      for (auto& x : a) x *= cfg.anomaly_scale * u;
      bool ok = true;
      for (const auto& p : layers[layer].prototypes) ok = ok && distance(a, p) >= clearance;
      if (ok) return a;
    }
    infeasible("cannot place an anomaly prototype 10 noise units from the normal token centres");
  };

  CounterRng assign(cfg.seed, 2);
  std::vector<std::uint32_t> perm(cfg.n_images);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[assign.below(i)]);

  SynthOutput out;
  auto& fs = out.features;
  auto& gt = out.truth;
  auto& manifest = out.manifest;
  fs.n_images = cfg.n_images;
  fs.n_layers = cfg.n_layers;
  fs.grid_side = side;
  fs.n_channels = cfg.n_channels;
  fs.cls_dim = cfg.cls_dim;
  fs.patch_tokens.assign(std::size_t{cfg.n_images} * cfg.n_layers * m_patches * channels, 0.0f);
  fs.class_tokens.assign(std::size_t{cfg.n_images} * cfg.cls_dim, 0.0f);
  for (std::uint32_t i = 0; i < cfg.n_images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03u", i);
    fs.image_ids.emplace_back(id);
  }
  gt.n_images = cfg.n_images;
  gt.grid_side = side;
  gt.patch_labels.assign(std::size_t{cfg.n_images} * m_patches, 0);
  gt.image_labels.assign(cfg.n_images, 0);
  manifest.horizon = cfg.n_consistent > 0 ? cfg.n_consistent - 1 : 0;
  manifest.config_json = synth_config_json(cfg);
  manifest.poses.resize(cfg.n_images);

  // Poses sit evenly around the circle in random order, jittered within a slot.
  std::vector<std::uint32_t> slot(cfg.n_images);
  std::iota(slot.begin(), slot.end(), 0u);
  {
    CounterRng rng(cfg.seed, 5);
    for (std::size_t i = slot.size(); i > 1; --i) std::swap(slot[i - 1], slot[rng.below(i)]);
    for (std::uint32_t i = 0; i < cfg.n_images; ++i)
      manifest.poses[i] = 2.0 * std::numbers::pi *
                          (slot[i] + cfg.pose_jitter * (rng.uniform() - 0.5)) / cfg.n_images;
  }

  // Normal content: prototype + pose offset + latent noise.
  const double rho = cfg.layer_correlation;
  const double rest = std::sqrt(1.0 - rho * rho);
  for (std::uint32_t i = 0; i < cfg.n_images; ++i) {
    CounterRng rng(cfg.seed, 1000 + i);
    const double theta = manifest.poses[i];
    const double ca = std::cos(theta) * cfg.pose_drift * u;
    const double sa = std::sin(theta) * cfg.pose_drift * u;
    for (std::uint32_t cell = 0; cell < m_patches; ++cell) {
      const std::uint32_t b =
          (cell / side / cfg.prototype_block) * blocks_per_side + (cell % side) / cfg.prototype_block;
      const Vec shared = gaussian(rng, latent);
      for (std::uint32_t l = 0; l < cfg.n_layers; ++l) {
        const Vec own = gaussian(rng, latent);
        const auto& layer = layers[l];
        float* token = fs.patch_tokens.data() + ((std::size_t{i} * cfg.n_layers + l) * m_patches + cell) * channels;
        for (std::size_t c = 0; c < channels; ++c) {
          double v = layer.prototypes[b][c] + ca * layer.pose_a[c] + sa * layer.pose_b[c];
          for (std::size_t k = 0; k < latent; ++k)
            v += cfg.noise_scale * (rho * shared[k] + rest * own[k]) * layer.basis[k][c];
          token[c] = static_cast<float>(v);
        }
      }
    }
    float* cls = fs.class_tokens.data() + std::size_t{i} * cfg.cls_dim;
    cls[0] = static_cast<float>(std::cos(theta));
    cls[1] = static_cast<float>(std::sin(theta));
    for (std::uint32_t c = 2; c < cfg.cls_dim; ++c) cls[c] = static_cast<float>(0.05 * rng.normal());
  }

  const auto set_token = [&](std::uint32_t i, std::uint32_t l, std::uint32_t cell, const Vec& v) {
    float* token = fs.patch_tokens.data() + ((std::size_t{i} * cfg.n_layers + l) * m_patches + cell) * channels;
    for (std::size_t c = 0; c < channels; ++c) token[c] = static_cast<float>(v[c]);
  };

  // Consistent anomalies: one shared prototype per plant cell, all plants
  // inside the same prototype block.
  std::set<std::pair<std::uint32_t, std::uint32_t>> used;
  if (cfg.n_consistent > 0) {
    CounterRng rng(cfg.seed, 3);
    const auto [rows, cols] = block_shape(cfg.plant_patch_count);
    const auto block = static_cast<std::uint32_t>(rng.below(n_blocks));
    const std::uint32_t top0 = (block / blocks_per_side) * cfg.prototype_block;
    const std::uint32_t left0 = (block % blocks_per_side) * cfg.prototype_block;
    std::vector<std::vector<Vec>> plant_protos(cfg.n_layers);
    for (std::uint32_t l = 0; l < cfg.n_layers; ++l)
      for (std::uint32_t c = 0; c < cfg.plant_patch_count; ++c)
        plant_protos[l].push_back(anomaly_prototype(l));
    for (std::uint32_t t = 0; t < cfg.n_consistent; ++t) {
      const std::uint32_t i = perm[t];
      const bool copy = cfg.duplicate_images && t > 0;
      const auto top = copy ? 0u : top0 + static_cast<std::uint32_t>(rng.below(cfg.prototype_block - rows + 1));
      const auto left = copy ? 0u : left0 + static_cast<std::uint32_t>(rng.below(cfg.prototype_block - cols + 1));
      PlantedImage planted{i, copy ? manifest.consistent.front().cells
                                   : block_cells(cfg.plant_patch_count, top, left, side)};
      if (!copy) {
        for (std::uint32_t l = 0; l < cfg.n_layers; ++l) {
          for (std::uint32_t c = 0; c < cfg.plant_patch_count; ++c) {
            Vec v = plant_protos[l][c];
            for (auto& x : v) x += cfg.plant_spread * cfg.noise_scale * rng.normal();
            set_token(i, l, planted.cells[c], v);
          }
        }
      }
      for (auto cell : planted.cells) used.insert({i, cell});
      manifest.consistent.push_back(std::move(planted));
    }
    if (cfg.duplicate_images) {
      const std::uint32_t src = perm[0];
      const std::size_t block_len = std::size_t{cfg.n_layers} * m_patches * channels;
      for (std::uint32_t t = 1; t < cfg.n_consistent; ++t) {
        const std::uint32_t dst = perm[t];
        std::copy_n(fs.patch_tokens.begin() + src * block_len, block_len,
                    fs.patch_tokens.begin() + dst * block_len);
        std::copy_n(fs.class_tokens.begin() + std::size_t{src} * cfg.cls_dim, cfg.cls_dim,
                    fs.class_tokens.begin() + std::size_t{dst} * cfg.cls_dim);
        manifest.poses[dst] = manifest.poses[src];
      }
    }
  }

  // Inconsistent anomalies: a block of unique far tokens per image.
  if (cfg.n_inconsistent > 0) {
    CounterRng rng(cfg.seed, 4);
    const auto [rows, cols] = block_shape(cfg.inconsistent_patch_count);
    for (std::uint32_t t = 0; t < cfg.n_inconsistent; ++t) {
      const std::uint32_t i = perm[cfg.n_consistent + t];
      const auto top = static_cast<std::uint32_t>(rng.below(side - rows + 1));
      const auto left = static_cast<std::uint32_t>(rng.below(side - cols + 1));
      PlantedImage planted{i, block_cells(cfg.inconsistent_patch_count, top, left, side)};
      for (std::uint32_t l = 0; l < cfg.n_layers; ++l) {
        for (auto cell : planted.cells) {
          Vec v = anomaly_prototype(l);
          for (std::size_t k = 0; k < latent; ++k) {
            const double z = cfg.noise_scale * rng.normal();
            for (std::size_t c = 0; c < channels; ++c) v[c] += z * layers[l].basis[k][c];
          }
          set_token(i, l, cell, v);
        }
      }
      manifest.inconsistent.push_back(std::move(planted));
    }
  }

  for (const auto& list : {std::cref(manifest.consistent), std::cref(manifest.inconsistent)}) {
    for (const auto& p : list.get()) {
      gt.image_labels[p.image] = 1;
      for (auto cell : p.cells) gt.patch_labels[std::size_t{p.image} * m_patches + cell] = 1;
    }
  }
  fs.validate();
  gt.validate();
  return out;
}

}  // namespace codegraph
