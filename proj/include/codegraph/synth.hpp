// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codegraph/feature_io.hpp"

namespace codegraph {

// Feature-space test set with planted anomalies. Lengths are in units of
// u = noise_scale * sqrt(d), d = 2 * normal_tail_alpha the latent dimension
// of the normal noise.
struct SynthConfig {
  std::uint32_t n_images = 50;
  std::uint32_t n_layers = 2;
  std::uint32_t grid_side = 14;
  std::uint32_t n_channels = 64;
  std::uint32_t cls_dim = 16;
  std::uint32_t n_consistent = 10;         // q
  std::uint32_t plant_patch_count = 12;
  double plant_spread = 0.02;              // per-channel std, in noise_scale units
  double normal_tail_alpha = 3.0;
  std::uint32_t n_inconsistent = 5;
  std::uint32_t inconsistent_patch_count = 3;
  double noise_scale = 1.0;
  std::uint32_t prototype_block = 7;       // cells per side sharing a prototype
  double prototype_scale = 5.0;            // |normal prototype|, in u
  double anomaly_scale = 4.0;              // |anomaly prototype|, in u
  double pose_drift = 0.6;                 // radius of the per-image pose circle, in u
  double pose_jitter = 0.2;                // pose noise, as a fraction of the 2 pi / N slot
  double layer_correlation = 0.9;          // latent correlation between layers
  bool duplicate_images = false;           // the q images become exact copies
  std::uint64_t seed = 0;
};

struct PlantedImage {
  std::uint32_t image = 0;
  std::vector<std::uint32_t> cells;  // row-major grid positions
};

struct PlantManifest {
  std::uint32_t horizon = 0;  // q - 1
  std::vector<PlantedImage> consistent;
  std::vector<PlantedImage> inconsistent;
  std::vector<double> poses;
  std::string config_json;

  std::vector<std::uint32_t> consistent_images() const;
  std::string to_json(const std::vector<std::string>& image_ids) const;
};

struct SynthOutput {
  FeatureSet features;
  GroundTruth truth;
  PlantManifest manifest;
};

// ConfigInfeasible when the configuration cannot be realised.
SynthOutput generate(const SynthConfig& config);

std::string synth_config_json(const SynthConfig& config);

}  // namespace codegraph
