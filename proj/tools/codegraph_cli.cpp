// SPDX-License-Identifier: Apache-2.0
// codegraph: command-line front end for the detection engine.
#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "codegraph/error.hpp"
#include "codegraph/evt.hpp"
#include "codegraph/kernels.hpp"
#include "codegraph/parallel.hpp"
#include "codegraph/pipeline.hpp"
#include "codegraph/rng.hpp"
#include "codegraph/synth.hpp"

namespace cg = codegraph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInvariant = 4;

int exit_code_for(cg::ErrorCode code) {
  switch (code) {
    case cg::ErrorCode::kConfigError:
    case cg::ErrorCode::kConfigInfeasible:
    case cg::ErrorCode::kInvalidArgument:
    case cg::ErrorCode::kInvalidEta:
    case cg::ErrorCode::kInvalidReceptiveField:
      return kExitConfig;
    case cg::ErrorCode::kInvariantViolation:
      return kExitInvariant;
    default:
      return kExitData;
  }
}

// Pipeline keys exposed as --key-name flags.
const char* const kConfigKeys[] = {
    "features", "ground_truth", "output", "cache_dir", "k_percent", "omega_fraction",
    "alpha", "tau_cov", "gamma_quantile", "k_iqr", "theta_percentile", "r_set", "eta",
    "chunks", "seed", "normalize_features", "selection", "link_budget"};

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "extra key=value override (repeatable)");
    for (const char* key : kConfigKeys) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app->add_option(flag, values[key], std::string("pipeline field ") + key);
    }
  }

  cg::PipelineConfig resolve() const {
    cg::PipelineConfig cfg;
    if (!config_file.empty()) cfg.merge_file(config_file);
    for (const auto& [key, value] : values)
      if (!value.empty()) cfg.set(key, value);
    for (const auto& o : overrides) cfg.merge_text(o);
    cfg.validate();
    return cfg;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) cg::fail(cg::ErrorCode::kIoError, "cannot write " + path);
  out << text;
}

std::vector<double> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) cg::fail(cg::ErrorCode::kIoError, "cannot read " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      cg::fail(cg::ErrorCode::kDimensionError, "bad sample line '" + line + "' in " + path);
    }
  }
  return out;
}

std::vector<double> pareto_samples(double alpha, std::size_t n, std::uint64_t seed) {
  cg::CounterRng rng(seed, 0);
  std::vector<double> out(n);
  for (auto& x : out) x = std::pow(rng.uniform(), -1.0 / alpha);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codegraph: zero-shot anomaly scoring with consistent-anomaly filtering"};
  app.require_subcommand(1);
  unsigned threads = 0;
  std::string simd = "auto";
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--simd", simd, "distance kernels: auto, scalar, avx2, neon");

  ConfigFlags run_flags, baseline_flags, dump_flags;
  auto* run = app.add_subcommand("run", "full pipeline: scoring, detection, filtering, rescoring");
  run_flags.attach(run);
  auto* baseline = app.add_subcommand("baseline", "mutual scoring without filtering");
  baseline_flags.attach(baseline);
  auto* dump = app.add_subcommand("graph-dump", "detection stages only; writes graph and links");
  dump_flags.attach(dump);

  auto* synth = app.add_subcommand("synth", "generate a synthetic feature set with plants");
  cg::SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out-dir", synth_out, "output directory")->required();
  synth->add_option("--images", sc.n_images);
  synth->add_option("--layers", sc.n_layers);
  synth->add_option("--grid-side", sc.grid_side);
  synth->add_option("--channels", sc.n_channels);
  synth->add_option("--cls-dim", sc.cls_dim);
  synth->add_option("--consistent", sc.n_consistent, "q: images sharing the planted pattern");
  synth->add_option("--plant-patches", sc.plant_patch_count);
  synth->add_option("--plant-spread", sc.plant_spread);
  synth->add_option("--tail-alpha", sc.normal_tail_alpha);
  synth->add_option("--inconsistent", sc.n_inconsistent);
  synth->add_option("--inconsistent-patches", sc.inconsistent_patch_count);
  synth->add_option("--noise", sc.noise_scale);
  synth->add_option("--prototype-block", sc.prototype_block);
  synth->add_option("--prototype-scale", sc.prototype_scale);
  synth->add_option("--anomaly-scale", sc.anomaly_scale);
  synth->add_option("--pose-drift", sc.pose_drift);
  synth->add_option("--pose-jitter", sc.pose_jitter);
  synth->add_option("--layer-correlation", sc.layer_correlation);
  synth->add_flag("--duplicate", sc.duplicate_images, "make the q planted images identical");
  synth->add_option("--seed", sc.seed);

  auto* eval = app.add_subcommand("eval", "metrics for an existing score map");
  std::string eval_scores, eval_gt, eval_out;
  eval->add_option("--scores", eval_scores, "CDGS score map")->required()->check(CLI::ExistingFile);
  eval->add_option("--ground-truth", eval_gt, "CDGT labels")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report path (default: stdout)");

  auto* evt = app.add_subcommand("evt", "extreme-value and order-statistics suites");
  evt->require_subcommand(1);
  std::string evt_out;
  std::uint64_t evt_seed = 0;
  double evt_alpha = 3.0;
  std::size_t evt_trials = 20000, evt_omega = 200, evt_n = 100000, k_min = 10, k_max = 0;
  std::string evt_input, evt_features, evt_gt;
  std::vector<std::size_t> coupon_m{50, 100};
  std::vector<double> coupon_p{0.0, 0.5};
  double qq_a = 3.0, qq_b = 1.0;

  auto* spacing = evt->add_subcommand("spacing", "log spacings of Beta(alpha, 1) order statistics");
  spacing->add_option("--alpha", evt_alpha);
  spacing->add_option("--omega", evt_omega);
  spacing->add_option("--trials", evt_trials);
  auto* hill = evt->add_subcommand("hill", "Hill plot of a sample, Pareto draws or a feature set");
  hill->add_option("--input", evt_input, "one sample per line");
  hill->add_option("--features", evt_features, "tail of inverse nearest-image distances");
  hill->add_option("--pareto-alpha", evt_alpha);
  hill->add_option("--n", evt_n);
  hill->add_option("--k-min", k_min);
  hill->add_option("--k-max", k_max);
  auto* qq = evt->add_subcommand("qq", "Q-Q pairs against Beta(a, b)");
  qq->add_option("--input", evt_input, "one sample per line");
  qq->add_option("--alpha", evt_alpha, "Beta(alpha, 1) draws when no input");
  qq->add_option("--n", evt_n);
  qq->add_option("--a", qq_a);
  qq->add_option("--b", qq_b);
  auto* coupon = evt->add_subcommand("coupon", "coupon-collector sweep");
  coupon->add_option("--m", coupon_m)->delimiter(',');
  coupon->add_option("--p", coupon_p)->delimiter(',');
  coupon->add_option("--trials", evt_trials);
  auto* growth = evt->add_subcommand("growth", "growth-rate curves of a feature set");
  growth->add_option("--features", evt_features)->required()->check(CLI::ExistingFile);
  growth->add_option("--ground-truth", evt_gt);
  for (auto* sub : {spacing, hill, qq, coupon, growth}) {
    sub->add_option("--out", evt_out, "CSV path")->required();
    sub->add_option("--seed", evt_seed);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    cg::set_thread_count(threads);
    cg::kernels::set_backend(cg::kernels::parse_backend(simd));

    if (*run) {
      const auto cfg = run_flags.resolve();
      const auto result = cg::run_pipeline(cfg);
      std::printf("flagged communities: %zu, excluded patches: %zu, coverage: %.4f\n",
                  result.detection.partition.flagged().size(), result.exclusions.members.size(),
                  result.detection.links.coverage_achieved);
    } else if (*baseline) {
      cg::run_baseline(baseline_flags.resolve());
    } else if (*dump) {
      const auto cfg = dump_flags.resolve();
      if (cfg.features.empty() || cfg.output.empty())
        cg::fail(cg::ErrorCode::kConfigError, "graph-dump needs --features and --output");
      const auto hash = cg::hash_file(cfg.features);
      cg::Engine engine(cg::load_feature_set(cfg.features), cfg, hash);
      const auto d = engine.detect(cfg);
      std::filesystem::create_directories(cfg.output);
      write_text((cfg.output / "graph.json").string(), cg::graph_json(d.graph, &d.partition));
      write_text((cfg.output / "links.json").string(),
                 cg::link_set_json(d.links, engine.features().image_ids));
    } else if (*synth) {
      const auto out = cg::generate(sc);
      std::filesystem::create_directories(synth_out);
      const std::filesystem::path dir(synth_out);
      cg::write_feature_set(out.features, dir / "features.cdgf");
      cg::write_ground_truth(out.truth, dir / "truth.cdgt");
      write_text((dir / "manifest.json").string(), out.manifest.to_json(out.features.image_ids));
    } else if (*eval) {
      const auto scores = cg::load_score_map(eval_scores);
      const auto truth = cg::load_ground_truth(eval_gt);
      const auto report = cg::evaluate(scores, truth).to_json();
      if (eval_out.empty()) std::cout << report << '\n';
      else write_text(eval_out, report);
    } else if (*spacing) {
      cg::write_spacing_csv(cg::simulate_log_spacings(evt_alpha, evt_omega, evt_trials, evt_seed),
                            evt_out);
    } else if (*hill) {
      std::vector<double> samples;
      if (!evt_input.empty()) {
        samples = read_samples(evt_input);
      } else if (!evt_features.empty()) {
        cg::PipelineConfig cfg;
        cfg.r_set = {1};
        cg::Engine engine(cg::load_feature_set(evt_features), cfg);
        const auto& index = engine.aggregated_index();
        for (std::size_t row = 0; row < index.n_rows(); ++row)
          samples.push_back(1.0 / std::max(index.row_distances(row)[0], cg::kDistanceFloor));
      } else {
        samples = pareto_samples(evt_alpha, evt_n, evt_seed);
      }
      const std::size_t top = k_max ? k_max : samples.size() / 10;
      cg::write_hill_csv(cg::hill_plot(samples, k_min, top), evt_out);
    } else if (*qq) {
      const auto samples = evt_input.empty()
                               ? [&] {
                                   auto s = cg::negative_log_beta_samples(evt_alpha, evt_n, evt_seed);
                                   for (auto& x : s) x = std::exp(-x);
                                   return s;
                                 }()
                               : read_samples(evt_input);
      cg::write_qq_csv(cg::qq_pairs(samples, qq_a, qq_b), evt_out);
    } else if (*coupon) {
      std::vector<cg::CouponEstimate> rows;
      for (auto m : coupon_m)
        for (auto p : coupon_p) rows.push_back(cg::coupon_collector_expected_turns(m, p, evt_trials, evt_seed));
      cg::write_coupon_csv(rows, evt_out);
    } else if (*growth) {
      cg::PipelineConfig cfg;
      cfg.r_set = {1};
      cg::Engine engine(cg::load_feature_set(evt_features), cfg);
      std::vector<cg::PatchClass> classes;
      if (!evt_gt.empty()) {
        const auto truth = cg::load_ground_truth(evt_gt);
        classes = cg::classify_patches(truth, engine.baseline().patch_scores);
      }
      cg::write_growth_csv(cg::growth_curves(engine.aggregated_index(), classes), evt_out);
    }
  } catch (const cg::Error& e) {
    std::fprintf(stderr, "codegraph: %s: %s\n", std::string(cg::to_string(e.code())).c_str(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "codegraph: internal error: %s\n", e.what());
    return kExitInvariant;
  }
  return kExitOk;
}
