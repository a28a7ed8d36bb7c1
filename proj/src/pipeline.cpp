// SPDX-License-Identifier: Apache-2.0
#include "codegraph/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "binary_io.hpp"
#include "codegraph/error.hpp"
#include "codegraph/kernels.hpp"

namespace codegraph {

namespace {

[[noreturn]] void bad(const std::string& message) { fail(ErrorCode::kConfigError, message); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(out))
    bad("bad number for " + std::string(key) + ": '" + std::string(v) + "'");
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size())
    bad("bad integer for " + std::string(key) + ": '" + std::string(v) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  bad("bad flag for " + std::string(key) + ": '" + std::string(v) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return {buf, end};
}

std::uint64_t table_key(std::uint64_t feature_hash, std::uint32_t r, std::uint32_t layer,
                        const PipelineConfig& c) {
  std::ostringstream s;
  s << "features=" << feature_hash << ";r=" << r << ";layer=" << layer
    << ";normalize=" << c.normalize_features << ";eta=" << format_double(c.eta)
    << ";backend=" << kernels::backend_name(kernels::active_backend());
  return hash_bytes(s.str());
}

}  // namespace

std::string to_string(LinkSelection selection) {
  return selection == LinkSelection::kCoverage ? "coverage" : "fixed";
}

void PipelineConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "features") features = std::string(v);
  else if (key == "ground_truth") ground_truth = std::string(v);
  else if (key == "output") output = std::string(v);
  else if (key == "cache_dir") cache_dir = std::string(v);
  else if (key == "k_percent") k_percent = parse_double(key, v);
  else if (key == "omega_fraction") omega_fraction = parse_double(key, v);
  else if (key == "alpha") alpha = parse_double(key, v);
  else if (key == "tau_cov") tau_cov = parse_double(key, v);
  else if (key == "gamma_quantile") gamma_quantile = parse_double(key, v);
  else if (key == "k_iqr") k_iqr = parse_double(key, v);
  else if (key == "theta_percentile") theta_percentile = parse_double(key, v);
  else if (key == "eta") eta = parse_double(key, v);
  else if (key == "chunks") {
    const auto c = parse_uint(key, v);
    if (c == 0 || c > 1u << 20) bad("chunks must be positive");
    chunks = static_cast<std::uint32_t>(c);
  } else if (key == "seed") seed = parse_uint(key, v);
  else if (key == "normalize_features") normalize_features = parse_bool(key, v);
  else if (key == "link_budget") link_budget = parse_uint(key, v);
  else if (key == "selection") {
    if (v == "coverage") selection = LinkSelection::kCoverage;
    else if (v == "fixed") selection = LinkSelection::kFixedBudget;
    else bad("selection must be 'coverage' or 'fixed'");
  } else if (key == "r_set") {
    r_set.clear();
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      const auto r = parse_uint(key, item);
      if (r > 1u << 16) bad("receptive field too large");
      r_set.push_back(static_cast<std::uint32_t>(r));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  } else {
    bad("unknown config key '" + std::string(key) + "'");
  }
}

void PipelineConfig::merge_text(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      bad("config line " + std::to_string(line_no) + " is not key=value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void PipelineConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  merge_text(s.str());
}

void PipelineConfig::validate() const {
  const auto in_open_closed = [](double x) { return x > 0.0 && x <= 1.0; };
  if (!in_open_closed(k_percent)) bad("k_percent must lie in (0, 1]");
  if (!in_open_closed(omega_fraction)) bad("omega_fraction must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha < 1.0)) bad("alpha must lie in [0, 1)");
  if (!in_open_closed(tau_cov)) bad("tau_cov must lie in (0, 1]");
  if (!(gamma_quantile >= 0.0 && gamma_quantile <= 1.0)) bad("gamma_quantile must lie in [0, 1]");
  if (!(k_iqr >= 0.0)) bad("k_iqr must be non-negative");
  if (!(theta_percentile >= 0.0 && theta_percentile <= 100.0))
    bad("theta_percentile must lie in [0, 100]");
  if (!in_open_closed(eta)) bad("eta must lie in (0, 1]");
  if (chunks == 0) bad("chunks must be positive");
  if (r_set.empty()) bad("r_set must not be empty");
  if (std::find(r_set.begin(), r_set.end(), 1u) == r_set.end()) bad("r_set must contain 1");
  for (std::size_t a = 0; a < r_set.size(); ++a) {
    if (r_set[a] % 2 == 0) bad("r_set values must be odd");
    for (std::size_t b = 0; b < a; ++b)
      if (r_set[a] == r_set[b]) bad("r_set values must be distinct");
  }
}

std::string PipelineConfig::to_text() const {
  std::ostringstream s;
  s << "features=" << features.string() << '\n'
    << "ground_truth=" << ground_truth.string() << '\n'
    << "output=" << output.string() << '\n'
    << "cache_dir=" << cache_dir.string() << '\n'
    << "k_percent=" << format_double(k_percent) << '\n'
    << "omega_fraction=" << format_double(omega_fraction) << '\n'
    << "alpha=" << format_double(alpha) << '\n'
    << "tau_cov=" << format_double(tau_cov) << '\n'
    << "gamma_quantile=" << format_double(gamma_quantile) << '\n'
    << "k_iqr=" << format_double(k_iqr) << '\n'
    << "theta_percentile=" << format_double(theta_percentile) << '\n'
    << "r_set=";
  for (std::size_t i = 0; i < r_set.size(); ++i) s << (i ? "," : "") << r_set[i];
  s << '\n'
    << "eta=" << format_double(eta) << '\n'
    << "chunks=" << chunks << '\n'
    << "seed=" << seed << '\n'
    << "normalize_features=" << (normalize_features ? "true" : "false") << '\n'
    << "selection=" << to_string(selection) << '\n'
    << "link_budget=" << link_budget << '\n';
  return s.str();
}

Engine::Engine(FeatureSet features, const PipelineConfig& config, std::uint64_t feature_hash)
    : features_(std::move(features)), r_set_(config.r_set) {
  config.validate();
  features_.validate();
  std::sort(r_set_.begin(), r_set_.end());

  std::optional<ScreeningPlan> plan;
  if (config.eta < 1.0) plan = build_screening_plan(features_, config.eta);
  MsrOptions options;
  options.screening = plan ? &*plan : nullptr;
  options.chunks = config.chunks;

  const bool cached = !config.cache_dir.empty() && feature_hash != 0;
  if (cached) std::filesystem::create_directories(config.cache_dir);

  for (const auto r : r_set_) {
    auto agg = std::make_unique<AggregatedFeatures>(aggregate(features_, r));
    if (config.normalize_features) normalize_tokens(*agg);
    std::vector<std::unique_ptr<MutualSimilarityIndex>> per_layer;
    for (std::uint32_t l = 0; l < features_.n_layers; ++l) {
      const std::uint64_t key = table_key(feature_hash, r, l, config);
      char name[48];
      std::snprintf(name, sizeof name, "%016llx.cdgx", static_cast<unsigned long long>(key));
      const auto path = config.cache_dir / name;
      std::unique_ptr<MutualSimilarityIndex> table;
      if (cached && std::filesystem::exists(path)) {
        try {
          table = std::make_unique<MutualSimilarityIndex>(load_msr(path, key));
          ++cache_hits_;
        } catch (const Error&) {
          table.reset();
        }
      }
      if (!table) {
        table = std::make_unique<MutualSimilarityIndex>(build_msr(*agg, l, options));
        if (cached) write_msr(*table, key, path);
      }
      per_layer.push_back(std::move(table));
    }
    aggregated_.push_back(std::move(agg));
    tables_.push_back(std::move(per_layer));
  }

  const auto r1 = tables_at(1);
  row_length_ = r1.front()->row_length;
  k_ = interval_size(config.k_percent, row_length_);
  aggregated_index_ = build_aggregated_index(r1);
}

std::vector<const MutualSimilarityIndex*> Engine::tables() const {
  std::vector<const MutualSimilarityIndex*> out;
  for (const auto& per_layer : tables_)
    for (const auto& t : per_layer) out.push_back(t.get());
  return out;
}

std::vector<const MutualSimilarityIndex*> Engine::tables_at(std::uint32_t r) const {
  const auto it = std::find(r_set_.begin(), r_set_.end(), r);
  if (it == r_set_.end()) fail(ErrorCode::kInvalidArgument, "receptive field not in r_set");
  std::vector<const MutualSimilarityIndex*> out;
  for (const auto& t : tables_[static_cast<std::size_t>(it - r_set_.begin())]) out.push_back(t.get());
  return out;
}

AnomalyScoreMap Engine::to_map(std::vector<double> scores) const {
  AnomalyScoreMap map;
  map.n_images = features_.n_images;
  map.grid_side = features_.grid_side;
  map.patch_scores = std::move(scores);
  map.image_ids = features_.image_ids;
  fill_image_scores(map);
  return map;
}

AnomalyScoreMap Engine::baseline() const {
  const auto all = tables();
  return to_map(final_patch_scores(all, k_));
}

Detection Engine::detect(const PipelineConfig& config) const {
  config.validate();
  Detection d;
  const std::size_t n = features_.n_images;
  d.omega = omega_from_fraction(config.omega_fraction, n, row_length_);
  const auto candidates = collect_link_candidates(aggregated_index_, d.omega, config.alpha);
  d.candidates = candidates.size();
  if (config.selection == LinkSelection::kCoverage) {
    d.links = coverage_based_selection(candidates, config.tau_cov, n, features_.n_layers);
  } else {
    const std::size_t budget = config.link_budget ? config.link_budget : n * (n - 1) / 2;
    d.links = fixed_budget_selection(candidates, budget, n, features_.n_layers);
  }
  d.graph = build_graph(d.links, n);
  d.graph.node_ids = features_.image_ids;
  d.graph_empty = d.graph.edges().empty();
  if (d.graph_empty) {
    d.partition.assignment.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      d.partition.assignment[i] = i;
      d.partition.communities.push_back({{i}, std::nullopt, false});
    }
    d.partition.k_iqr = config.k_iqr;
    return d;
  }
  const double gamma = select_gamma(d.graph, config.gamma_quantile);
  d.partition = leiden_cpm(d.graph, gamma, config.seed);
  flag_outlier_communities(d.graph, d.partition, config.k_iqr);
  return d;
}

ExclusionSet Engine::filter(const Detection& detection, const PipelineConfig& config) const {
  std::vector<std::vector<std::uint32_t>> flagged;
  for (const auto& c : detection.partition.communities)
    if (c.outlier) flagged.push_back(c.members);
  if (flagged.empty())
    return ExclusionSet::none(features_.n_images, static_cast<std::uint32_t>(features_.n_patches()));
  return targeted_filtering(flagged, tables_at(1), k_, config.theta_percentile / 100.0);
}

AnomalyScoreMap Engine::rescore(const ExclusionSet& exclusions) const {
  std::vector<ScoringCell> cells;
  for (std::size_t ri = 0; ri < tables_.size(); ++ri)
    for (const auto& t : tables_[ri]) cells.push_back({aggregated_[ri].get(), t.get()});
  return to_map(rescore_with_exclusions(cells, exclusions, k_));
}

RunResult Engine::run(const PipelineConfig& config, const GroundTruth* truth) const {
  RunResult result;
  result.detection = detect(config);
  result.exclusions = filter(result.detection, config);
  result.scores = rescore(result.exclusions);
  result.baseline = baseline();
  if (truth) {
    if (truth->n_images != features_.n_images || truth->grid_side != features_.grid_side)
      fail(ErrorCode::kDimensionMismatch, "ground truth does not match the feature set");
    result.report = evaluate(result.scores, *truth);
    result.report->capture = capture_and_exclusion(result.exclusions, *truth, result.baseline.patch_scores);
  }
  return result;
}

std::string image_scores_json(const AnomalyScoreMap& map) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < map.n_images; ++i)
    arr.push_back({{"image", i}, {"id", map.image_ids[i]}, {"score", map.image_scores[i]}});
  return nlohmann::json{{"images", arr}}.dump(1);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_file(path, text);
}

std::string manifest_json(const PipelineConfig& config, std::uint64_t feature_hash,
                          std::string_view mode, const RunResult* result) {
  nlohmann::json j{{"mode", mode},
                   {"format_version", kFormatVersion},
                   {"feature_hash", feature_hash},
                   {"backend", kernels::backend_name(kernels::active_backend())},
                   {"config", config.to_text()},
                   {"seed", config.seed}};
  if (result) {
    const auto& d = result->detection;
    j["omega"] = d.omega;
    j["link_candidates"] = d.candidates;
    j["links_admitted"] = d.links.links.size();
    j["coverage"] = d.links.coverage_achieved;
    j["gamma"] = d.partition.gamma;
    j["flagged_communities"] = d.partition.flagged().size();
    j["excluded_patches"] = result->exclusions.members.size();
  }
  return j.dump(1);
}

}  // namespace

void write_run_outputs(const PipelineConfig& config, const RunResult& result,
                       std::uint64_t feature_hash) {
  const auto& dir = config.output;
  std::filesystem::create_directories(dir);
  write_score_map(result.scores, dir / "scores.cdgs");
  write_score_map(result.baseline, dir / "baseline.cdgs");
  write_text(dir / "image_scores.json", image_scores_json(result.scores));
  write_text(dir / "exclusions.json", exclusion_json(result.exclusions, result.scores.image_ids));
  write_text(dir / "graph.json", graph_json(result.detection.graph, &result.detection.partition));
  write_text(dir / "links.json", link_set_json(result.detection.links, result.scores.image_ids));
  if (result.report) write_text(dir / "report.json", result.report->to_json());
  write_text(dir / "effective.cfg", config.to_text());
  write_text(dir / "manifest.json", manifest_json(config, feature_hash, "run", &result));
}

RunResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  if (config.features.empty()) bad("features path is required");
  if (config.output.empty()) bad("output directory is required");
  const std::uint64_t hash = hash_file(config.features);
  Engine engine(load_feature_set(config.features), config, hash);
  std::optional<GroundTruth> truth;
  if (!config.ground_truth.empty()) truth = load_ground_truth(config.ground_truth);
  RunResult result = engine.run(config, truth ? &*truth : nullptr);
  write_run_outputs(config, result, hash);
  return result;
}

AnomalyScoreMap run_baseline(const PipelineConfig& config) {
  config.validate();
  if (config.features.empty()) bad("features path is required");
  if (config.output.empty()) bad("output directory is required");
  const std::uint64_t hash = hash_file(config.features);
  Engine engine(load_feature_set(config.features), config, hash);
  AnomalyScoreMap map = engine.baseline();
  const auto& dir = config.output;
  std::filesystem::create_directories(dir);
  write_score_map(map, dir / "scores.cdgs");
  write_text(dir / "image_scores.json", image_scores_json(map));
  if (!config.ground_truth.empty()) {
    const GroundTruth truth = load_ground_truth(config.ground_truth);
    write_text(dir / "report.json", evaluate(map, truth).to_json());
  }
  write_text(dir / "effective.cfg", config.to_text());
  write_text(dir / "manifest.json", manifest_json(config, hash, "baseline", nullptr));
  return map;
}

}  // namespace codegraph
