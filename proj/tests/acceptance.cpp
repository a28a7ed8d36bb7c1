// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if
// any criterion fails. Tolerances are fixed here and nowhere else.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "codegraph/burnout.hpp"
#include "codegraph/evt.hpp"
#include "codegraph/graph.hpp"
#include "codegraph/metrics.hpp"
#include "codegraph/msm.hpp"
#include "codegraph/pipeline.hpp"
#include "codegraph/stats.hpp"
#include "codegraph/synth.hpp"
#include "support.hpp"

using namespace codegraph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& body,
            double time_limit = 0.0) {
  const auto start = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (time_limit > 0.0 && secs >= time_limit) {
    out.pass = false;
    out.detail += " [over time limit]";
  }
  if (!out.pass) ++failures;
  std::printf("%s %s  %s (%.1fs)  %s\n", id, out.pass ? "PASS" : "FAIL", title, secs, out.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome p1() {
  CounterRng rng(101);
  double worst = 0.0;
  std::size_t order_errors = 0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::uint32_t>(2 + rng.below(5));
    const auto layers = static_cast<std::uint32_t>(1 + rng.below(2));
    const auto side = static_cast<std::uint32_t>(1 + rng.below(4));
    const auto c = static_cast<std::uint32_t>(1 + rng.below(8));
    const auto feats = support::random_features(rng, n, layers, side, c);
    std::vector<std::uint32_t> r_set{1};
    if (side >= 3) r_set.push_back(3);
    const std::size_t m_n = feats.n_patches();
    const std::size_t k = 1 + rng.below(n - 1);

    std::vector<MutualSimilarityIndex> tables;
    std::vector<double> want(n * m_n, 0.0);
    for (auto r : r_set) {
      const auto agg = aggregate(feats, r);
      const std::vector<double> tokens(agg.tokens.begin(), agg.tokens.end());
      for (std::uint32_t l = 0; l < layers; ++l) {
        tables.push_back(build_msr(agg, l));
        const auto& table = tables.back();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t m = 0; m < m_n; ++m) {
            const auto ref = support::brute_row(tokens, n, layers, m_n, c, l, i, m);
            const auto row = table.row_index(i, m);
            std::vector<double> d;
            for (std::size_t a = 0; a < ref.size(); ++a) {
              d.push_back(ref[a].distance);
              const double got = table.row_distances(row)[a];
              worst = std::max(worst, std::abs(got - ref[a].distance) / std::max(ref[a].distance, 1e-30));
              if (table.row_images(row)[a] != ref[a].image || table.row_patches(row)[a] != ref[a].patch)
                ++order_errors;
            }
            const double eq1 = support::mean_of_first(d, k);
            const double got1 = interval_average_score(table.row_distances(row), k);
            worst = std::max(worst, std::abs(got1 - eq1) / std::max(eq1, 1e-30));
            want[i * m_n + m] += eq1;
          }
      }
    }
    for (auto& w : want) w /= static_cast<double>(tables.size());
    std::vector<const MutualSimilarityIndex*> ptrs;
    for (const auto& tb : tables) ptrs.push_back(&tb);
    const auto got = final_patch_scores(ptrs, k);
    for (std::size_t p = 0; p < want.size(); ++p)
      worst = std::max(worst, std::abs(got[p] - want[p]) / std::max(want[p], 1e-30));
  }
  return {worst <= 1e-6 && order_errors == 0,
          fmt("max rel err %.3g", worst) + ", ordering mismatches " + std::to_string(order_errors)};
}

Outcome p2() {
  const auto sim = simulate_log_spacings(3.0, 200, 20000, 2);
  bool ok = true;
  std::string detail;
  for (std::size_t i : {1u, 5u, 20u, 50u}) {
    const double mean_target = 1.0 / (3.0 * i);
    const double var_target = mean_target * mean_target;
    const double mean_err = std::abs(sim.mean(i) - mean_target) / mean_target;
    const double var_err = std::abs(sim.variance(i) - var_target) / var_target;
    const double ks = sim.ks(i);
    ok = ok && mean_err < 0.03 && var_err < 0.10 && ks < 0.01;
    char buf[128];
    std::snprintf(buf, sizeof buf, "i=%zu mean %.2f%% var %.2f%% KS %.4f; ", i, 100 * mean_err, 100 * var_err, ks);
    detail += buf;
  }
  return {ok, detail};
}

Outcome p3() {
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 3;
  for (double a : {0.5, 1.0, 3.0}) {
    const double ks = stats::ks_exponential(negative_log_beta_samples(a, 100000, seed++), a);
    ok = ok && ks < 0.01;
    detail += fmt("alpha=%g ", a) + fmt("KS %.4f; ", ks);
  }
  return {ok, detail};
}

Outcome p4() {
  CounterRng rng(4);
  std::vector<double> x(100000);
  for (auto& v : x) v = std::pow(rng.uniform(), -1.0 / 2.5);
  const auto est = hill_plot(x, 500, 5000, 200);
  const double avg = est.average(500, 5000);
  const double err = std::abs(avg - 2.5) / 2.5;
  std::string detail = fmt("mean alpha-hat over k in [500,5000] %.4f", avg) + fmt(" (%.2f%%)", 100 * err);
  if (est.plateau) detail += fmt(", plateau %.4f", est.plateau->value);
  return {err < 0.05, detail};
}

Outcome p5() {
  const auto classic = coupon_collector_expected_turns(50, 0.0, 20000, 5);
  const double err = std::abs(classic.mc_mean - classic.classical) / classic.classical;
  const auto mixed = coupon_collector_expected_turns(100, 0.5, 20000, 6);
  const double z = std::abs(mixed.mc_mean - mixed.coefficient) / mixed.mc_standard_error;
  std::string detail = fmt("m=50: MC %.3f", classic.mc_mean) + fmt(" vs m*H_m %.3f", classic.classical) +
                       fmt(" (%.2f%%); ", 100 * err) + fmt("m=100,p=0.5: MC %.2f", mixed.mc_mean) +
                       fmt(" vs H_m/a1+a2/a1^2 %.2f", mixed.coefficient) + fmt(" (%.2f SE)", z) +
                       fmt(", asymptotic form %.2f", mixed.asymptotic);
  return {err < 0.02 && z < 3.0, detail};
}

Outcome p6() {
  CounterRng rng(6);
  int optimal = 0, exceeded = 0, nondeterministic = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(7);
    std::vector<Edge> edges;
    for (std::uint32_t a = 0; a < n; ++a)
      for (std::uint32_t b = a + 1; b < n; ++b)
        if (rng.uniform() < 0.6) edges.push_back({a, b, static_cast<double>(1 + rng.below(8))});
    if (edges.empty()) edges.push_back({0, 1, 1.0});
    const SimilarityGraph g(n, edges);
    const double gamma = select_gamma(g);
    const auto a = leiden_cpm(g, gamma, static_cast<std::uint64_t>(t));
    const auto b = leiden_cpm(g, gamma, static_cast<std::uint64_t>(t));
    if (a.assignment != b.assignment) ++nondeterministic;
    support::DenseGraph dense{n, std::vector<double>(n * n, 0.0)};
    for (const auto& e : g.edges()) dense.w[e.u * n + e.v] = dense.w[e.v * n + e.u] = e.weight;
    const double best = support::brute_best_cpm(dense, gamma);
    const double got = cpm_objective(g, a.assignment, gamma);
    if (got > best + 1e-9) ++exceeded;
    if (got >= best - 1e-9) ++optimal;
  }
  return {optimal >= 90 && exceeded == 0 && nondeterministic == 0,
          "optimal " + std::to_string(optimal) + "/100, exceeded " + std::to_string(exceeded) +
              ", nondeterministic " + std::to_string(nondeterministic)};
}

// Runs collected for P11.
struct SynthRun {
  std::string name;
  RunResult result;
};
std::vector<SynthRun> synth_runs;

std::vector<std::uint32_t> flagged_images(const Detection& d) {
  std::vector<std::uint32_t> out;
  for (auto c : d.partition.flagged())
    for (auto v : d.partition.communities[c].members) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

double planted_mean(const std::vector<double>& scores, const PlantManifest& manifest, std::size_t m_n) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& p : manifest.consistent)
    for (auto c : p.cells) {
      s += scores[p.image * m_n + c];
      ++n;
    }
  return s / static_cast<double>(n);
}

Outcome p7() {
  const auto synth = generate(SynthConfig{});
  auto want = synth.manifest.consistent_images();
  std::sort(want.begin(), want.end());
  const Engine engine(synth.features, PipelineConfig{});
  bool ok = true;
  std::string detail;
  for (double k : {1.5, 3.0, 4.5}) {
    PipelineConfig cfg;
    cfg.k_iqr = k;
    auto result = engine.run(cfg, &synth.truth);
    const bool exact = flagged_images(result.detection) == want;
    const auto& cap = *result.report->capture;
    const double ratio = planted_mean(result.scores.patch_scores, synth.manifest, synth.features.n_patches()) /
                         planted_mean(result.baseline.patch_scores, synth.manifest, synth.features.n_patches());
    ok = ok && exact && cap.capture_rate >= 0.95 && cap.normal_excluded_rate < 0.01 && ratio >= 2.0;
    char buf[200];
    std::snprintf(buf, sizeof buf, "k=%.1f flagged %s capture %.3f normal-excluded %.4f ratio %.1fx; ", k,
                  exact ? "exact" : "WRONG", cap.capture_rate, cap.normal_excluded_rate, ratio);
    detail += buf;
    synth_runs.push_back({fmt("default k=%.1f", k), std::move(result)});
  }
  return {ok, detail};
}

Outcome p8() {
  SynthConfig sc;
  sc.n_images = 20;
  sc.n_consistent = 5;
  sc.n_inconsistent = 2;
  sc.duplicate_images = true;
  const auto synth = generate(sc);
  auto want = synth.manifest.consistent_images();
  std::sort(want.begin(), want.end());
  const Engine engine(synth.features, PipelineConfig{});

  PipelineConfig fixed;
  fixed.selection = LinkSelection::kFixedBudget;
  auto fixed_run = engine.run(fixed, &synth.truth);
  PipelineConfig coverage;
  auto cov_run = engine.run(coverage, &synth.truth);

  const double fixed_cov = fixed_run.detection.links.coverage_achieved;
  const double cov = cov_run.detection.links.coverage_achieved;
  const bool fixed_flagged = !fixed_run.detection.partition.flagged().empty();
  const bool exact = flagged_images(cov_run.detection) == want;
  std::string detail = fmt("fixed budget: coverage %.3f", fixed_cov) +
                       (fixed_flagged ? ", flagged" : ", no flag") + fmt("; coverage-based: coverage %.3f", cov) +
                       ", batches " + std::to_string(cov_run.detection.links.batches) +
                       (exact ? ", clique flagged exactly" : ", clique NOT flagged exactly");
  synth_runs.push_back({"duplicated fixed", std::move(fixed_run)});
  synth_runs.push_back({"duplicated coverage", std::move(cov_run)});
  return {fixed_cov <= 0.6 && !fixed_flagged && cov >= 0.95 && exact, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome p9() {
  SynthConfig sc;
  sc.n_consistent = 0;
  const auto synth = generate(sc);
  const auto dir = fs::temp_directory_path() / "codegraph_acceptance_p9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_feature_set(synth.features, dir / "features.cdgf");
  PipelineConfig cfg;
  cfg.features = dir / "features.cdgf";
  cfg.output = dir / "run";
  auto result = run_pipeline(cfg);
  PipelineConfig base = cfg;
  base.output = dir / "baseline";
  run_baseline(base);
  const bool same = slurp(dir / "run" / "scores.cdgs") == slurp(dir / "baseline" / "scores.cdgs") &&
                    slurp(dir / "run" / "image_scores.json") == slurp(dir / "baseline" / "image_scores.json");
  const bool empty = result.exclusions.empty();
  const std::size_t flagged = result.detection.partition.flagged().size();
  synth_runs.push_back({"no plants", std::move(result)});
  return {same && empty, std::string(same ? "scores bitwise equal to baseline" : "scores DIFFER from baseline") +
                             ", excluded patches " + (empty ? "0" : "non-zero") + ", flagged communities " +
                             std::to_string(flagged)};
}

Outcome p10() {
  CounterRng rng(10);
  double worst = 0.0;
  bool invariant = true;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.below(63);
    std::vector<double> s(n), g(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t a = 0; a < n; ++a) {
      s[a] = t % 3 == 0 ? static_cast<double>(rng.below(6)) : rng.uniform();
      g[a] = std::exp(2.0 * s[a]) + 1.0;
      y[a] = static_cast<std::uint8_t>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(auroc(s, y) - support::brute_auroc(s, y)));
    worst = std::max(worst, std::abs(f1_max(s, y) - support::brute_f1(s, y)));
    worst = std::max(worst, std::abs(average_precision(s, y) - support::brute_ap(s, y)));
    invariant = invariant && auroc(g, y) == auroc(s, y) && f1_max(g, y) == f1_max(s, y) &&
                average_precision(g, y) == average_precision(s, y);

    const int maps = 1 + static_cast<int>(rng.below(2));
    const int h = 2 + static_cast<int>(rng.below(5)), w = 2 + static_cast<int>(rng.below(5));
    std::vector<double> ms(maps * h * w), mg(ms.size());
    std::vector<std::uint8_t> my(ms.size());
    for (std::size_t p = 0; p < ms.size(); ++p) {
      ms[p] = t % 4 == 0 ? static_cast<double>(rng.below(5)) : rng.uniform();
      mg[p] = 3.0 * ms[p] * ms[p] * ms[p] + 0.5;
      my[p] = rng.uniform() < 0.3;
    }
    my[0] = 1;
    my[1] = 0;
    const auto pro = aupro(ms, my, maps, h, w, 0.3);
    worst = std::max(worst, std::abs(pro.value - support::brute_aupro(ms, my, maps, h, w, 0.3)));
    invariant = invariant && aupro(mg, my, maps, h, w, 0.3).value == pro.value;
  }
  return {worst <= 1e-9 && invariant,
          fmt("max abs err %.3g", worst) + (invariant ? ", monotone invariance holds" : ", invariance BROKEN")};
}

Outcome p11() {
  std::size_t patches = 0, bad_ratio = 0, bad_score = 0;
  double min_ratio = INFINITY;
  for (const auto& run : synth_runs) {
    for (const auto& c : run.result.exclusions.communities)
      for (double r : c.ratios) {
        min_ratio = std::min(min_ratio, r);
        if (r < 1.0) ++bad_ratio;
      }
    const auto& a = run.result.scores.patch_scores;
    const auto& b = run.result.baseline.patch_scores;
    for (std::size_t p = 0; p < a.size(); ++p) {
      ++patches;
      if (a[p] < b[p]) ++bad_score;
    }
  }
  std::string detail = std::to_string(synth_runs.size()) + " runs, " + std::to_string(patches) +
                       " patch scores; ratios below 1: " + std::to_string(bad_ratio) +
                       ", scores lowered: " + std::to_string(bad_score);
  if (std::isfinite(min_ratio)) detail += fmt(", min ratio %.6f", min_ratio);
  return {!synth_runs.empty() && bad_ratio == 0 && bad_score == 0, detail};
}

}  // namespace

int main() {
  report("P1", "ranking tables and scores vs brute-force oracle", p1, 30.0);
  report("P2", "log-spacing moments and KS", p2, 60.0);
  report("P3", "-ln Beta vs exponential", p3);
  report("P4", "Hill estimate on Pareto(2.5)", p4);
  report("P5", "coupon collector", p5);
  report("P6", "Leiden vs exhaustive CPM optimum", p6);
  report("P7", "planted-community recovery", p7, 120.0);
  report("P8", "coverage-based vs fixed-budget selection", p8);
  report("P9", "no-op safety without plants", p9);
  report("P10", "metrics vs brute-force oracles", p10);
  report("P11", "filtering invariants over all synth runs", p11);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
