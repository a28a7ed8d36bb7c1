// SPDX-License-Identifier: Apache-2.0
#include "codegraph/evt.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <fstream>
#include <functional>

#include "codegraph/burnout.hpp"
#include "codegraph/error.hpp"
#include "codegraph/parallel.hpp"
#include "codegraph/rng.hpp"
#include "codegraph/stats.hpp"

namespace codegraph {

namespace {

std::vector<double> sorted_descending_logs(std::span<const double> samples) {
  std::vector<double> logs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] > 0.0) || !std::isfinite(samples[i]))
      fail(ErrorCode::kOutOfRangeSample, "Hill samples must be positive and finite");
    logs[i] = std::log(samples[i]);
  }
  std::sort(logs.begin(), logs.end(), std::greater<>());
  return logs;
}

// k / (sum_{j<k} logs[j] - k * logs[k]) from a prefix sum.
double hill_from_prefix(const std::vector<double>& logs, const std::vector<double>& prefix,
                        std::size_t k) {
  const double excess = prefix[k] - static_cast<double>(k) * logs[k];
  if (!(excess > 0.0)) fail(ErrorCode::kDegenerateTail, "top order statistics are all equal");
  return static_cast<double>(k) / excess;
}

std::vector<double> prefix_sums(const std::vector<double>& v) {
  std::vector<double> prefix(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
  return prefix;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.precision(17);
  return out;
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace

double hill_estimator(std::span<const double> samples, std::size_t k) {
  if (k == 0 || k >= samples.size())
    fail(ErrorCode::kInvalidArgument, "Hill estimator needs 1 <= k < n");
  const auto logs = sorted_descending_logs(samples);
  double excess = 0.0;
  for (std::size_t j = 0; j < k; ++j) excess += logs[j] - logs[k];
  if (!(excess > 0.0)) fail(ErrorCode::kDegenerateTail, "top order statistics are all equal");
  return static_cast<double>(k) / excess;
}

double TailEstimate::average(std::size_t k_lo, std::size_t k_hi) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < k_values.size(); ++t) {
    if (k_values[t] >= k_lo && k_values[t] <= k_hi) {
      sum += alpha_hats[t];
      ++n;
    }
  }
  if (n == 0) fail(ErrorCode::kInvalidArgument, "no Hill estimates inside the requested k range");
  return sum / static_cast<double>(n);
}

TailEstimate hill_plot(std::span<const double> samples, std::size_t k_min, std::size_t k_max,
                       std::size_t points, double tolerance) {
  if (k_min == 0 || k_min > k_max || k_max >= samples.size() || points == 0)
    fail(ErrorCode::kInvalidArgument, "Hill plot needs 1 <= k_min <= k_max < n");
  const auto logs = sorted_descending_logs(samples);
  const auto prefix = prefix_sums(logs);

  TailEstimate est;
  const double ratio = static_cast<double>(k_max) / static_cast<double>(k_min);
  for (std::size_t t = 0; t < points; ++t) {
    const double f = points == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(points - 1);
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(k_min) * std::pow(ratio, f)));
    if (!est.k_values.empty() && k <= est.k_values.back()) continue;
    est.k_values.push_back(k);
    est.alpha_hats.push_back(hill_from_prefix(logs, prefix, k));
  }

  // Windows span a factor of ten in k, or the whole grid.
  const std::size_t n = est.k_values.size();
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t b = a;
    while (b + 1 < n && est.k_values[b + 1] <= 10 * est.k_values[a]) ++b;
    const bool full_decade = est.k_values[b] >= 10 * est.k_values[a] ||
                             (b + 1 < n && est.k_values[b + 1] > 10 * est.k_values[a]);
    if (!full_decade && !(a == 0 && b == n - 1)) continue;
    double lo = est.alpha_hats[a], hi = lo, sum = 0.0;
    for (std::size_t t = a; t <= b; ++t) {
      lo = std::min(lo, est.alpha_hats[t]);
      hi = std::max(hi, est.alpha_hats[t]);
      sum += est.alpha_hats[t];
    }
    const double mu = sum / static_cast<double>(b - a + 1);
    const double spread = (hi - lo) / mu;
    const bool stable = hi <= mu * (1.0 + tolerance) && lo >= mu * (1.0 - tolerance);
    if (stable && (!est.plateau || spread < est.plateau->spread))
      est.plateau = Plateau{est.k_values[a], est.k_values[b], mu, spread};
  }
  return est;
}

std::vector<double> SpacingSimulation::samples(std::size_t i) const {
  if (i == 0 || i > n_indices()) fail(ErrorCode::kInvalidArgument, "spacing index out of range");
  std::vector<double> out(trials);
  for (std::size_t t = 0; t < trials; ++t) out[t] = tau[t * n_indices() + (i - 1)];
  return out;
}

double SpacingSimulation::mean(std::size_t i) const { return stats::mean(samples(i)); }

double SpacingSimulation::variance(std::size_t i) const { return stats::variance(samples(i)); }

double SpacingSimulation::ks(std::size_t i) const {
  return stats::ks_exponential(samples(i), alpha * static_cast<double>(i));
}

std::vector<double> SpacingSimulation::cumulative(std::size_t i, std::size_t j) const {
  if (i == 0 || j <= i || j > omega) fail(ErrorCode::kInvalidArgument, "need 1 <= i < j <= omega");
  std::vector<double> out(trials, 0.0);
  for (std::size_t t = 0; t < trials; ++t)
    for (std::size_t k = i; k < j; ++k) out[t] += tau[t * n_indices() + (k - 1)];
  return out;
}

double SpacingSimulation::correlation(std::size_t i, std::size_t j) const {
  return stats::pearson_correlation(samples(i), samples(j));
}

SpacingSimulation simulate_log_spacings(double alpha, std::size_t omega, std::size_t trials,
                                        std::uint64_t seed) {
  if (!(alpha > 0.0)) fail(ErrorCode::kInvalidArgument, "alpha must be positive");
  if (omega < 2 || trials == 0) fail(ErrorCode::kInvalidArgument, "need omega >= 2 and trials >= 1");
  SpacingSimulation sim;
  sim.alpha = alpha;
  sim.omega = omega;
  sim.trials = trials;
  sim.seed = seed;
  sim.tau.resize(trials * (omega - 1));
  parallel_for(trials, [&](std::size_t t) {
    CounterRng rng(seed, t);
    std::vector<double> z(omega);
    for (auto& v : z) v = std::pow(rng.uniform(), 1.0 / alpha);
    std::sort(z.begin(), z.end());
    for (std::size_t i = 0; i + 1 < omega; ++i)
      sim.tau[t * (omega - 1) + i] = std::log(z[i + 1] / z[i]);
  });
  return sim;
}

std::vector<double> negative_log_beta_samples(double alpha, std::size_t n, std::uint64_t seed) {
  if (!(alpha > 0.0)) fail(ErrorCode::kInvalidArgument, "alpha must be positive");
  CounterRng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = -std::log(std::pow(rng.uniform(), 1.0 / alpha));
  return out;
}

std::vector<double> exponential_spacing_means(double lambda, std::size_t n, std::size_t trials,
                                              std::uint64_t seed) {
  if (!(lambda > 0.0) || n == 0 || trials == 0)
    fail(ErrorCode::kInvalidArgument, "need lambda > 0, n >= 1, trials >= 1");
  std::vector<double> sums(n, 0.0);
  std::vector<double> e(n);
  for (std::size_t t = 0; t < trials; ++t) {
    CounterRng rng(seed, t);
    for (auto& v : e) v = -std::log(rng.uniform()) / lambda;
    std::sort(e.begin(), e.end());
    double prev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sums[k] += e[k] - prev;
      prev = e[k];
    }
  }
  for (auto& s : sums) s /= static_cast<double>(trials);
  return sums;
}

CouponEstimate coupon_collector_expected_turns(std::size_t m, double p, std::size_t trials,
                                               std::uint64_t seed) {
  if (m == 0) fail(ErrorCode::kInvalidArgument, "need at least one ball");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kInvalidArgument, "p must lie in [0, 1]");
  CouponEstimate est;
  est.m = m;
  est.p = p;
  est.trials = trials;
  const double md = static_cast<double>(m);
  const double hm = stats::harmonic_number(m);
  est.classical = md * hm;
  // A single ball cannot be drawn twice per turn.
  const double q = m >= 2 ? p : 0.0;

  std::vector<double> expect(m + 2, 0.0);
  for (std::size_t c = m; c-- > 0;) {
    const double cd = static_cast<double>(c);
    const double left = md - cd;
    double stay = (1.0 - q) * cd / md;
    double acc = 1.0 + (1.0 - q) * left / md * expect[c + 1];
    if (m >= 2) {
      const double pairs = md * (md - 1.0) / 2.0;
      stay += q * cd * (cd - 1.0) / 2.0 / pairs;
      acc += q * (left * cd / pairs * expect[c + 1] + left * (left - 1.0) / 2.0 / pairs * expect[c + 2]);
    }
    expect[c] = acc / (1.0 - stay);
  }
  est.exact = expect[0];

  if (m >= 2) {
    const double a1 = 1.0 / md + q / (md - 1.0);
    const double a2 = q / (md * (md - 1.0));
    est.coefficient = hm / a1 + a2 / (a1 * a1);
  } else {
    est.coefficient = 1.0;
  }
  est.asymptotic = md * std::log(md) / (1.0 + q) + q / ((1.0 + q) * (1.0 + q));

  if (trials > 0) {
    std::vector<double> turns(trials);
    parallel_for(trials, [&](std::size_t t) {
      CounterRng rng(seed, t);
      std::vector<std::uint8_t> drawn(m, 0);
      std::size_t covered = 0, count = 0;
      while (covered < m) {
        ++count;
        const auto a = rng.below(m);
        if (!drawn[a]) drawn[a] = 1, ++covered;
        if (m >= 2 && rng.uniform() < q) {
          auto b = rng.below(m - 1);
          if (b >= a) ++b;
          if (!drawn[b]) drawn[b] = 1, ++covered;
        }
      }
      turns[t] = static_cast<double>(count);
    });
    est.mc_mean = stats::mean(turns);
    est.mc_standard_error = std::sqrt(stats::variance(turns) / static_cast<double>(trials));
  }
  return est;
}

double simulate_link_coverage(std::size_t m, double tau, std::size_t trials, std::uint64_t seed) {
  if (m < 2 || trials == 0) fail(ErrorCode::kInvalidArgument, "need m >= 2 and trials >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorCode::kInvalidArgument, "tau must lie in (0, 1]");
  const auto target = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(m) - 1e-9));
  std::vector<double> links(trials);
  parallel_for(trials, [&](std::size_t t) {
    CounterRng rng(seed, t);
    std::vector<std::uint8_t> touched(m, 0);
    std::size_t covered = 0, count = 0;
    while (covered < target) {
      ++count;
      const auto a = rng.below(m);
      auto b = rng.below(m - 1);
      if (b >= a) ++b;
      if (!touched[a]) touched[a] = 1, ++covered;
      if (!touched[b]) touched[b] = 1, ++covered;
    }
    links[t] = static_cast<double>(count);
  });
  return stats::mean(links);
}

QqResult qq_pairs(std::span<const double> samples, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) fail(ErrorCode::kInvalidArgument, "Beta parameters must be positive");
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "Q-Q plot of an empty sample");
  for (double s : samples)
    if (!(s > 0.0 && s <= 1.0))
      fail(ErrorCode::kOutOfRangeSample, "Q-Q samples must lie in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  QqResult out;
  const auto n = static_cast<double>(sorted.size());
  out.pairs.reserve(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    const double level = (static_cast<double>(j) + 0.5) / n;
    out.pairs.emplace_back(sorted[j], boost::math::ibeta_inv(a, b, level));
  }
  out.degenerate = sorted.size() >= 2 && sorted.front() == sorted.back();
  return out;
}

std::string_view to_string(PatchClass c) noexcept {
  switch (c) {
    case PatchClass::kNormal: return "normal";
    case PatchClass::kConsistent: return "consistent";
    case PatchClass::kInconsistent: return "inconsistent";
  }
  return "unknown";
}

namespace {

template <class RowFn>
std::vector<GrowthCurve> curves_from_rows(std::size_t n_rows, std::size_t row_length, RowFn row,
                                          std::span<const PatchClass> classes) {
  if (!classes.empty() && classes.size() != n_rows)
    fail(ErrorCode::kDimensionMismatch, "one class label per ranking row is required");
  if (row_length < 2) fail(ErrorCode::kInvalidArgument, "rows too short for growth rates");
  const std::size_t n_curves = classes.empty() ? 1 : 3;
  std::vector<std::vector<stats::RunningMoments>> moments(
      n_curves, std::vector<stats::RunningMoments>(row_length - 1));
  std::vector<std::size_t> rows(n_curves, 0);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t c = classes.empty() ? 0 : static_cast<std::size_t>(classes[r]);
    const auto d = row(r);
    ++rows[c];
    for (std::size_t i = 1; i < d.size(); ++i)
      moments[c][i - 1].add(growth_rate(d, i, ZeroPolicy::kClamp));
  }
  std::vector<GrowthCurve> out;
  for (std::size_t c = 0; c < n_curves; ++c) {
    if (rows[c] == 0) continue;
    GrowthCurve curve;
    curve.label = classes.empty() ? "all" : std::string(to_string(static_cast<PatchClass>(c)));
    curve.rows = rows[c];
    for (const auto& m : moments[c]) {
      curve.mean.push_back(m.mean());
      curve.stddev.push_back(std::sqrt(m.variance()));
    }
    out.push_back(std::move(curve));
  }
  return out;
}

}  // namespace

std::vector<GrowthCurve> growth_curves(const AggregatedDistanceIndex& index,
                                       std::span<const PatchClass> classes) {
  return curves_from_rows(
      index.n_rows(), index.row_length, [&](std::size_t r) { return index.row_distances(r); },
      classes);
}

std::vector<GrowthCurve> growth_curves(const MutualSimilarityIndex& index,
                                       std::span<const PatchClass> classes) {
  return curves_from_rows(
      index.n_rows(), index.row_length, [&](std::size_t r) { return index.row_distances(r); },
      classes);
}

void write_hill_csv(const TailEstimate& estimate, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "k,alpha_hat\n";
  for (std::size_t t = 0; t < estimate.k_values.size(); ++t)
    out << estimate.k_values[t] << ',' << estimate.alpha_hats[t] << '\n';
  close_csv(out, path);
}

void write_qq_csv(const QqResult& qq, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "j,empirical,theoretical\n";
  for (std::size_t j = 0; j < qq.pairs.size(); ++j)
    out << j + 1 << ',' << qq.pairs[j].first << ',' << qq.pairs[j].second << '\n';
  close_csv(out, path);
}

void write_growth_csv(std::span<const GrowthCurve> curves, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "class,i,mean_tau,std_tau,rows\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.mean.size(); ++i)
      out << c.label << ',' << i + 1 << ',' << c.mean[i] << ',' << c.stddev[i] << ',' << c.rows
          << '\n';
  close_csv(out, path);
}

void write_spacing_csv(const SpacingSimulation& sim, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "i,mean_tau,var_tau,theory_mean,theory_var,ks\n";
  for (std::size_t i = 1; i <= sim.n_indices(); ++i) {
    const double rate = sim.alpha * static_cast<double>(i);
    out << i << ',' << sim.mean(i) << ',' << sim.variance(i) << ',' << 1.0 / rate << ','
        << 1.0 / (rate * rate) << ',' << sim.ks(i) << '\n';
  }
  close_csv(out, path);
}

void write_coupon_csv(std::span<const CouponEstimate> rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "m,p,classical,exact,coefficient,asymptotic,mc_mean,mc_se,trials\n";
  for (const auto& r : rows)
    out << r.m << ',' << r.p << ',' << r.classical << ',' << r.exact << ',' << r.coefficient << ','
        << r.asymptotic << ',' << r.mc_mean << ',' << r.mc_standard_error << ',' << r.trials
        << '\n';
  close_csv(out, path);
}

}  // namespace codegraph
