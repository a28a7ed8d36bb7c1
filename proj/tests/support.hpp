// Random instances and brute-force reference implementations shared by the
// unit tests and the acceptance runner. Everything here is written the slow,
// obvious way on purpose so it can serve as an oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "codegraph/feature_io.hpp"
#include "codegraph/lnamd.hpp"
#include "codegraph/rng.hpp"

namespace support {

inline codegraph::FeatureSet random_features(codegraph::CounterRng& rng, std::uint32_t n,
                                             std::uint32_t layers, std::uint32_t side,
                                             std::uint32_t channels, std::uint32_t cls = 4) {
  codegraph::FeatureSet fs;
  fs.n_images = n;
  fs.n_layers = layers;
  fs.grid_side = side;
  fs.n_channels = channels;
  fs.cls_dim = cls;
  fs.patch_tokens.resize(std::size_t{n} * layers * side * side * channels);
  for (auto& x : fs.patch_tokens) x = static_cast<float>(rng.normal());
  fs.class_tokens.resize(std::size_t{n} * cls);
  for (auto& x : fs.class_tokens) x = static_cast<float>(rng.normal());
  for (std::uint32_t i = 0; i < n; ++i) fs.image_ids.push_back("img" + std::to_string(i));
  return fs;
}

// Window mean over the clipped r x r neighbourhood, in double.
inline std::vector<double> brute_aggregate(const codegraph::FeatureSet& fs, std::uint32_t r) {
  const int s = static_cast<int>(fs.grid_side);
  const int h = static_cast<int>(r / 2);
  const std::size_t c_n = fs.n_channels;
  std::vector<double> out(fs.patch_tokens.size(), 0.0);
  for (std::size_t i = 0; i < fs.n_images; ++i)
    for (std::size_t l = 0; l < fs.n_layers; ++l)
      for (int u = 0; u < s; ++u)
        for (int v = 0; v < s; ++v) {
          const std::size_t m = static_cast<std::size_t>(u * s + v);
          for (std::size_t c = 0; c < c_n; ++c) {
            double sum = 0.0;
            int count = 0;
            for (int a = u - h; a <= u + h; ++a)
              for (int b = v - h; b <= v + h; ++b)
                if (a >= 0 && a < s && b >= 0 && b < s) {
                  sum += fs.patch(i, l, static_cast<std::size_t>(a * s + b))[c];
                  ++count;
                }
            out[((i * fs.n_layers + l) * fs.n_patches() + m) * c_n + c] = sum / count;
          }
        }
  return out;
}

struct BruteEntry {
  double distance;
  std::uint32_t image;
  std::uint32_t patch;
};

// Row (i, m) of layer l over aggregated tokens `tokens` (layout as FeatureSet),
// sorted by (distance, image).
inline std::vector<BruteEntry> brute_row(const std::vector<double>& tokens, std::size_t n_images,
                                         std::size_t n_layers, std::size_t n_patches,
                                         std::size_t channels, std::size_t l, std::size_t i,
                                         std::size_t m) {
  const auto tok = [&](std::size_t img, std::size_t p) {
    return tokens.data() + ((img * n_layers + l) * n_patches + p) * channels;
  };
  std::vector<BruteEntry> row;
  for (std::size_t j = 0; j < n_images; ++j) {
    if (j == i) continue;
    BruteEntry best{INFINITY, static_cast<std::uint32_t>(j), 0};
    for (std::size_t n = 0; n < n_patches; ++n) {
      double d = 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        const double diff = tok(i, m)[c] - tok(j, n)[c];
        d += diff * diff;
      }
      if (d < best.distance) best = {d, static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(n)};
    }
    row.push_back(best);
  }
  std::sort(row.begin(), row.end(), [](const BruteEntry& a, const BruteEntry& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.image < b.image;
  });
  return row;
}

inline double mean_of_first(const std::vector<double>& v, std::size_t k) {
  k = std::min(k, v.size());
  double s = 0.0;
  for (std::size_t a = 0; a < k; ++a) s += v[a];
  return s / static_cast<double>(k);
}

// Mean over (l, r) of the K-smallest mean of every patch's row.
inline std::vector<double> brute_scores(const codegraph::FeatureSet& fs,
                                        const std::vector<std::uint32_t>& r_set, std::size_t k) {
  const std::size_t m_n = fs.n_patches();
  std::vector<double> total(fs.n_images * m_n, 0.0);
  for (auto r : r_set) {
    const auto tokens = brute_aggregate(fs, r);
    for (std::size_t l = 0; l < fs.n_layers; ++l)
      for (std::size_t i = 0; i < fs.n_images; ++i)
        for (std::size_t m = 0; m < m_n; ++m) {
          const auto row = brute_row(tokens, fs.n_images, fs.n_layers, m_n, fs.n_channels, l, i, m);
          std::vector<double> d;
          for (const auto& e : row) d.push_back(e.distance);
          total[i * m_n + m] += mean_of_first(d, k);
        }
  }
  for (auto& t : total) t /= static_cast<double>(r_set.size() * fs.n_layers);
  return total;
}

// Dense symmetric weight matrix helper for graph oracles.
struct DenseGraph {
  std::size_t n;
  std::vector<double> w;  // n x n
  double at(std::size_t a, std::size_t b) const { return w[a * n + b]; }
};

inline double brute_cpm(const DenseGraph& g, const std::vector<std::uint32_t>& part, double gamma) {
  double q = 0.0;
  for (std::size_t a = 0; a < g.n; ++a)
    for (std::size_t b = 0; b < g.n; ++b)
      if (a != b && part[a] == part[b]) q += g.at(a, b) - gamma;
  return q;
}

// Calls f with every set partition of n nodes as a restricted growth string.
template <class F>
void for_each_partition(std::size_t n, F&& f) {
  std::vector<std::uint32_t> part(n, 0);
  const auto rec = [&](const auto& self, std::size_t pos, std::uint32_t blocks) -> void {
    if (pos == n) {
      f(part);
      return;
    }
    for (std::uint32_t b = 0; b <= blocks; ++b) {
      part[pos] = b;
      self(self, pos + 1, std::max(blocks, b + 1));
    }
  };
  if (n == 0) f(part);
  else rec(rec, 1, 1);
}

inline double brute_best_cpm(const DenseGraph& g, double gamma) {
  double best = -INFINITY;
  for_each_partition(g.n, [&](const std::vector<std::uint32_t>& p) {
    best = std::max(best, brute_cpm(g, p, gamma));
  });
  return best;
}

// Metric oracles over distinct thresholds; positive means score >= t.
inline double brute_auroc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] == 1 && y[b] == 0) {
        pairs += 1.0;
        good += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
  return good / pairs;
}

inline std::vector<double> distinct_descending(std::vector<double> s) {
  std::sort(s.begin(), s.end(), std::greater<>());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline double brute_f1(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double best = 0.0;
  for (double t : distinct_descending(s)) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t a = 0; a < s.size(); ++a) {
      const bool pred = s[a] >= t;
      tp += pred && y[a];
      fp += pred && !y[a];
      fn += !pred && y[a];
    }
    if (tp > 0) best = std::max(best, 2 * tp / (2 * tp + fp + fn));
  }
  return best;
}

inline double brute_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double positives = 0;
  for (auto v : y) positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : distinct_descending(s)) {
    double tp = 0, pred = 0;
    for (std::size_t a = 0; a < s.size(); ++a)
      if (s[a] >= t) {
        ++pred;
        tp += y[a];
      }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / pred);
    prev_recall = recall;
  }
  return ap;
}

// 8-connected flood fill, one id per region (1-based), 0 for background.
inline std::vector<int> brute_regions(const std::vector<std::uint8_t>& mask, int h, int w, int* count) {
  std::vector<int> id(mask.size(), 0);
  *count = 0;
  for (int start = 0; start < h * w; ++start) {
    if (!mask[start] || id[start]) continue;
    ++*count;
    std::vector<int> stack{start};
    id[start] = *count;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      for (int du = -1; du <= 1; ++du)
        for (int dv = -1; dv <= 1; ++dv) {
          const int u = p / w + du, v = p % w + dv;
          if (u < 0 || u >= h || v < 0 || v >= w) continue;
          const int q = u * w + v;
          if (mask[q] && !id[q]) {
            id[q] = *count;
            stack.push_back(q);
          }
        }
    }
  }
  return id;
}

// Threshold sweep over several maps: curve (FPR, mean per-region overlap)
// from (0, 0), trapezoids up to the FPR limit, normalised by the limit.
inline double brute_aupro(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                          int n_maps, int h, int w, double limit) {
  std::vector<int> region(scores.size(), 0);
  std::vector<double> size{0.0};
  for (int i = 0; i < n_maps; ++i) {
    std::vector<std::uint8_t> mask(labels.begin() + i * h * w, labels.begin() + (i + 1) * h * w);
    int count = 0;
    const auto id = brute_regions(mask, h, w, &count);
    const int base = static_cast<int>(size.size()) - 1;
    size.resize(size.size() + count, 0.0);
    for (int p = 0; p < h * w; ++p)
      if (id[p]) {
        region[i * h * w + p] = id[p] + base;
        size[id[p] + base] += 1;
      }
  }
  const int n_regions = static_cast<int>(size.size()) - 1;
  double normals = 0;
  for (auto r : region) normals += r == 0;
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  for (double t : distinct_descending(scores)) {
    double fp = 0;
    std::vector<double> hit(size.size(), 0.0);
    for (std::size_t p = 0; p < scores.size(); ++p)
      if (scores[p] >= t) {
        if (region[p]) hit[region[p]] += 1;
        else fp += 1;
      }
    double pro = 0;
    for (int r = 1; r <= n_regions; ++r) pro += hit[r] / size[r];
    curve.emplace_back(fp / normals, pro / n_regions);
  }
  double area = 0.0;
  for (std::size_t a = 1; a < curve.size(); ++a) {
    const double x0 = curve[a - 1].first, y0 = curve[a - 1].second;
    const double x1 = curve[a].first, y1 = curve[a].second;
    const double lo = x0, hi = std::min(x1, limit);
    if (hi <= lo) continue;
    const auto y_at = [&](double x) { return y0 + (y1 - y0) * (x - x0) / (x1 - x0); };
    area += (hi - lo) * (y_at(lo) + y_at(hi)) / 2.0;
  }
  return area / limit;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b)}) + abs_floor;
}

}  // namespace support
