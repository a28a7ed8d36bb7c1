// SPDX-License-Identifier: Apache-2.0
// Leiden optimisation of the constant Potts objective: fast local moving,
// randomised refinement inside each community, aggregation of the refined
// partition, repeated until the local moves leave every node alone.
#include <algorithm>
#include <numeric>

#include "codegraph/graph.hpp"
#include "codegraph/rng.hpp"

namespace codegraph {

namespace {

constexpr double kGainTolerance = 1e-12;

using Adjacency = std::vector<std::vector<std::pair<std::uint32_t, double>>>;

struct WorkGraph {
  std::vector<double> size;
  Adjacency adj;
  std::size_t n() const noexcept { return size.size(); }
};

void shuffle(std::vector<std::uint32_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<std::uint32_t> random_order(std::size_t n, CounterRng& rng) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  shuffle(order, rng);
  return order;
}

// Weights from one node to each neighbouring community, with a touched
// list so the accumulator can be reset in O(degree).
class CommunityWeights {
 public:
  explicit CommunityWeights(std::size_t n) : w_(n, 0.0), seen_(n, 0) {}
  void add(std::uint32_t c, double w) {
    if (!seen_[c]) {
      seen_[c] = 1;
      touched_.push_back(c);
    }
    w_[c] += w;
  }
  double at(std::uint32_t c) const { return w_[c]; }
  const std::vector<std::uint32_t>& touched() const { return touched_; }
  void clear() {
    for (auto c : touched_) {
      w_[c] = 0.0;
      seen_[c] = 0;
    }
    touched_.clear();
  }

 private:
  std::vector<double> w_;
  std::vector<std::uint8_t> seen_;
  std::vector<std::uint32_t> touched_;
};

// Returns true when some node changed community.
bool move_nodes_fast(const WorkGraph& g, std::vector<std::uint32_t>& part, double gamma,
                     CounterRng& rng) {
  const std::size_t n = g.n();
  std::vector<double> csize(n, 0.0);
  std::vector<std::uint32_t> members(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    csize[part[v]] += g.size[v];
    ++members[part[v]];
  }
  std::vector<std::uint32_t> empty;
  for (std::uint32_t c = static_cast<std::uint32_t>(n); c-- > 0;)
    if (members[c] == 0) empty.push_back(c);

  std::vector<std::uint32_t> queue = random_order(n, rng);
  std::vector<std::uint8_t> queued(n, 1);
  std::size_t head = 0;
  CommunityWeights to(n);
  bool changed = false;

  while (head < queue.size()) {
    const std::uint32_t v = queue[head++];
    queued[v] = 0;
    const std::uint32_t from = part[v];
    const double sv = g.size[v];
    for (const auto& [u, w] : g.adj[v]) to.add(part[u], w);

    csize[from] -= sv;
    --members[from];
    std::uint32_t best = from;
    double best_gain = to.at(from) - gamma * sv * csize[from];
    for (auto c : to.touched()) {
      if (c == from) continue;
      const double gain = to.at(c) - gamma * sv * csize[c];
      if (gain > best_gain + kGainTolerance) {
        best = c;
        best_gain = gain;
      }
    }
    if (members[from] != 0 && 0.0 > best_gain + kGainTolerance) {
      best = empty.back();
      empty.pop_back();
    }
    if (members[from] == 0 && best != from) empty.push_back(from);
    part[v] = best;
    csize[best] += sv;
    ++members[best];
    to.clear();

    if (best != from) {
      changed = true;
      for (const auto& [u, w] : g.adj[v]) {
        if (part[u] != best && !queued[u]) {
          queued[u] = 1;
          queue.push_back(u);
        }
      }
    }
  }
  return changed;
}

// Refines each community of `part` starting from singletons; only merges
// with positive gain into well-connected subsets, chosen with probability
// proportional to the gain.
std::vector<std::uint32_t> refine(const WorkGraph& g, const std::vector<std::uint32_t>& part,
                                  double gamma, CounterRng& rng) {
  const std::size_t n = g.n();
  std::vector<std::uint32_t> ref(n);
  std::iota(ref.begin(), ref.end(), 0u);
  std::vector<double> rsize(g.size);
  std::vector<std::uint32_t> rcount(n, 1);

  std::vector<std::vector<std::uint32_t>> groups(n);
  for (std::uint32_t v = 0; v < n; ++v) groups[part[v]].push_back(v);

  std::vector<double> inner(n, 0.0);  // w(v, S - v)
  std::vector<double> ext(n, 0.0);    // E(C, S - C) per refined community
  CommunityWeights to(n);

  for (const auto& group : groups) {
    if (group.size() < 2) continue;
    double total = 0.0;
    for (auto v : group) total += g.size[v];
    for (auto v : group) {
      double w_in = 0.0;
      for (const auto& [u, w] : g.adj[v])
        if (part[u] == part[v]) w_in += w;
      inner[v] = w_in;
      ext[v] = w_in;
    }
    std::vector<std::uint32_t> order(group);
    shuffle(order, rng);
    for (auto v : order) {
      if (inner[v] < gamma * g.size[v] * (total - g.size[v])) continue;
      if (rcount[ref[v]] != 1) continue;
      for (const auto& [u, w] : g.adj[v])
        if (part[u] == part[v]) to.add(ref[u], w);
      std::vector<std::pair<std::uint32_t, double>> options;
      double sum = 0.0;
      for (auto c : to.touched()) {
        if (c == ref[v]) continue;
        if (ext[c] < gamma * rsize[c] * (total - rsize[c])) continue;
        const double gain = to.at(c) - gamma * g.size[v] * rsize[c];
        if (gain > kGainTolerance) {
          options.emplace_back(c, gain);
          sum += gain;
        }
      }
      if (!options.empty()) {
        double pick = rng.uniform() * sum;
        std::uint32_t target = options.back().first;
        for (const auto& [c, gain] : options) {
          if (pick < gain) {
            target = c;
            break;
          }
          pick -= gain;
        }
        const std::uint32_t own = ref[v];
        ext[target] += inner[v] - 2.0 * to.at(target);
        rsize[target] += g.size[v];
        ++rcount[target];
        rsize[own] = 0.0;
        rcount[own] = 0;
        ref[v] = target;
      }
      to.clear();
    }
  }
  return ref;
}

// Compacts labels to 0..k-1 in order of first appearance.
std::size_t relabel(std::vector<std::uint32_t>& labels) {
  std::vector<std::uint32_t> map(labels.size() + 1, UINT32_MAX);
  std::uint32_t next = 0;
  for (auto& l : labels) {
    if (map[l] == UINT32_MAX) map[l] = next++;
    l = map[l];
  }
  return next;
}

WorkGraph aggregate(const WorkGraph& g, const std::vector<std::uint32_t>& groups,
                    std::size_t n_groups) {
  WorkGraph out;
  out.size.assign(n_groups, 0.0);
  out.adj.resize(n_groups);
  for (std::size_t v = 0; v < g.n(); ++v) out.size[groups[v]] += g.size[v];
  CommunityWeights to(n_groups);
  std::vector<std::vector<std::uint32_t>> members(n_groups);
  for (std::uint32_t v = 0; v < g.n(); ++v) members[groups[v]].push_back(v);
  for (std::uint32_t c = 0; c < n_groups; ++c) {
    for (auto v : members[c])
      for (const auto& [u, w] : g.adj[v])
        if (groups[u] != c) to.add(groups[u], w);
    for (auto d : to.touched()) out.adj[c].emplace_back(d, to.at(d));
    std::sort(out.adj[c].begin(), out.adj[c].end());
    to.clear();
  }
  return out;
}

// One Leiden run from an initial partition of the original nodes.
std::vector<std::uint32_t> leiden_pass(const WorkGraph& base, std::vector<std::uint32_t> initial,
                                       double gamma, CounterRng& rng) {
  WorkGraph g = base;
  std::vector<std::uint32_t> node_of(base.n());
  std::iota(node_of.begin(), node_of.end(), 0u);
  std::vector<std::uint32_t> part = std::move(initial);
  relabel(part);

  for (;;) {
    move_nodes_fast(g, part, gamma, rng);
    const std::size_t n_comms = relabel(part);
    if (n_comms == g.n()) break;

    std::vector<std::uint32_t> ref = refine(g, part, gamma, rng);
    std::size_t n_ref = relabel(ref);
    if (n_ref == g.n()) {
      ref = part;
      n_ref = n_comms;
    }
    std::vector<std::uint32_t> next_part(n_ref);
    for (std::size_t v = 0; v < g.n(); ++v) next_part[ref[v]] = part[v];
    g = aggregate(g, ref, n_ref);
    for (auto& a : node_of) a = ref[a];
    part = std::move(next_part);
  }

  std::vector<std::uint32_t> out(base.n());
  for (std::size_t v = 0; v < base.n(); ++v) out[v] = part[node_of[v]];
  return out;
}

// Splits every community into its connected components.
void split_disconnected(const SimilarityGraph& graph, std::vector<std::uint32_t>& part) {
  const std::size_t n = part.size();
  std::vector<std::uint32_t> comp(n, UINT32_MAX);
  std::uint32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (comp[s] != UINT32_MAX) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto& [u, w] : graph.neighbors(v)) {
        if (comp[u] == UINT32_MAX && part[u] == part[s] && w > 0.0) {
          comp[u] = next;
          stack.push_back(u);
        }
      }
    }
    ++next;
  }
  part = comp;
}

}  // namespace

CommunityPartition leiden_cpm(const SimilarityGraph& graph, double gamma, std::uint64_t seed) {
  if (!(gamma >= 0.0)) fail(ErrorCode::kInvalidArgument, "gamma must be non-negative");
  const std::size_t n = graph.n_nodes();
  WorkGraph base;
  base.size.assign(n, 1.0);
  base.adj.resize(n);
  for (std::size_t v = 0; v < n; ++v) base.adj[v] = graph.neighbors(v);

  CounterRng rng(seed, 0x4c656964656eULL);
  std::vector<std::uint32_t> part(n);
  std::iota(part.begin(), part.end(), 0u);
  double quality = cpm_objective(graph, part, gamma);
  for (int iteration = 0; iteration < 16; ++iteration) {
    auto next = leiden_pass(base, part, gamma, rng);
    split_disconnected(graph, next);
    const double q = cpm_objective(graph, next, gamma);
    const bool improved = q > quality + kGainTolerance;
    if (improved || (iteration == 0 && q >= quality)) {
      part = std::move(next);
      quality = q;
    }
    if (!improved) break;
  }

  CommunityPartition out;
  out.gamma = gamma;
  relabel(part);
  out.assignment = part;
  out.quality = quality;
  std::size_t n_comms = 0;
  for (auto c : part) n_comms = std::max<std::size_t>(n_comms, c + 1);
  out.communities.resize(n_comms);
  for (std::uint32_t v = 0; v < n; ++v) out.communities[part[v]].members.push_back(v);
  return out;
}

}  // namespace codegraph
