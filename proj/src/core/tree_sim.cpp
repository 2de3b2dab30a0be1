// SPDX-License-Identifier: Apache-2.0
#include "brw/tree_sim.hpp"

#include <algorithm>
#include <cmath>

#include "brw/error.hpp"
#include "brw/parallel.hpp"
#include "brw/series.hpp"

namespace brw {

void SimConfig::validate() const {
  require(H > 0 && std::isfinite(H), "SimConfig: H must be > 0");
  require(depth >= 1, "SimConfig: depth N must be >= 1");
  require(node_budget > 0, "SimConfig: node_budget must be > 0");
  require(m() > 1, "SimConfig: m must be > 1");
}

namespace {

// Typical |Y| scale used by the underflow guard.
double law_scale(const IncrementLaw& law) {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, law::Constant>) return std::max(std::abs(p.a), 1e-300);
        else if constexpr (std::is_same_v<T, law::Uniform>) return std::max(std::abs(p.lo), std::abs(p.hi));
        else if constexpr (std::is_same_v<T, law::Gaussian>) return p.sigma;
        else if constexpr (std::is_same_v<T, law::TwoPoint>) return p.a;
        else return p.xmin;
      },
      law.variant());
}

struct Frame {
  VertexKey key;
  double sum;
  std::uint32_t children;
  std::uint32_t next;
};

struct Node {
  VertexKey key;
  double sum;
  std::uint32_t children;
};

// Subtrees at most this deep below the frontier are expanded level by level.
constexpr std::size_t kBlockDepth = 10;

}  // namespace

DiscountTable discount_table(const SimConfig& cfg) {
  DiscountTable t;
  t.factor.resize(static_cast<std::size_t>(cfg.depth) + 1);
  const double rate = cfg.H * std::log(cfg.m());
  const double floor = 1e-300 / (1e3 * law_scale(cfg.increment));
  for (int i = 0; i <= cfg.depth; ++i) {
    const double f = std::exp(-rate * i);
    if (f < floor) {
      if (t.first_zeroed < 0) t.first_zeroed = i;
      t.factor[static_cast<std::size_t>(i)] = 0.0;
    } else {
      t.factor[static_cast<std::size_t>(i)] = f;
    }
  }
  return t;
}

SimulationResult simulate(const SimConfig& cfg, std::span<const double> thresholds) {
  cfg.validate();
  for (double u : thresholds) require(u > 0, "simulate: thresholds must be > 0");

  const auto N = static_cast<std::size_t>(cfg.depth);
  const std::size_t T = thresholds.size();
  const DiscountTable disc = discount_table(cfg);
  const IncrementSampler sample(cfg.increment);
  const OffspringLaw& off = cfg.offspring;

  SimulationResult res;
  SupTrajectory& tr = res.trajectory;
  tr.underflow_depth = disc.first_zeroed;
  tr.generation_sizes.assign(N + 1, 0);
  std::vector<double> depth_max(N + 1, -std::numeric_limits<double>::infinity());
  std::vector<double> depth_abs(N + 1, 0.0);

  res.exceedances.resize(T);
  for (std::size_t t = 0; t < T; ++t) res.exceedances[t].u = thresholds[t];
  // Exceedance counts along the current path, per depth and threshold.
  std::vector<std::uint32_t> path_count((N + 1) * std::max<std::size_t>(T, 1), 0);

  std::vector<Frame> stack(N + 1);
  const VertexKey root = VertexKey::root(cfg.seed);
  stack[0] = {root, 0.0, off.sample(KeyedStream::at(root)), 0};
  tr.generation_sizes[0] = 1;
  depth_max[0] = 0.0;
  tr.nodes_visited = 1;

  // Exceedance bookkeeping for a vertex at depth c with increment x.
  auto record = [&](std::size_t c, double x) {
    for (std::size_t t = 0; t < T; ++t) {
      std::uint32_t cnt = path_count[(c - 1) * T + t];
      if (std::abs(x) > thresholds[t]) {
        ++cnt;
        ExceedanceStats& e = res.exceedances[t];
        ++e.total_count;
        e.witness_depths.push_back(static_cast<std::uint32_t>(c));
        e.max_per_ray = std::max(e.max_per_ray, cnt);
      }
      path_count[c * T + t] = cnt;
    }
  };

  // Expands the unvisited children of f (depth d) down to depth N, one level at a time.
  std::vector<Node> cur, nxt;
  auto expand_block = [&](Frame& f, std::size_t d) {
    cur.assign(1, Node{f.key, f.sum, f.children});
    std::uint32_t first = f.next;
    f.next = f.children;
    std::uint64_t room = cfg.node_budget - tr.nodes_visited;
    for (std::size_t c = d + 1; c <= N && !cur.empty(); ++c) {
      const bool leaf = c == N;
      const double factor = disc.factor[c];
      double mx = depth_max[c], ab = depth_abs[c];
      std::uint64_t made = 0;
      nxt.clear();
      for (const Node& p : cur) {
        std::uint32_t end = p.children;
        if (end - first > room - made) {
          end = first + static_cast<std::uint32_t>(room - made);
          tr.truncated = true;
        }
        for (std::uint32_t i = first; i < end; ++i) {
          const VertexKey key = p.key.child(i);
          const KeyedStream s = KeyedStream::at(key);
          const double sum = p.sum + factor * sample(s);
          mx = std::max(mx, sum);
          ab = std::max(ab, std::abs(sum));
          if (!leaf) nxt.push_back(Node{key, sum, off.sample(s)});
        }
        made += end - first;
        first = 0;
        if (tr.truncated) break;
      }
      depth_max[c] = mx;
      depth_abs[c] = ab;
      tr.generation_sizes[c] += made;
      tr.nodes_visited += made;
      room -= made;
      if (tr.truncated) return;
      cur.swap(nxt);
    }
  };

  std::size_t d = 0;
  for (;;) {
    Frame& f = stack[d];
    if (f.next >= f.children) {
      if (d == 0) break;
      --d;
      continue;
    }
    if (tr.nodes_visited >= cfg.node_budget) {
      tr.truncated = true;
      break;
    }
    if (T == 0 && N - d <= kBlockDepth) {
      expand_block(f, d);
      if (tr.truncated) break;
      continue;
    }
    const std::size_t c = d + 1;
    if (c == N) {
      // Leaves are consumed in one sweep without pushing frames.
      const std::uint64_t room = cfg.node_budget - tr.nodes_visited;
      const std::uint32_t end =
          f.next + static_cast<std::uint32_t>(std::min<std::uint64_t>(f.children - f.next, room));
      const double factor = disc.factor[N];
      double mx = depth_max[N], ab = depth_abs[N];
      for (std::uint32_t idx = f.next; idx < end; ++idx) {
        const double x = factor * sample(KeyedStream::at(f.key.child(idx)));
        const double sum = f.sum + x;
        mx = std::max(mx, sum);
        ab = std::max(ab, std::abs(sum));
        if (T) record(N, x);
      }
      depth_max[N] = mx;
      depth_abs[N] = ab;
      tr.nodes_visited += end - f.next;
      tr.generation_sizes[N] += end - f.next;
      f.next = end;
      continue;
    }
    const VertexKey key = f.key.child(f.next++);
    const KeyedStream s = KeyedStream::at(key);
    const double x = disc.factor[c] * sample(s);
    const double sum = f.sum + x;
    ++tr.nodes_visited;
    ++tr.generation_sizes[c];
    depth_max[c] = std::max(depth_max[c], sum);
    depth_abs[c] = std::max(depth_abs[c], std::abs(sum));
    if (T) record(c, x);
    stack[c] = {key, sum, off.sample(s), 0};
    d = c;
  }

  for (auto& e : res.exceedances) std::sort(e.witness_depths.begin(), e.witness_depths.end());
  tr.survived = tr.generation_sizes[N] > 0;
  tr.max_signed.assign(N + 1, 0.0);
  tr.max_abs.assign(N + 1, 0.0);
  if (tr.survived) {
    double running = 0.0;
    for (std::size_t k = 0; k <= N; ++k) {
      tr.max_signed[k] = tr.generation_sizes[k] ? depth_max[k] : 0.0;
      running = std::max(running, depth_abs[k]);
      tr.max_abs[k] = running;
    }
  }
  return res;
}

SupTrajectory dfs_supremum(const SimConfig& cfg) { return simulate(cfg).trajectory; }

std::vector<double> track_W(const SimConfig& cfg) {
  const SupTrajectory tr = dfs_supremum(cfg);
  std::vector<double> w(tr.generation_sizes.size());
  const double m = cfg.m();
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = static_cast<double>(tr.generation_sizes[k]) / std::pow(m, static_cast<double>(k));
  return w;
}

ExceedanceStats count_exceedances(const SimConfig& cfg, double u) {
  const double th[] = {u};
  return std::move(simulate(cfg, th).exceedances.front());
}

std::vector<double> replay_ray(const SimConfig& cfg, std::span<const std::uint32_t> child_indices) {
  cfg.validate();
  require(child_indices.size() <= static_cast<std::size_t>(cfg.depth), "replay_ray: path deeper than N");
  const DiscountTable disc = discount_table(cfg);
  const IncrementSampler sample(cfg.increment);
  VertexKey key = VertexKey::root(cfg.seed);
  std::uint32_t children = cfg.offspring.sample(KeyedStream::at(key));
  std::vector<double> sums;
  double sum = 0.0;
  for (std::size_t i = 0; i < child_indices.size(); ++i) {
    require(child_indices[i] < children, "replay_ray: child index out of range at depth " + std::to_string(i));
    key = key.child(child_indices[i]);
    const KeyedStream s = KeyedStream::at(key);
    sum += disc.factor[i + 1] * sample(s);
    sums.push_back(sum);
    children = cfg.offspring.sample(s);
  }
  return sums;
}

double ray_exceedance_bound(double r, double alpha, double P) {
  require(r > 0 && alpha > 0 && P > 0, "ray_exceedance_bound: need r, alpha, P > 0");
  const double aP = alpha * P;
  return std::exp(-r * std::log(r / aP) + r - aP);
}

RayTailReport max_ray_exceedance_tail(const SimConfig& cfg, double u, std::span<const double> r_values,
                                      std::size_t replicas, int threads, double z) {
  cfg.validate();
  require(u > 0, "max_ray_exceedance_tail: u must be > 0");
  require(replicas > 0, "max_ray_exceedance_tail: replicas must be > 0");
  RayTailReport rep;
  rep.u = u;
  const SeriesResult Pu = expected_exceedance(cfg.increment, cfg.m(), cfg.H, u);
  rep.P = Pu.finite ? Pu.value : std::numeric_limits<double>::infinity();

  struct Sample {
    std::uint32_t max_per_ray = 0;
    bool truncated = false;
  };
  const std::uint64_t id = hash_name("max_ray_exceedance_tail");
  const auto samples = parallel_map<Sample>(replicas, threads, [&](std::size_t r) {
    const SimConfig c = cfg.with_seed(split_seed(cfg.seed, id, r));
    const double th[] = {u};
    SimulationResult res = simulate(c, th);
    return Sample{res.exceedances[0].max_per_ray, res.trajectory.truncated};
  });
  for (const auto& s : samples) rep.any_truncated |= s.truncated;

  for (double r : r_values) {
    RayTailPoint pt;
    pt.r = r;
    pt.replicas = replicas;
    for (const auto& s : samples) pt.successes += (s.max_per_ray >= r);
    pt.p_hat = static_cast<double>(pt.successes) / static_cast<double>(replicas);
    pt.ci = wilson_interval(pt.successes, replicas, z);
    pt.bound = (rep.P > 0 && std::isfinite(rep.P)) ? ray_exceedance_bound(r, rep.alpha, rep.P)
                                                    : std::numeric_limits<double>::quiet_NaN();
    rep.points.push_back(pt);
  }
  return rep;
}

}  // namespace brw
