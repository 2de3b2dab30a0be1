// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used only by tests. They share the keyed
// randomness and the discount table with the library, but store the whole
// tree and enumerate every ray explicitly.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "brw/tree_sim.hpp"

namespace brw::oracle {

struct NaiveTree {
  std::vector<std::int32_t> parent;
  std::vector<std::uint32_t> depth;
  std::vector<double> value;  // discounted increment, 0 at the root
};

/// Breadth-first materialization of the keyed tree truncated at cfg.depth.
inline NaiveTree materialize(const SimConfig& cfg) {
  const DiscountTable disc = discount_table(cfg);
  NaiveTree t;
  std::vector<VertexKey> keys{VertexKey::root(cfg.seed)};
  t.parent.push_back(-1);
  t.depth.push_back(0);
  t.value.push_back(0.0);
  for (std::size_t v = 0; v < keys.size(); ++v) {
    if (t.depth[v] == static_cast<std::uint32_t>(cfg.depth)) continue;
    const std::uint32_t z = cfg.offspring.sample(KeyedStream::at(keys[v]));
    for (std::uint32_t i = 0; i < z; ++i) {
      const VertexKey k = keys[v].child(i);
      keys.push_back(k);
      t.parent.push_back(static_cast<std::int32_t>(v));
      t.depth.push_back(t.depth[v] + 1);
      t.value.push_back(disc.factor[t.depth[v] + 1] * cfg.increment.sample(KeyedStream::at(k)));
    }
  }
  return t;
}

/// Root-to-v vertex list (excluding the root).
inline std::vector<std::int32_t> path_to(const NaiveTree& t, std::int32_t v) {
  std::vector<std::int32_t> p;
  for (; v > 0; v = t.parent[static_cast<std::size_t>(v)]) p.push_back(v);
  std::reverse(p.begin(), p.end());
  return p;
}

struct NaiveResult {
  std::vector<double> max_signed;
  std::vector<double> max_abs;
  std::vector<std::uint64_t> generation_sizes;
  bool survived = false;
  std::uint64_t total_count = 0;
  std::uint32_t max_per_ray = 0;
  std::vector<std::uint32_t> witness_depths;  // sorted
};

/// Every vertex's partial sum is recomputed from its explicit root path.
inline NaiveResult evaluate(const NaiveTree& t, int N, double u) {
  NaiveResult r;
  const auto n = static_cast<std::size_t>(N);
  r.generation_sizes.assign(n + 1, 0);
  std::vector<double> mx(n + 1, -std::numeric_limits<double>::infinity()), ab(n + 1, 0.0);
  for (std::size_t v = 0; v < t.parent.size(); ++v) {
    const auto path = path_to(t, static_cast<std::int32_t>(v));
    double s = 0.0;
    std::uint32_t cnt = 0;
    for (auto w : path) {
      s += t.value[static_cast<std::size_t>(w)];
      cnt += std::abs(t.value[static_cast<std::size_t>(w)]) > u;
    }
    const std::size_t d = t.depth[v];
    ++r.generation_sizes[d];
    mx[d] = std::max(mx[d], s);
    ab[d] = std::max(ab[d], std::abs(s));
    r.max_per_ray = std::max(r.max_per_ray, cnt);
    if (v > 0 && std::abs(t.value[v]) > u) {
      ++r.total_count;
      r.witness_depths.push_back(static_cast<std::uint32_t>(d));
    }
  }
  std::sort(r.witness_depths.begin(), r.witness_depths.end());
  r.survived = r.generation_sizes[n] > 0;
  r.max_signed.assign(n + 1, 0.0);
  r.max_abs.assign(n + 1, 0.0);
  if (r.survived) {
    double run = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      r.max_signed[k] = mx[k];
      run = std::max(run, ab[k]);
      r.max_abs[k] = run;
    }
  }
  return r;
}

}  // namespace brw::oracle
