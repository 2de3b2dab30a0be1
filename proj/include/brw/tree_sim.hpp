// SPDX-License-Identifier: Apache-2.0
//
// Streaming simulation of the discounted branching random walk
//   X_t = sum_{i>=1} m^(-iH) eta_{t_i}
// on a Galton-Watson tree truncated at depth N. The tree is never stored:
// offspring counts and increments are replayed from per-vertex keyed
// streams, so memory is O(N) and every pass sees the same tree.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "brw/laws.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

struct SimConfig {
  IncrementLaw increment;
  OffspringLaw offspring;
  double H = 1.0;
  int depth = 10;
  std::uint64_t seed = 0;
  std::uint64_t node_budget = 200'000'000;

  double m() const noexcept { return offspring.mean(); }
  /// Throws Error(InvalidArgument) when H <= 0, depth < 1 or budget == 0.
  void validate() const;
  /// Same configuration with another seed.
  SimConfig with_seed(std::uint64_t s) const {
    SimConfig c = *this;
    c.seed = s;
    return c;
  }
};

/// Discount factors m^(-iH) for i = 0..N. Entries that would fall below the
/// double-precision floor for the law's scale are zeroed; `first_zeroed` is
/// the first such depth or -1.
struct DiscountTable {
  std::vector<double> factor;
  int first_zeroed = -1;
};
DiscountTable discount_table(const SimConfig& cfg);

/// Per-depth maxima of ray partial sums. Index k runs over 0..N; entry 0 is
/// the root (always 0). Depth-k maxima are taken over all depth-k vertices.
struct SupTrajectory {
  std::vector<double> max_signed;
  std::vector<double> max_abs;  // running max over depths <= k
  std::vector<std::uint64_t> generation_sizes;  // #V_k
  bool survived = false;
  bool truncated = false;  // node budget hit; outputs cover the visited part
  int underflow_depth = -1;
  std::uint64_t nodes_visited = 0;
};

struct ExceedanceStats {
  double u = 0.0;
  /// #{v : |m^(-H l(v)) eta_v| > u} over depths 1..N.
  std::uint64_t total_count = 0;
  /// Max over root-to-vertex paths of the number of exceedances on the path.
  std::uint32_t max_per_ray = 0;
  std::vector<std::uint32_t> witness_depths;  // ascending
};

struct SimulationResult {
  SupTrajectory trajectory;
  std::vector<ExceedanceStats> exceedances;  // one per requested threshold
};

/// Single depth-first pass computing the trajectory and, for each threshold,
/// the exceedance statistics.
SimulationResult simulate(const SimConfig& cfg, std::span<const double> thresholds = {});

SupTrajectory dfs_supremum(const SimConfig& cfg);

/// W_k = #V_k / m^k for k = 0..N.
std::vector<double> track_W(const SimConfig& cfg);

ExceedanceStats count_exceedances(const SimConfig& cfg, double u);

/// Partial sums S_1..S_k along the path that takes child child_indices[i]
/// at depth i. Throws if a requested child does not exist.
std::vector<double> replay_ray(const SimConfig& cfg, std::span<const std::uint32_t> child_indices);

struct RayTailPoint {
  double r = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t replicas = 0;
  double p_hat = 0.0;
  Interval ci;
  /// exp(-r log(r / (alpha P)) + r - alpha P)
  double bound = 0.0;
};

struct RayTailReport {
  double u = 1.0;
  double alpha = 1.0;
  double P = 0.0;
  std::vector<RayTailPoint> points;
  bool any_truncated = false;
};

/// exp(-r log(r / (alpha P)) + r - alpha P).
double ray_exceedance_bound(double r, double alpha, double P);

/// Empirical P(max_per_ray >= r) over `replicas` independent trees with
/// Wilson intervals, next to the analytic bound at alpha = 1.
RayTailReport max_ray_exceedance_tail(const SimConfig& cfg, double u, std::span<const double> r_values,
                                      std::size_t replicas, int threads = 1,
                                      double z = 1.959963984540054);

}  // namespace brw
