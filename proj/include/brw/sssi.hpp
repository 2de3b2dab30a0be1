// SPDX-License-Identifier: Apache-2.0
//
// p-adic skeleton of a self-similar process with stationary increments:
//   X_n = sum_{k=1}^{K} c^k (Y^k_n - Y^k_0),   n in [0, p^K),
// where level k holds p^k i.i.d. copies of Y indexed by n mod p^k.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/laws.hpp"
#include "brw/stats.hpp"

namespace brw {

struct SkeletonConfig {
  int p = 2;
  double c = 0.5;
  IncrementLaw y = IncrementLaw::constant(1.0);
  int K = 10;
  std::uint64_t seed = 0;

  /// -log c / log p.
  double H() const;
  /// Throws Error(InvalidArgument) for bad parameters and
  /// Error(BudgetExceeded) when p^K > 10^8 / K.
  void validate() const;
};

struct Skeleton {
  int p = 2;
  double c = 0.5;
  /// levels[k - 1] holds Y^k_j for j in [0, p^k).
  std::vector<std::vector<double>> levels;
  /// X_n for n in [0, p^K).
  std::vector<double> X;

  /// c^k (Y^k_{n mod p^k} - Y^k_0).
  double level_contribution(int k, std::uint64_t n) const;
};

/// Level arrays are keyed by (seed, level, index), so a build with larger K
/// extends a smaller one. `zero_level` > 0 replaces that level's array by
/// zeros.
Skeleton build_skeleton(const SkeletonConfig& cfg, int zero_level = 0);

struct SkeletonScan {
  std::vector<int> K;                        // K_min..K_max
  std::vector<std::vector<double>> max_abs;  // [replica][K index]
  GrowthVerdict verdict;
  /// c^(K_max + 1) / (1 - c) times a typical |Y| scale.
  double tail_majorant = 0.0;
};

/// max_n |X_n| at every truncation level in [K_min, K_max] for `replicas`
/// split seeds, classified by the slope of the log median over K.
SkeletonScan boundedness_scan(const SkeletonConfig& cfg, int K_min, int K_max, std::size_t replicas,
                              const GrowthThresholds& thresholds = {}, int threads = 1);

struct EquivalenceResult {
  double ks = 0.0;
  double p_value = 1.0;
  std::vector<double> skeleton_max;  // max_n X_n
  std::vector<double> tree_max;      // max over depth-K rays of X_t - X_{t0}
};

/// Compares max_n X_n with the re-centered maximum of a discounted
/// branching random walk on the deterministic p-ary tree with
/// H = -log c / log p, over independent replicas of each.
EquivalenceResult equivalence_test(const SkeletonConfig& cfg, std::size_t replicas, int threads = 1);

}  // namespace brw
