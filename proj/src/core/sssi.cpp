// SPDX-License-Identifier: Apache-2.0
#include "brw/sssi.hpp"

#include <algorithm>
#include <cmath>

#include "brw/error.hpp"
#include "brw/parallel.hpp"
#include "brw/tree_sim.hpp"

namespace brw {

namespace {

bool is_prime(int p) {
  if (p < 2) return false;
  for (int d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

std::uint64_t ipow(int p, int k) {
  std::uint64_t r = 1;
  for (int i = 0; i < k; ++i) r *= static_cast<std::uint64_t>(p);
  return r;
}

double y_scale(const IncrementLaw& y) {
  if (const auto b = y.abs_bound()) return *b;
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, law::Gaussian>) return v.sigma;
        else if constexpr (requires { v.xmin; }) return v.xmin;
        else return 1.0;
      },
      y.variant());
}

// Running X^(K) arrays for K = 1, 2, ...; calls visit(K, X) after each level.
template <class Visit>
void grow_skeleton(const SkeletonConfig& cfg, int zero_level, std::vector<std::vector<double>>* levels,
                   Visit&& visit) {
  const IncrementSampler sample(cfg.y);
  const std::uint64_t id = hash_name("skeleton_level");
  std::vector<double> X{0.0};
  double ck = 1.0;
  for (int k = 1; k <= cfg.K; ++k) {
    ck *= cfg.c;
    const std::uint64_t size = ipow(cfg.p, k);
    std::vector<double> Y(size, 0.0);
    if (k != zero_level)
      for (std::uint64_t j = 0; j < size; ++j)
        Y[j] = sample(KeyedStream(cfg.seed, make_digest(mix64(id + static_cast<std::uint64_t>(k)), j)));
    std::vector<double> next(size);
    const std::uint64_t prev = X.size();
    for (std::uint64_t n = 0; n < size; ++n) next[n] = X[n % prev] + ck * (Y[n] - Y[0]);
    X = std::move(next);
    if (levels) levels->push_back(std::move(Y));
    visit(k, X);
  }
}

}  // namespace

double SkeletonConfig::H() const { return -std::log(c) / std::log(static_cast<double>(p)); }

void SkeletonConfig::validate() const {
  require(p >= 2 && is_prime(p), "SkeletonConfig: p must be a prime >= 2");
  require(c > 0 && c < 1, "SkeletonConfig: c must be in (0, 1)");
  require(K >= 1 && K <= 62, "SkeletonConfig: K must be in [1, 62]");
  if (K * std::log(static_cast<double>(p)) > std::log(1e8 / K))
    fail(ErrorCode::BudgetExceeded, "SkeletonConfig: p^K exceeds the 10^8 / K memory guard");
}

double Skeleton::level_contribution(int k, std::uint64_t n) const {
  require(k >= 1 && static_cast<std::size_t>(k) <= levels.size(), "level_contribution: level out of range");
  const auto& Y = levels[static_cast<std::size_t>(k) - 1];
  return std::pow(c, k) * (Y[n % Y.size()] - Y[0]);
}

Skeleton build_skeleton(const SkeletonConfig& cfg, int zero_level) {
  cfg.validate();
  Skeleton s;
  s.p = cfg.p;
  s.c = cfg.c;
  grow_skeleton(cfg, zero_level, &s.levels, [&](int k, const std::vector<double>& X) {
    if (k == cfg.K) s.X = X;
  });
  return s;
}

SkeletonScan boundedness_scan(const SkeletonConfig& cfg, int K_min, int K_max, std::size_t replicas,
                              const GrowthThresholds& thresholds, int threads) {
  require(K_min >= 1 && K_max > K_min, "boundedness_scan: need 1 <= K_min < K_max");
  require(replicas >= 2, "boundedness_scan: need at least 2 replicas");
  SkeletonConfig top = cfg;
  top.K = K_max;
  top.validate();

  SkeletonScan scan;
  for (int K = K_min; K <= K_max; ++K) scan.K.push_back(K);
  const std::uint64_t id = hash_name("boundedness_scan");
  scan.max_abs = parallel_map<std::vector<double>>(replicas, threads, [&](std::size_t r) {
    SkeletonConfig c = top;
    c.seed = split_seed(cfg.seed, id, r);
    std::vector<double> out;
    grow_skeleton(c, 0, nullptr, [&](int k, const std::vector<double>& X) {
      if (k < K_min) return;
      double best = 0.0;
      for (double x : X) best = std::max(best, std::abs(x));
      out.push_back(best);
    });
    return out;
  });
  scan.verdict = classify_growth(scan.max_abs, 0, scan.K.size() - 1, thresholds, cfg.seed);
  scan.tail_majorant = std::pow(cfg.c, K_max + 1) / (1 - cfg.c) * y_scale(cfg.y);
  return scan;
}

EquivalenceResult equivalence_test(const SkeletonConfig& cfg, std::size_t replicas, int threads) {
  cfg.validate();
  require(replicas >= 1, "equivalence_test: replicas must be >= 1");
  EquivalenceResult res;
  const std::uint64_t sk_id = hash_name("equivalence_skeleton");
  const std::uint64_t tr_id = hash_name("equivalence_tree");

  res.skeleton_max = parallel_map<double>(replicas, threads, [&](std::size_t r) {
    SkeletonConfig c = cfg;
    c.seed = split_seed(cfg.seed, sk_id, r);
    const Skeleton s = build_skeleton(c);
    return *std::max_element(s.X.begin(), s.X.end());
  });

  SimConfig base{cfg.y, OffspringLaw::deterministic(cfg.p), cfg.H(), cfg.K, cfg.seed};
  const std::vector<std::uint32_t> zeros(static_cast<std::size_t>(cfg.K), 0);
  res.tree_max = parallel_map<double>(replicas, threads, [&](std::size_t r) {
    const SimConfig sc = base.with_seed(split_seed(cfg.seed, tr_id, r));
    const SupTrajectory t = dfs_supremum(sc);
    return t.max_signed.back() - replay_ray(sc, zeros).back();
  });

  res.ks = ks_statistic(res.skeleton_max, res.tree_max, 1e-12);
  res.p_value = ks_pvalue(res.ks, replicas, replicas);
  return res;
}

}  // namespace brw
