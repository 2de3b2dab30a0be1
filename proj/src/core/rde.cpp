// SPDX-License-Identifier: Apache-2.0
#include "brw/rde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brw/error.hpp"
#include "brw/parallel.hpp"

namespace brw {

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : x_(std::move(samples)) {
  for (double v : x_) require(!std::isnan(v), "EmpiricalCdf: NaN sample");
  std::sort(x_.begin(), x_.end());
}

EmpiricalCdf EmpiricalCdf::from_grid(std::vector<double> x, std::vector<double> G) {
  require(!x.empty() && x.size() == G.size(), "EmpiricalCdf: grid sizes must match and be nonempty");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(G[i] >= 0 && G[i] <= 1, "EmpiricalCdf: G must lie in [0, 1]");
    if (i) require(x[i] > x[i - 1] && G[i] >= G[i - 1], "EmpiricalCdf: grid must increase");
  }
  EmpiricalCdf e;
  e.x_ = std::move(x);
  e.grid_G_ = std::move(G);
  return e;
}

double EmpiricalCdf::operator()(double x) const {
  if (x_.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
  if (is_grid()) return k == 0 ? 0.0 : grid_G_[k - 1];
  return static_cast<double>(k) / static_cast<double>(x_.size());
}

double EmpiricalCdf::quantile(double p) const {
  require(!x_.empty(), "EmpiricalCdf: empty");
  require(p >= 0 && p <= 1, "EmpiricalCdf: p must be in [0, 1]");
  if (is_grid()) {
    const auto it = std::lower_bound(grid_G_.begin(), grid_G_.end(), p);
    return it == grid_G_.end() ? x_.back() : x_[static_cast<std::size_t>(it - grid_G_.begin())];
  }
  if (p == 0.5) return brw::median(std::vector<double>(x_));
  const auto k = std::min(x_.size() - 1, static_cast<std::size_t>(std::ceil(p * static_cast<double>(x_.size()))) -
                                             (p > 0 ? 1 : 0));
  return x_[k];
}

namespace {

double draw_max(std::span<const double> pool, const KeyedStream& s, std::uint32_t z, std::uint64_t first_slot) {
  double best = -std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::uint64_t>(pool.size());
  for (std::uint32_t j = 0; j < z; ++j) {
    const auto idx = static_cast<std::size_t>((static_cast<unsigned __int128>(s.bits(first_slot + j)) * n) >> 64);
    best = std::max(best, pool[idx]);
  }
  return best;
}

void check_offspring(const OffspringLaw& z) {
  require(z.prob_zero() == 0.0, "rde: offspring must satisfy P(Z = 0) = 0");
}

}  // namespace

std::vector<double> population_step(std::span<const double> sorted_pool, const IncrementLaw& y,
                                    const OffspringLaw& z, double c, std::uint64_t seed, std::uint64_t step_key) {
  require(!sorted_pool.empty(), "population_step: empty pool");
  require(c > 0 && c < 1, "population_step: c must be in (0, 1)");
  check_offspring(z);
  const IncrementSampler sample(y);
  std::vector<double> out(sorted_pool.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const KeyedStream s(seed, make_digest(step_key, i));
    out[i] = sample(s) + c * draw_max(sorted_pool, s, z.sample(s), 3);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const char* to_string(FixpointStatus s) noexcept {
  switch (s) {
    case FixpointStatus::Converged: return "converged";
    case FixpointStatus::Diverged: return "diverged";
    case FixpointStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

FixedPointReport iterate_to_fixpoint(const IncrementLaw& y, const OffspringLaw& z, double c,
                                     const FixpointOptions& o) {
  require(o.pool_size >= 2, "iterate_to_fixpoint: pool_size must be >= 2");
  require(o.max_iters >= 1 && o.lag >= 1 && o.consecutive >= 1 && o.monotone_run >= 1,
          "iterate_to_fixpoint: iteration parameters must be >= 1");
  require(c > 0 && c < 1, "iterate_to_fixpoint: c must be in (0, 1)");
  check_offspring(z);

  FixedPointReport rep;
  rep.pool_size = o.pool_size;
  rep.c = c;
  rep.m = z.mean();
  rep.H = -std::log(c) / std::log(rep.m);

  const std::uint64_t id = hash_name("iterate_to_fixpoint");
  std::vector<std::vector<double>> history;  // ring buffer of the last lag + 1 pools
  history.reserve(static_cast<std::size_t>(o.lag) + 1);
  std::vector<double> pool(o.pool_size, o.init);
  history.push_back(pool);
  double prev_median = o.init;
  rep.median_trajectory.push_back(prev_median);
  rep.ks_trajectory.push_back(std::numeric_limits<double>::quiet_NaN());
  int passing = 0, rising = 0;

  for (int k = 1; k <= o.max_iters; ++k) {
    const std::uint64_t key = o.common_random_numbers ? id : mix64(id + static_cast<std::uint64_t>(k));
    pool = population_step(pool, y, z, c, o.seed, key);
    rep.iterations = k;
    const double med = median(std::vector<double>(pool));
    rep.median_trajectory.push_back(med);

    double ks = std::numeric_limits<double>::quiet_NaN();
    if (k >= o.lag) {
      const auto& old = history[static_cast<std::size_t>((k - o.lag) % (o.lag + 1))];
      ks = ks_statistic_sorted(pool, old);
      rep.ks_gap = ks;
      passing = ks <= o.ks_tol ? passing + 1 : 0;
    }
    rep.ks_trajectory.push_back(ks);
    rising = med > prev_median ? rising + 1 : 0;
    prev_median = med;

    if (history.size() < static_cast<std::size_t>(o.lag) + 1) history.push_back(pool);
    else history[static_cast<std::size_t>(k % (o.lag + 1))] = pool;

    if (passing >= o.consecutive) {
      rep.status = FixpointStatus::Converged;
      break;
    }
    if (!(med <= o.median_cap) || rising >= o.monotone_run) {
      rep.status = FixpointStatus::Diverged;
      break;
    }
  }
  rep.cdf = EmpiricalCdf(std::move(pool));
  return rep;
}

// Pool atoms are fixed points only up to rounding.
constexpr double kArgTol = 1e-12;

FieResidual fie_residual(const EmpiricalCdf& G, const IncrementLaw& y, const OffspringLaw& z, double c,
                         std::span<const double> x_grid, std::size_t mc_samples, std::uint64_t seed) {
  require(y.nonnegative(), "fie_residual: requires Y >= 0");
  require(c > 0 && c < 1, "fie_residual: c must be in (0, 1)");
  require(mc_samples >= 2, "fie_residual: need at least 2 samples");
  const IncrementSampler sample(y);
  const std::uint64_t id = hash_name("fie_residual");
  std::vector<double> ys(mc_samples);
  for (std::size_t j = 0; j < mc_samples; ++j) ys[j] = sample(KeyedStream(seed, make_digest(id, j)));
  std::sort(ys.begin(), ys.end());

  FieResidual out;
  for (double x : x_grid) {
    double sum = 0.0, sum2 = 0.0;
    for (double yj : ys) {
      if (yj > x) break;
      const double arg = (x - yj) / c;
      const double v = z.pgf(G(arg + kArgTol * std::abs(arg)));
      sum += v;
      sum2 += v * v;
    }
    const double n = static_cast<double>(mc_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    const double r = std::abs(G(x) - mean);
    out.x.push_back(x);
    out.residual.push_back(r);
    out.se.push_back(std::sqrt(var / n));
    out.max_abs = std::max(out.max_abs, r);
  }
  return out;
}

std::vector<double> quantile_grid(const EmpiricalCdf& G, int points) {
  require(points >= 1, "quantile_grid: need at least one point");
  std::vector<double> g;
  for (int i = 0; i < points; ++i) {
    const double x = G.quantile(static_cast<double>(i + 1) / (points + 1));
    if (g.empty() || x > g.back()) g.push_back(x);
  }
  return g;
}

std::vector<double> root_supremum_sample(const EmpiricalCdf& pool, const OffspringLaw& z, double c,
                                         std::uint64_t seed) {
  require(!pool.is_grid() && pool.size() > 0, "root_supremum_sample: needs a sample pool");
  const std::uint64_t id = hash_name("root_supremum_sample");
  std::vector<double> out(pool.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const KeyedStream s(seed, make_digest(id, i));
    out[i] = c * draw_max(pool.values(), s, z.sample(s), 3);
  }
  return out;
}

SimulationComparison compare_to_simulation(const FixedPointReport& report, const SimConfig& cfg,
                                           std::size_t replicas, int threads, double tie_tol) {
  cfg.validate();
  require(report.status == FixpointStatus::Converged, "compare_to_simulation: report must be Converged");
  require(cfg.increment.nonnegative(), "compare_to_simulation: requires Y >= 0");
  require(replicas >= 1, "compare_to_simulation: replicas must be >= 1");
  const double c_cfg = std::pow(cfg.m(), -cfg.H);
  if (std::abs(report.c - c_cfg) > 1e-12 * c_cfg || std::abs(report.m - cfg.m()) > 1e-12 * cfg.m())
    fail(ErrorCode::ConfigError, "compare_to_simulation: c must equal m^(-H) of the simulation config");

  SimulationComparison out;
  const std::uint64_t id = hash_name("compare_to_simulation");
  struct Sample {
    double sup = 0.0;
    bool truncated = false;
  };
  const auto sims = parallel_map<Sample>(replicas, threads, [&](std::size_t r) {
    const SupTrajectory t = dfs_supremum(cfg.with_seed(split_seed(cfg.seed, id, r)));
    return Sample{t.max_signed.back(), t.truncated};
  });
  std::vector<double> sim;
  sim.reserve(replicas);
  for (const auto& s : sims) {
    sim.push_back(s.sup);
    out.any_truncated |= s.truncated;
  }
  std::vector<double> root = root_supremum_sample(report.cdf, cfg.offspring, report.c, cfg.seed);
  out.pool_samples = root.size();
  out.sim_samples = sim.size();
  out.ks = ks_statistic(std::move(root), std::move(sim), tie_tol);
  out.p_value = ks_pvalue(out.ks, out.pool_samples, out.sim_samples);
  return out;
}

}  // namespace brw
