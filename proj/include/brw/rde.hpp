// SPDX-License-Identifier: Apache-2.0
//
// Population dynamics for the recursive distributional equation
//   X =d Y + c max_{i<=Z} X_i,
// the matching functional integral equation
//   G(x) = int 1{y <= x} f(G((x - y) / c)) dF(y),
// and the comparison against simulated tree suprema.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brw/laws.hpp"
#include "brw/stats.hpp"
#include "brw/tree_sim.hpp"

namespace brw {

/// Right-continuous CDF of a sorted sample pool, or a piecewise-constant
/// grid CDF (x values with G(x) non-decreasing in [0, 1]).
class EmpiricalCdf {
 public:
  EmpiricalCdf() = default;
  explicit EmpiricalCdf(std::vector<double> samples);
  static EmpiricalCdf from_grid(std::vector<double> x, std::vector<double> G);

  /// P(X <= x).
  double operator()(double x) const;
  double quantile(double p) const;
  double median() const { return quantile(0.5); }

  bool is_grid() const noexcept { return !grid_G_.empty(); }
  std::size_t size() const noexcept { return x_.size(); }
  /// Sorted samples (pool form) or grid abscissae.
  std::span<const double> values() const noexcept { return x_; }

 private:
  std::vector<double> x_;
  std::vector<double> grid_G_;
};

/// One population-dynamics update: new[i] = Y_i + c max of Z_i entries of
/// `sorted_pool` drawn uniformly with replacement. The draws for entry i
/// come from the keyed stream (seed, make_digest(step_key, i)). The result
/// is sorted.
std::vector<double> population_step(std::span<const double> sorted_pool, const IncrementLaw& y,
                                    const OffspringLaw& z, double c, std::uint64_t seed, std::uint64_t step_key);

enum class FixpointStatus { Converged, Diverged, Inconclusive };
const char* to_string(FixpointStatus s) noexcept;

struct FixpointOptions {
  std::size_t pool_size = 100'000;
  int max_iters = 500;
  double ks_tol = 2e-2;
  int lag = 10;
  int consecutive = 3;
  double median_cap = 1e9;
  int monotone_run = 50;
  std::uint64_t seed = 0;
  /// Reuse the same draws at every iteration (monotonicity and scaling
  /// checks). The pool then evolves as a deterministic map.
  bool common_random_numbers = false;
  /// Initial pool value.
  double init = 0.0;
};

struct FixedPointReport {
  FixpointStatus status = FixpointStatus::Inconclusive;
  EmpiricalCdf cdf;  // final pool
  int iterations = 0;
  double ks_gap = 1.0;  // last KS(pool_k, pool_{k-lag})
  std::vector<double> median_trajectory;  // index k = after k steps
  std::vector<double> ks_trajectory;      // NaN before the first check
  std::size_t pool_size = 0;
  double c = 0.0;
  double m = 0.0;
  /// -log c / log m.
  double H = 0.0;
};

/// Iterates population_step from a constant pool. Converged when
/// KS(pool_k, pool_{k-lag}) <= ks_tol on `consecutive` successive
/// iterations; Diverged when the median exceeds median_cap or strictly
/// increases for monotone_run successive iterations; else Inconclusive.
FixedPointReport iterate_to_fixpoint(const IncrementLaw& y, const OffspringLaw& z, double c,
                                     const FixpointOptions& options = {});

struct FieResidual {
  double max_abs = 0.0;
  std::vector<double> x;
  std::vector<double> residual;
  std::vector<double> se;
};

/// Monte Carlo residual of the integral equation on `x_grid` with
/// `mc_samples` fresh draws of Y (shared across grid points). Requires
/// Y >= 0. The inner argument (x - y) / c is widened by a relative 1e-12
/// so that pool atoms which are fixed points up to rounding still match.
FieResidual fie_residual(const EmpiricalCdf& G, const IncrementLaw& y, const OffspringLaw& z, double c,
                         std::span<const double> x_grid, std::size_t mc_samples, std::uint64_t seed);

/// Grid of pool quantiles at (i + 1) / (points + 1).
std::vector<double> quantile_grid(const EmpiricalCdf& G, int points = 19);

struct SimulationComparison {
  double ks = 0.0;
  double p_value = 1.0;
  std::size_t pool_samples = 0;
  std::size_t sim_samples = 0;
  bool any_truncated = false;
};

/// KS distance between max_signed[N] of `replicas` simulated trees and the
/// pool pushed through S = c max_{i<=Z} X_i (the law of the tree supremum
/// seen from the root). Requires a Converged report, Y >= 0, and
/// cfg.increment / cfg.offspring matching the report with c = m^(-H).
SimulationComparison compare_to_simulation(const FixedPointReport& report, const SimConfig& cfg,
                                           std::size_t replicas, int threads = 1, double tie_tol = 1e-12);

/// The pool pushed through S = c max_{i<=Z} X_i with keyed draws.
std::vector<double> root_supremum_sample(const EmpiricalCdf& pool, const OffspringLaw& z, double c,
                                         std::uint64_t seed);

}  // namespace brw
