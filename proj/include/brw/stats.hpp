// SPDX-License-Identifier: Apache-2.0
//
// Small statistics toolbox shared by the experiment modules.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace brw {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> xs);

double median(std::vector<double> xs);

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
/// Values within `tie_tol` (relative) of each other are treated as ties.
double ks_statistic(std::vector<double> a, std::vector<double> b, double tie_tol = 0.0);

/// Same statistic on already sorted samples.
double ks_statistic_sorted(std::span<const double> a, std::span<const double> b,
                           double tie_tol = 0.0);

/// Asymptotic two-sided p-value of the two-sample KS statistic, with
/// Stephens' small-sample correction.
double ks_pvalue(double d, std::size_t n_a, std::size_t n_b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

/// Ordinary least squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Upper tail probability of a chi-square variable.
double chi_square_sf(double statistic, double dof);

enum class Growth { Flat, Growing, Ambiguous };
const char* to_string(Growth g) noexcept;

struct GrowthThresholds {
  double flat_threshold = 0.02;  // log-units per step
  double grow_threshold = 0.05;
  int bootstrap = 200;
  double ci_level = 0.95;
};

struct GrowthVerdict {
  double slope = 0.0;
  Interval slope_ci;
  Growth verdict = Growth::Ambiguous;
};

/// Slope of log(median over replicas) against the step index over the
/// window [first, last] (inclusive, indices into each trajectory), with a
/// percentile bootstrap CI over replicas. trajectories[r][k] is replica r
/// at step k. Flat iff ci.hi < flat_threshold, Growing iff ci.lo >
/// grow_threshold.
GrowthVerdict classify_growth(const std::vector<std::vector<double>>& trajectories,
                              std::size_t first, std::size_t last,
                              const GrowthThresholds& thresholds, std::uint64_t seed);

}  // namespace brw
