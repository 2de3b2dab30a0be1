// SPDX-License-Identifier: Apache-2.0
#include "brw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

#include "brw/error.hpp"
#include "brw/rng.hpp"

namespace brw {

MeanSe mean_se(std::span<const double> xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

double median(std::vector<double> xs) {
  require(!xs.empty(), "median of empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double hi = xs[mid];
  if (xs.size() % 2 == 1) return hi;
  const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double ks_statistic_sorted(std::span<const double> a, std::span<const double> b, double tie_tol) {
  require(!a.empty() && !b.empty(), "ks_statistic: samples must be nonempty");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size()) x = a[i];
    else if (i == a.size()) x = b[j];
    else x = std::min(a[i], b[j]);
    const double limit = x + tie_tol * std::abs(x);
    while (i < a.size() && a[i] <= limit) ++i;
    while (j < b.size() && b[j] <= limit) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_statistic(std::vector<double> a, std::vector<double> b, double tie_tol) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return ks_statistic_sorted(a, b, tie_tol);
}

double ks_pvalue(double d, std::size_t n_a, std::size_t n_b) {
  const double ne = static_cast<double>(n_a) * static_cast<double>(n_b) /
                    static_cast<double>(n_a + n_b);
  const double sq = std::sqrt(ne);
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  if (lambda < 1e-3) return 1.0;
  // Q_KS(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  require(trials > 0 && successes <= trials, "wilson_interval: need 0 <= successes <= trials, trials > 0");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "ols_slope: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  require(sxx > 0, "ols_slope: degenerate x");
  return sxy / sxx;
}

double chi_square_sf(double statistic, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

const char* to_string(Growth g) noexcept {
  switch (g) {
    case Growth::Flat: return "Flat";
    case Growth::Growing: return "Growing";
    case Growth::Ambiguous: return "Ambiguous";
  }
  return "Ambiguous";
}

namespace {

// Floor keeps log finite for all-zero trajectories (empty trees).
constexpr double kLogFloor = 1e-300;

double median_curve_slope(const std::vector<std::vector<double>>& traj,
                          std::span<const std::size_t> pick, std::size_t first, std::size_t last) {
  std::vector<double> xs, ys, column(pick.size());
  for (std::size_t k = first; k <= last; ++k) {
    for (std::size_t i = 0; i < pick.size(); ++i) column[i] = traj[pick[i]][k];
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(std::max(median(column), kLogFloor)));
  }
  return ols_slope(xs, ys);
}

}  // namespace

GrowthVerdict classify_growth(const std::vector<std::vector<double>>& trajectories,
                              std::size_t first, std::size_t last,
                              const GrowthThresholds& thresholds, std::uint64_t seed) {
  require(!trajectories.empty(), "classify_growth: no replicas");
  require(first < last, "classify_growth: window needs at least two steps");
  for (const auto& t : trajectories) require(t.size() > last, "classify_growth: trajectory too short");
  require(thresholds.bootstrap >= 10, "classify_growth: need >= 10 bootstrap resamples");

  const std::size_t R = trajectories.size();
  std::vector<std::size_t> pick(R);
  for (std::size_t i = 0; i < R; ++i) pick[i] = i;

  GrowthVerdict out;
  out.slope = median_curve_slope(trajectories, pick, first, last);

  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(thresholds.bootstrap));
  for (int b = 0; b < thresholds.bootstrap; ++b) {
    StreamCursor cur(seed, make_digest(0xb007, static_cast<std::uint64_t>(b)));
    for (auto& p : pick) p = cur.next_below(R);
    boot.push_back(median_curve_slope(trajectories, pick, first, last));
  }
  std::sort(boot.begin(), boot.end());
  const double alpha = 1.0 - thresholds.ci_level;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(boot.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < boot.size() ? boot[i] * (1 - frac) + boot[i + 1] * frac : boot[i];
  };
  out.slope_ci = {quantile(alpha / 2), quantile(1 - alpha / 2)};
  if (out.slope_ci.hi < thresholds.flat_threshold) out.verdict = Growth::Flat;
  else if (out.slope_ci.lo > thresholds.grow_threshold) out.verdict = Growth::Growing;
  else out.verdict = Growth::Ambiguous;
  return out;
}

}  // namespace brw
