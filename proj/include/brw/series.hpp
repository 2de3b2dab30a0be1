// SPDX-License-Identifier: Apache-2.0
//
// Series quantities of the discounted branching random walk:
//   P(u) = sum_{k>=1} m^k P(|Y| > u m^(kH)),   P = P(1),
// the constant C_{m,P} = m (P + 1/(m-1)), the threshold ladder
// u_n = 2^(-H 2^n + H n), and the boundedness classifier.
#pragma once

#include <cstdint>
#include <string>

#include "brw/laws.hpp"

namespace brw {

enum class DivergenceEvidence {
  None,
  RatioTest,           // 16 consecutive term ratios >= 1 - 1e-9
  PartialSumOverflow,  // partial sum past the body > 1e12 (relative to the body sum when larger)
  IntegralTest,        // terms ~ c k^(-beta) with beta <= 1 (log-Pareto at H = h0)
};
const char* to_string(DivergenceEvidence e) noexcept;

struct SeriesResult {
  bool finite = false;
  double value = 0.0;
  /// Number of terms summed explicitly.
  int truncation_k = 0;
  /// Bound on |series - value|.
  double tail_bound = 0.0;
  DivergenceEvidence evidence = DivergenceEvidence::None;
};

struct SeriesOptions {
  double tol = 1e-12;
  /// Sum only k = 1..max_depth when > 0 (finite-depth expectation).
  int max_depth = 0;
};

/// P; cross-checked against moment_1overH (finite iff finite). Throws
/// Error(InternalInconsistency) when the two verdicts disagree.
SeriesResult compute_P(const IncrementLaw& law, double m, double H, double tol = 1e-12);

/// C_{m,P} = m (P + 1/(m-1)); requires P > 0.
double c_constant(double m, double P);
/// m (P + m/(m-1)). The index-shift argument behind the u^(-1/H) bound
/// leaves the k = 0 term m^0 P(|Y| > 1) <= 1, which C_{m,P} omits; with
/// it the bound holds for every law (TwoPoint(2), m = 2, H = 1/2 and
/// u = 0.48 gives 30 > C_{m,P} u^(-2) = 25.7).
double c_constant_with_origin(double m, double P);

/// log2 u_n = -H (2^n - n).
double log2_u_threshold(double H, int n);
double u_threshold(double H, int n);
/// Smallest n0 >= 1 with u_n strictly decreasing for n0 <= n <= n_max.
int u_threshold_monotone_from(double H, int n_max = 60);

/// sum_k m^k P(|Y| > u m^(kH)). When u in (0, 1] and P is finite and
/// positive the result is checked against c_constant_with_origin(m, P)
/// u^(-1/H); a violation throws Error(BoundViolated).
SeriesResult expected_exceedance(const IncrementLaw& law, double m, double H, double u,
                                 const SeriesOptions& options = {});

enum class Boundedness { Bounded, Unbounded, NotCovered };
const char* to_string(Boundedness b) noexcept;

Boundedness classify_boundedness(const IncrementLaw& law, const OffspringLaw& offspring, double H);

/// Hurwitz zeta sum_{k>=0} (k + a)^(-s) for s > 1, a > 0.
double hurwitz_zeta(double s, double a);

}  // namespace brw
