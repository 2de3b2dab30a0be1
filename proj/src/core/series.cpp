// SPDX-License-Identifier: Apache-2.0
#include "brw/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <type_traits>
#include <variant>

#include "brw/error.hpp"

namespace brw {

const char* to_string(DivergenceEvidence e) noexcept {
  switch (e) {
    case DivergenceEvidence::None: return "None";
    case DivergenceEvidence::RatioTest: return "RatioTest";
    case DivergenceEvidence::PartialSumOverflow: return "PartialSumOverflow";
    case DivergenceEvidence::IntegralTest: return "IntegralTest";
  }
  return "None";
}

const char* to_string(Boundedness b) noexcept {
  switch (b) {
    case Boundedness::Bounded: return "Bounded";
    case Boundedness::Unbounded: return "Unbounded";
    case Boundedness::NotCovered: return "NotCovered";
  }
  return "NotCovered";
}

double hurwitz_zeta(double s, double a) {
  require(s > 1 && a > 0, "hurwitz_zeta: need s > 1, a > 0");
  // Euler-Maclaurin with the head summed until the shifted argument >= 24.
  constexpr double kBernoulli[] = {1.0 / 6,    -1.0 / 30,    1.0 / 42,  -1.0 / 30,
                                   5.0 / 66,   -691.0 / 2730, 7.0 / 6, -3617.0 / 510};
  double head = 0.0;
  double x = a;
  while (x < 24.0) {
    head += std::pow(x, -s);
    x += 1.0;
  }
  double tail = std::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(x, -s);
  // term_j = B_2j / (2j)! * s (s+1) ... (s+2j-2) * x^(-s-2j+1)
  double rising = s;          // s (s+1) ... (s+2j-2)
  double factorial = 2.0;     // (2j)!
  double power = std::pow(x, -s - 1.0);
  for (int j = 1; j <= 8; ++j) {
    tail += kBernoulli[j - 1] / factorial * rising * power;
    rising *= (s + 2 * j - 1) * (s + 2 * j);
    factorial *= (2.0 * j + 1) * (2.0 * j + 2);
    power /= x * x;
  }
  return head + tail;
}

double c_constant(double m, double P) {
  require(m > 1, "c_constant: m must be > 1");
  require(P > 0 && std::isfinite(P), "c_constant: P must be finite and > 0");
  return m * (P + 1.0 / (m - 1.0));
}

double c_constant_with_origin(double m, double P) {
  require(m > 1, "c_constant: m must be > 1");
  require(P > 0 && std::isfinite(P), "c_constant: P must be finite and > 0");
  return m * (P + m / (m - 1.0));
}

double log2_u_threshold(double H, int n) {
  require(H > 0, "u_threshold: H must be > 0");
  require(n >= 0 && n <= 62, "u_threshold: n must be in [0, 62]");
  return -H * (std::ldexp(1.0, n) - n);
}

double u_threshold(double H, int n) { return std::exp2(log2_u_threshold(H, n)); }

int u_threshold_monotone_from(double H, int n_max) {
  int n0 = 1;
  for (int n = 1; n < n_max; ++n)
    if (!(log2_u_threshold(H, n + 1) < log2_u_threshold(H, n))) n0 = n + 1;
  return n0;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMinTerms = 32;
constexpr int kRatioWindow = 16;
constexpr double kRatioFloor = 1.0 - 1e-9;
constexpr double kOverflow = 1e12;
constexpr int kMaxTerms = 10'000'000;

struct TermContext {
  const IncrementLaw& law;
  double log_m;
  double H;
  double log_u;

  double log_threshold(int k) const { return log_u + k * H * log_m; }
  double term(int k) const {
    const double lt = law.log_tail(log_threshold(k));
    if (lt == -kInf) return 0.0;
    return std::exp(k * log_m + lt);
  }
};

enum class TailKind { Unknown, Bound, Exact };
struct TailInfo {
  TailKind kind = TailKind::Unknown;
  double value = 0.0;
};

// Remainder sum_{j>k} term(j), from the closed form of each law's tail.
TailInfo remainder_after(const TermContext& c, int k) {
  const int j = k + 1;
  const double lx = c.log_threshold(j);
  if (const auto bound = c.law.abs_bound()) {
    if (lx >= std::log(*bound)) return {TailKind::Exact, 0.0};
    return {};
  }
  const auto& v = c.law.variant();
  auto pareto = [&](double theta, double xmin) -> TailInfo {
    if (lx < std::log(xmin)) return {};
    const double rho = std::exp(c.log_m * (1.0 - c.H / theta));
    if (rho >= 1.0) return {};
    return {TailKind::Exact, c.term(j) / (1.0 - rho)};
  };
  if (const auto* p = std::get_if<law::ParetoPositive>(&v)) return pareto(p->theta, p->xmin);
  if (const auto* p = std::get_if<law::SymmetricPareto>(&v)) return pareto(p->theta, p->xmin);
  if (const auto* p = std::get_if<law::LogPareto>(&v)) {
    const double L = std::log(p->xmin);
    if (lx < L) return {};
    const double log_rho = c.log_m * (1.0 - c.H / p->h0);
    const double rho = std::exp(log_rho);
    const double b = c.H * c.log_m;
    if (std::abs(log_rho) <= 1e-12 * c.log_m) {
      if (p->beta <= 1.0) return {};
      // term(i) = (xmin/u)^(1/h0) ((log_u + i b) / L)^(-beta)
      const double scale = std::exp((L - c.log_u) / p->h0) * std::pow(b / L, -p->beta);
      return {TailKind::Exact, scale * hurwitz_zeta(p->beta, j + c.log_u / b)};
    }
    if (rho >= 1.0) return {};
    double r = rho;
    if (p->beta < 0) r = rho * std::pow((c.log_u + (j + 1) * b) / (c.log_u + j * b), -p->beta);
    if (r >= 1.0) return {};
    return {TailKind::Bound, c.term(j) / (1.0 - r)};
  }
  if (std::holds_alternative<law::Gaussian>(v)) {
    // Term ratios of a Gaussian tail decrease along the geometric grid.
    const double t1 = c.term(j), t2 = c.term(j + 1);
    if (t1 == 0.0) return {TailKind::Exact, 0.0};
    const double r = t2 / t1;
    if (r >= 0.5) return {};
    return {TailKind::Bound, t1 / (1.0 - r)};
  }
  return {};
}

// Threshold scale below which the tail is still ~1 and terms grow like m^k
// whatever the law; divergence evidence is only collected above it.
double log_body_scale(const IncrementLaw& law) {
  const double s = std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, law::Constant>) return std::abs(p.a);
        else if constexpr (std::is_same_v<T, law::Uniform>) return std::max(std::abs(p.lo), std::abs(p.hi));
        else if constexpr (std::is_same_v<T, law::Gaussian>) return p.sigma;
        else if constexpr (std::is_same_v<T, law::TwoPoint>) return p.a;
        else return p.xmin;
      },
      law.variant());
  return s > 0 ? std::log(s) : -kInf;
}

bool critical_log_pareto_divergent(const IncrementLaw& law, double log_m, double H) {
  const auto* p = std::get_if<law::LogPareto>(&law.variant());
  if (!p) return false;
  const double log_rho = log_m * (1.0 - H / p->h0);
  return std::abs(log_rho) <= 1e-12 * log_m && p->beta <= 1.0;
}

SeriesResult sum_series(const IncrementLaw& law, double m, double H, double u,
                        const SeriesOptions& opt) {
  require(m > 1 && std::isfinite(m), "series: m must be > 1");
  require(H > 0 && std::isfinite(H), "series: H must be > 0");
  require(u > 0 && std::isfinite(u), "series: u must be > 0");
  require(opt.tol > 0, "series: tol must be > 0");
  const TermContext ctx{law, std::log(m), H, std::log(u)};

  SeriesResult r;
  if (opt.max_depth > 0) {
    double sum = 0.0;
    for (int k = 1; k <= opt.max_depth; ++k) sum += ctx.term(k);
    r.finite = true;
    r.value = sum;
    r.truncation_k = opt.max_depth;
    return r;
  }
  if (critical_log_pareto_divergent(law, ctx.log_m, H)) {
    r.evidence = DivergenceEvidence::IntegralTest;
    r.value = kInf;
    return r;
  }

  const double log_scale = log_body_scale(law);
  double sum = 0.0, body = 0.0, prev = 0.0;
  int rising = 0;
  for (int k = 1; k <= kMaxTerms; ++k) {
    const double t = ctx.term(k);
    sum += t;
    r.truncation_k = k;
    if (ctx.log_threshold(k) < log_scale) {
      body = sum;
      prev = t;
      continue;
    }
    if (prev > 0.0 && t > 0.0 && t / prev >= kRatioFloor) ++rising;
    else rising = 0;
    prev = t;
    if (rising >= kRatioWindow) {
      r.evidence = DivergenceEvidence::RatioTest;
      r.value = kInf;
      return r;
    }
    if (sum - body > kOverflow * std::max(1.0, body)) {
      r.evidence = DivergenceEvidence::PartialSumOverflow;
      r.value = kInf;
      return r;
    }
    if (k < kMinTerms) continue;
    const TailInfo tail = remainder_after(ctx, k);
    if (tail.kind == TailKind::Unknown) continue;
    if (tail.kind == TailKind::Exact) {
      // Closed-form remainder; what is left is rounding.
      r.finite = true;
      r.value = sum + tail.value;
      r.tail_bound = 1e-15 * r.value;
      return r;
    }
    if (tail.value <= opt.tol * sum || (sum == 0.0 && tail.value == 0.0)) {
      r.finite = true;
      r.value = sum;
      r.tail_bound = tail.value;
      return r;
    }
  }
  fail(ErrorCode::InternalInconsistency, "series: no verdict after " + std::to_string(kMaxTerms) + " terms");
}

}  // namespace

SeriesResult compute_P(const IncrementLaw& law, double m, double H, double tol) {
  SeriesOptions opt;
  opt.tol = tol;
  SeriesResult r = sum_series(law, m, H, 1.0, opt);
  const MomentResult mom = moment_1overH(law, H);
  if (r.finite != mom.finite) {
    fail(ErrorCode::InternalInconsistency,
         "compute_P: series verdict (" + std::string(r.finite ? "finite" : "divergent") +
             ") contradicts the moment classifier for " + law.describe());
  }
  return r;
}

SeriesResult expected_exceedance(const IncrementLaw& law, double m, double H, double u,
                                 const SeriesOptions& options) {
  SeriesResult r = sum_series(law, m, H, u, options);
  if (u <= 1.0 && r.finite) {
    const SeriesResult P = compute_P(law, m, H, options.tol);
    if (P.finite && P.value > 0) {
      const double bound = c_constant_with_origin(m, P.value) * std::pow(u, -1.0 / H);
      if (r.value > bound * (1.0 + 1e-12)) {
        fail(ErrorCode::BoundViolated, "expected_exceedance: value " + std::to_string(r.value) +
                                           " exceeds m (P + m/(m-1)) u^(-1/H) = " + std::to_string(bound));
      }
    }
  }
  return r;
}

Boundedness classify_boundedness(const IncrementLaw& law, const OffspringLaw& offspring, double H) {
  require(H > 0, "classify_boundedness: H must be > 0");
  const SeriesResult P = compute_P(law, offspring.mean(), H);
  if (P.finite && P.value == 0.0) return Boundedness::Bounded;
  const MomentResult mom = moment_1overH(law, H);
  if (mom.finite) {
    // Needs E[Z^q] < inf for some q > max(1/H, 1).
    return offspring.all_moments_finite() ? Boundedness::Bounded : Boundedness::NotCovered;
  }
  // Needs P(Z = 0) = 0 and E[Z log Z] < inf.
  if (offspring.prob_zero() == 0.0 && offspring.all_moments_finite()) return Boundedness::Unbounded;
  return Boundedness::NotCovered;
}

}  // namespace brw
