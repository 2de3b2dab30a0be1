// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "brw/error.hpp"
#include "brw/series.hpp"
#include "doctest.h"

using namespace brw;

namespace {

const std::vector<IncrementLaw>& catalog() {
  static const std::vector<IncrementLaw> laws{
      IncrementLaw::constant(1.0),         IncrementLaw::constant(5.0),        IncrementLaw::uniform(-1.0, 3.0),
      IncrementLaw::gaussian(1.5),         IncrementLaw::pareto(1.0),          IncrementLaw::pareto(0.7, 2.0),
      IncrementLaw::sym_pareto(1.0),       IncrementLaw::sym_pareto(0.3),      IncrementLaw::log_pareto(1.0, 2.0),
      IncrementLaw::log_pareto(1.0, 0.5),  IncrementLaw::log_pareto(0.5, 1.5, 3.0), IncrementLaw::two_point(2.0)};
  return laws;
}

// Term-by-term sum of m^k tail(u m^(kH)) far past where the terms matter.
double brute_series(const IncrementLaw& law, double m, double H, double u, int K) {
  double s = 0.0;
  for (int k = 1; k <= K; ++k) s += std::pow(m, k) * law.tail(u * std::pow(m, k * H));
  return s;
}

}  // namespace

TEST_CASE("P examples") {
  const SeriesResult p = compute_P(IncrementLaw::sym_pareto(1.0), 2.0, 2.0);
  CHECK(p.finite);
  CHECK(std::abs(p.value - 1.0) <= 1e-9);
  CHECK(p.truncation_k >= 32);
  CHECK(p.tail_bound <= 1e-12 * p.value);
  const SeriesResult d = compute_P(IncrementLaw::sym_pareto(1.0), 2.0, 1.0);
  CHECK_FALSE(d.finite);
  CHECK(d.evidence == DivergenceEvidence::RatioTest);
  const SeriesResult z = compute_P(IncrementLaw::constant(1.0), 2.0, 1.0);
  CHECK(z.finite);
  CHECK(z.value == 0.0);
}

TEST_CASE("critical log-Pareto diverges by the integral test") {
  const SeriesResult d = compute_P(IncrementLaw::log_pareto(1.0, 0.5), 2.0, 1.0);
  CHECK_FALSE(d.finite);
  CHECK(d.evidence == DivergenceEvidence::IntegralTest);
  const SeriesResult f = compute_P(IncrementLaw::log_pareto(1.0, 2.0), 2.0, 1.0);
  CHECK(f.finite);
  // Terms are 2, 4, then e^2 (k ln2 / 2)^(-2) for k >= 3.
  const double e2 = std::exp(2.0), l2 = std::log(2.0);
  const double exact = 6.0 + e2 * 4.0 / (l2 * l2) * (M_PI * M_PI / 6 - 1.25);
  CHECK(f.value == doctest::Approx(exact).epsilon(1e-9));
}

TEST_CASE("P finite iff the moment is finite on the catalog") {
  for (const auto& law : catalog())
    for (double H : {0.25, 0.5, 1.0, 2.0, 4.0})
      for (double m : {2.0, 3.0}) {
        INFO(law.describe(), " H=", H, " m=", m);
        const SeriesResult p = compute_P(law, m, H);
        CHECK(p.finite == moment_1overH(law, H).finite);
        const bool slow = std::holds_alternative<law::LogPareto>(law.variant());  // terms decay like k^-beta
        if (p.finite && H >= 1.0 && !slow)
          CHECK(p.value == doctest::Approx(brute_series(law, m, H, 1.0, 400)).epsilon(1e-9));
      }
}

TEST_CASE("the stated constant can fail once P(|Y| > 1) > 0") {
  // Terms 2 + 4 + 8 + 16 against 2 (2 + 1) u^-2 with P = 2.
  const auto law = IncrementLaw::two_point(2.0);
  const double u = 0.48;
  const SeriesResult e = expected_exceedance(law, 2.0, 0.5, u);
  CHECK(e.value == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(e.value > c_constant(2.0, 2.0) / (u * u));
  CHECK(e.value <= c_constant_with_origin(2.0, 2.0) / (u * u));
}

TEST_CASE("C constant") {
  CHECK(c_constant_with_origin(2.0, 1.0) == 6.0);
  CHECK(c_constant(2.0, 1.0) == 4.0);
  CHECK(c_constant(3.0, 0.5) == 3.0);
  CHECK_THROWS_AS(c_constant(2.0, 0.0), Error);
}

TEST_CASE("threshold ladder") {
  CHECK(u_threshold(1.0, 1) == 0.5);
  CHECK(u_threshold(1.0, 3) == 1.0 / 32);
  CHECK(u_threshold(2.0, 2) == 1.0 / 16);
  for (double H : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    for (int n = 1; n < 40; ++n) CHECK(log2_u_threshold(H, n + 1) < log2_u_threshold(H, n));
    CHECK(u_threshold_monotone_from(H) == 1);
  }
}

TEST_CASE("expected exceedance examples") {
  const auto law = IncrementLaw::sym_pareto(1.0);
  CHECK(expected_exceedance(law, 2.0, 2.0, 1.0).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(expected_exceedance(law, 2.0, 2.0, 0.25).value == doctest::Approx(4.0).epsilon(1e-12));
  const double u3 = u_threshold(2.0, 3);
  CHECK(expected_exceedance(law, 2.0, 2.0, u3).value <= 128.0);
  SeriesOptions o;
  o.max_depth = 30;
  CHECK(expected_exceedance(law, 2.0, 2.0, 1.0, o).value == doctest::Approx(1.0 - std::ldexp(1.0, -30)));
}

TEST_CASE("expected exceedance bound holds on a log grid and is non-increasing") {
  for (const auto& law : catalog())
    for (double H : {0.5, 1.0, 2.0, 4.0}) {
      const SeriesResult P = compute_P(law, 2.0, H);
      if (!P.finite) continue;
      double prev = 0.0;  // u decreases along the grid
      for (int i = 0; i < 20; ++i) {
        const double u = std::pow(10.0, -6.0 * i / 19.0);
        const SeriesResult e = expected_exceedance(law, 2.0, H, u);  // throws BoundViolated on failure
        INFO(law.describe(), " H=", H, " u=", u);
        REQUIRE(e.finite);
        if (P.value > 0) CHECK(e.value <= c_constant_with_origin(2.0, P.value) * std::pow(u, -1.0 / H) * (1 + 1e-12));
        CHECK(e.value >= prev - 1e-12 * std::abs(prev));
        prev = e.value;
      }
    }
}

TEST_CASE("classifier examples") {
  const auto d2 = OffspringLaw::deterministic(2);
  CHECK(classify_boundedness(IncrementLaw::sym_pareto(1.0), d2, 2.0) == Boundedness::Bounded);
  CHECK(classify_boundedness(IncrementLaw::sym_pareto(1.0), d2, 0.5) == Boundedness::Unbounded);
  CHECK(classify_boundedness(IncrementLaw::log_pareto(1.0, 0.5), d2, 1.0) == Boundedness::Unbounded);
  CHECK(classify_boundedness(IncrementLaw::log_pareto(1.0, 2.0), d2, 1.0) == Boundedness::Bounded);
  CHECK(classify_boundedness(IncrementLaw::gaussian(1.0), d2, 0.1) == Boundedness::Bounded);
  CHECK(classify_boundedness(IncrementLaw::pareto(1.0), OffspringLaw::custom({0.2, 0.2, 0.6}), 0.5) ==
        Boundedness::NotCovered);
  CHECK(classify_boundedness(IncrementLaw::pareto(1.0), OffspringLaw::custom({0.2, 0.2, 0.6}), 2.0) ==
        Boundedness::Bounded);
}

TEST_CASE("Hurwitz zeta") {
  CHECK(hurwitz_zeta(2.0, 1.0) == doctest::Approx(M_PI * M_PI / 6).epsilon(1e-13));
  CHECK(hurwitz_zeta(3.0, 0.5) == doctest::Approx(7 * 1.2020569031595942).epsilon(1e-13));
}
