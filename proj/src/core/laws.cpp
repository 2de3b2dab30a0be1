// SPDX-License-Identifier: Apache-2.0
#include "brw/laws.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "brw/error.hpp"

namespace brw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

double pareto_tail(double x, double theta, double xmin) {
  if (x < xmin) return 1.0;
  return std::pow(x / xmin, -1.0 / theta);
}

double log_pareto_log_tail(double log_x, const law::LogPareto& p) {
  const double L = std::log(p.xmin);
  if (log_x < L) return 0.0;
  return -(log_x - L) / p.h0 - p.beta * std::log(log_x / L);
}

// log erfc(z) for z >= 0, accurate in the far tail.
double log_erfc(double z) {
  if (z < 25.0) return std::log(std::erfc(z));
  const double z2 = z * z;
  return -z2 - std::log(z * std::sqrt(std::numbers::pi)) +
         std::log1p(-1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2));
}

double uniform_tail(double x, double lo, double hi) {
  // Lebesgue measure of [lo, hi] outside [-x, x].
  const double above = std::max(0.0, hi - std::max(lo, x));
  const double below = std::max(0.0, std::min(hi, -x) - lo);
  return (above + below) / (hi - lo);
}

}  // namespace

IncrementLaw::IncrementLaw(Variant v) : v_(std::move(v)) {
  std::visit(
      overloaded{
          [](const law::Constant& c) { require(std::isfinite(c.a), "constant: a must be finite"); },
          [](const law::Uniform& u) {
            require(std::isfinite(u.lo) && std::isfinite(u.hi) && u.lo < u.hi,
                    "uniform: need finite lo < hi");
          },
          [](const law::Gaussian& g) {
            require(g.sigma > 0 && std::isfinite(g.sigma), "gaussian: sigma must be > 0");
          },
          [](const law::ParetoPositive& p) {
            require(p.theta > 0 && std::isfinite(p.theta), "pareto: theta must be > 0");
            require(p.xmin > 0 && std::isfinite(p.xmin), "pareto: xmin must be > 0");
          },
          [](const law::SymmetricPareto& p) {
            require(p.theta > 0 && std::isfinite(p.theta), "sym_pareto: theta must be > 0");
            require(p.xmin > 0 && std::isfinite(p.xmin), "sym_pareto: xmin must be > 0");
          },
          [](const law::LogPareto& p) {
            require(p.h0 > 0 && std::isfinite(p.h0), "log_pareto: h0 must be > 0");
            require(std::isfinite(p.beta), "log_pareto: beta must be finite");
            require(p.xmin > std::numbers::e && std::isfinite(p.xmin),
                    "log_pareto: xmin must be > e");
            // d/dy [y/h0 + beta log(1 + y/L)] > 0 on y >= 0 keeps the tail monotone.
            require(1.0 / p.h0 + p.beta / std::log(p.xmin) > 0,
                    "log_pareto: parameters give a non-monotone tail (need 1/h0 + beta/log(xmin) > 0)");
          },
          [](const law::TwoPoint& t) {
            require(t.a > 0 && std::isfinite(t.a), "two_point: a must be > 0");
          },
      },
      v_);
}

double IncrementLaw::tail(double x) const {
  require(x >= 0, "tail: x must be >= 0");
  return std::visit(
      overloaded{
          [&](const law::Constant& c) { return std::abs(c.a) > x ? 1.0 : 0.0; },
          [&](const law::Uniform& u) { return uniform_tail(x, u.lo, u.hi); },
          [&](const law::Gaussian& g) { return std::erfc(x / (g.sigma * std::numbers::sqrt2)); },
          [&](const law::ParetoPositive& p) { return pareto_tail(x, p.theta, p.xmin); },
          [&](const law::SymmetricPareto& p) { return pareto_tail(x, p.theta, p.xmin); },
          [&](const law::LogPareto& p) {
            if (x < p.xmin) return 1.0;
            return std::exp(log_pareto_log_tail(std::log(x), p));
          },
          [&](const law::TwoPoint& t) { return t.a > x ? 1.0 : 0.0; },
      },
      v_);
}

double IncrementLaw::log_tail(double log_x) const {
  return std::visit(
      overloaded{
          [&](const law::ParetoPositive& p) {
            const double l = std::log(p.xmin);
            return log_x < l ? 0.0 : -(log_x - l) / p.theta;
          },
          [&](const law::SymmetricPareto& p) {
            const double l = std::log(p.xmin);
            return log_x < l ? 0.0 : -(log_x - l) / p.theta;
          },
          [&](const law::LogPareto& p) { return log_pareto_log_tail(log_x, p); },
          [&](const law::Gaussian& g) {
            return log_erfc(std::exp(log_x) / (g.sigma * std::numbers::sqrt2));
          },
          [&](const auto&) {
            const double t = tail(std::exp(log_x));
            return t > 0 ? std::log(t) : -kInf;
          },
      },
      v_);
}

double IncrementLaw::sample(const KeyedStream& stream) const {
  return IncrementSampler(*this)(stream);
}

bool IncrementLaw::symmetric() const noexcept {
  return std::visit(overloaded{
                        [](const law::Gaussian&) { return true; },
                        [](const law::SymmetricPareto&) { return true; },
                        [](const law::TwoPoint&) { return true; },
                        [](const law::Uniform& u) { return u.lo == -u.hi; },
                        [](const law::Constant& c) { return c.a == 0.0; },
                        [](const auto&) { return false; },
                    },
                    v_);
}

bool IncrementLaw::nonnegative() const noexcept {
  return std::visit(overloaded{
                        [](const law::Constant& c) { return c.a >= 0; },
                        [](const law::Uniform& u) { return u.lo >= 0; },
                        [](const law::ParetoPositive&) { return true; },
                        [](const law::LogPareto&) { return true; },
                        [](const auto&) { return false; },
                    },
                    v_);
}

std::optional<double> IncrementLaw::abs_bound() const noexcept {
  return std::visit(overloaded{
                        [](const law::Constant& c) -> std::optional<double> { return std::abs(c.a); },
                        [](const law::Uniform& u) -> std::optional<double> {
                          return std::max(std::abs(u.lo), std::abs(u.hi));
                        },
                        [](const law::TwoPoint& t) -> std::optional<double> { return t.a; },
                        [](const auto&) -> std::optional<double> { return std::nullopt; },
                    },
                    v_);
}

std::string IncrementLaw::describe() const {
  return std::visit(
      overloaded{
          [](const law::Constant& c) { return "constant(a=" + fmt_num(c.a) + ")"; },
          [](const law::Uniform& u) {
            return "uniform(lo=" + fmt_num(u.lo) + ";hi=" + fmt_num(u.hi) + ")";
          },
          [](const law::Gaussian& g) { return "gaussian(sigma=" + fmt_num(g.sigma) + ")"; },
          [](const law::ParetoPositive& p) {
            return "pareto(theta=" + fmt_num(p.theta) + ";xmin=" + fmt_num(p.xmin) + ")";
          },
          [](const law::SymmetricPareto& p) {
            return "sym_pareto(theta=" + fmt_num(p.theta) + ";xmin=" + fmt_num(p.xmin) + ")";
          },
          [](const law::LogPareto& p) {
            return "log_pareto(h0=" + fmt_num(p.h0) + ";beta=" + fmt_num(p.beta) +
                   ";xmin=" + fmt_num(p.xmin) + ")";
          },
          [](const law::TwoPoint& t) { return "two_point(a=" + fmt_num(t.a) + ")"; },
      },
      v_);
}

IncrementLaw IncrementLaw::scaled(double scale) const {
  require(scale > 0 && std::isfinite(scale), "scaled: factor must be > 0");
  return std::visit(
      overloaded{
          [&](const law::Constant& c) { return IncrementLaw(law::Constant{c.a * scale}); },
          [&](const law::Uniform& u) { return IncrementLaw(law::Uniform{u.lo * scale, u.hi * scale}); },
          [&](const law::Gaussian& g) { return IncrementLaw(law::Gaussian{g.sigma * scale}); },
          [&](const law::ParetoPositive& p) {
            return IncrementLaw(law::ParetoPositive{p.theta, p.xmin * scale});
          },
          [&](const law::SymmetricPareto& p) {
            return IncrementLaw(law::SymmetricPareto{p.theta, p.xmin * scale});
          },
          [&](const law::LogPareto&) -> IncrementLaw {
            fail(ErrorCode::InvalidArgument, "log_pareto is not closed under scaling");
          },
          [&](const law::TwoPoint& t) { return IncrementLaw(law::TwoPoint{t.a * scale}); },
      },
      v_);
}

// ---------------------------------------------------------------------------

IncrementSampler::PowCase IncrementSampler::classify(double e) noexcept {
  if (e == 1.0) return PowCase::One;
  if (e == 0.5) return PowCase::Half;
  if (e == 2.0) return PowCase::Two;
  return PowCase::General;
}

IncrementSampler::IncrementSampler(const IncrementLaw& law) {
  std::visit(overloaded{
                 [&](const law::Constant& c) { kind_ = Kind::Constant, a_ = c.a; },
                 [&](const law::Uniform& u) { kind_ = Kind::Uniform, a_ = u.lo, b_ = u.hi - u.lo; },
                 [&](const law::Gaussian& g) { kind_ = Kind::Gaussian, a_ = g.sigma; },
                 [&](const law::ParetoPositive& p) {
                   kind_ = Kind::Pareto, a_ = p.xmin, b_ = p.theta;
                   pow_case_ = classify(p.theta);
                 },
                 [&](const law::SymmetricPareto& p) {
                   kind_ = Kind::SymPareto, a_ = p.xmin, b_ = p.theta;
                   pow_case_ = classify(p.theta);
                 },
                 [&](const law::LogPareto& p) {
                   kind_ = Kind::LogPareto, a_ = p.xmin;
                   h0_ = p.h0, beta_ = p.beta, log_xmin_ = std::log(p.xmin);
                   if (p.beta > 0) beta_case_ = classify(1.0 / p.beta);
                 },
                 [&](const law::TwoPoint& t) { kind_ = Kind::TwoPoint, a_ = t.a; },
             },
             law.variant());
}

double IncrementSampler::log_pareto(const KeyedStream& s) const noexcept {
  // With y = log(Y / xmin) the survival function factors as
  //   exp(-y / h0) * (1 + y / L)^(-beta),
  // the survival of min(E, W) with E ~ Exp(1/h0) and W Lomax(beta, L).
  const double e = -h0_ * std::log(s.uniform_pos(1));
  if (beta_ == 0.0) return a_ * std::exp(e);
  if (beta_ > 0.0) {
    const double u = s.uniform_pos(2);
    double v;
    switch (beta_case_) {
      case PowCase::One: v = 1.0 / u; break;
      case PowCase::Half: v = 1.0 / std::sqrt(u); break;
      case PowCase::Two: v = 1.0 / (u * u); break;
      default: v = std::pow(u, -1.0 / beta_); break;
    }
    const double w = log_xmin_ * (v - 1.0);
    return a_ * std::exp(std::min(e, w));
  }
  // beta < 0: invert g(y) = y / h0 + beta log(1 + y / L) = -log U by
  // safeguarded Newton; g is increasing under the monotonicity constraint.
  const double target = -std::log(s.uniform_pos(1));
  const double L = log_xmin_;
  auto g = [&](double y) { return y / h0_ + beta_ * std::log1p(y / L) - target; };
  double lo = 0.0, hi = std::max(1.0, 2.0 * target * h0_);
  while (g(hi) < 0) hi *= 2.0;
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double gy = g(y);
    if (gy < 0) lo = y; else hi = y;
    const double dg = 1.0 / h0_ + beta_ / (L + y);
    double next = y - gy / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) <= 1e-15 * std::max(1.0, y)) { y = next; break; }
    y = next;
  }
  return a_ * std::exp(y);
}

// ---------------------------------------------------------------------------

MomentResult moment_1overH(const IncrementLaw& law, double H) {
  require(H > 0 && std::isfinite(H), "moment_1overH: H must be > 0");
  const double p = 1.0 / H;
  auto finite = [](double v) { return MomentResult{true, v, 0.0, true}; };
  const MomentResult infinite{false, kInf, 0.0, true};

  auto pareto_moment = [&](double theta, double xmin) {
    const double alpha = 1.0 / theta;
    if (p < alpha && !nearly_equal(p, alpha)) return finite(std::pow(xmin, p) * alpha / (alpha - p));
    return infinite;
  };

  return std::visit(
      overloaded{
          [&](const law::Constant& c) { return finite(std::pow(std::abs(c.a), p)); },
          [&](const law::TwoPoint& t) { return finite(std::pow(t.a, p)); },
          [&](const law::Uniform& u) {
            const double lo = u.lo, hi = u.hi;
            double integral;
            if (lo >= 0) integral = std::pow(hi, p + 1) - std::pow(lo, p + 1);
            else if (hi <= 0) integral = std::pow(-lo, p + 1) - std::pow(-hi, p + 1);
            else integral = std::pow(-lo, p + 1) + std::pow(hi, p + 1);
            return finite(integral / ((p + 1) * (hi - lo)));
          },
          [&](const law::Gaussian& g) {
            return finite(std::pow(g.sigma, p) * std::pow(2.0, p / 2) * std::tgamma((p + 1) / 2) /
                          std::sqrt(std::numbers::pi));
          },
          [&](const law::ParetoPositive& q) { return pareto_moment(q.theta, q.xmin); },
          [&](const law::SymmetricPareto& q) { return pareto_moment(q.theta, q.xmin); },
          [&](const law::LogPareto& q) {
            const double alpha = 1.0 / q.h0;
            const double L = std::log(q.xmin);
            const double scale = std::pow(q.xmin, p);
            if (nearly_equal(p, alpha)) {
              // E|Y|^p = xmin^p (1 + p int_0^inf (1 + s/L)^(-beta) ds).
              if (q.beta > 1) return finite(scale * (1.0 + p * L / (q.beta - 1.0)));
              return infinite;
            }
            if (p > alpha) return infinite;
            // E|Y|^p = xmin^p (1 + p int_0^inf exp(-(alpha - p) s) (1 + s/L)^(-beta) ds).
            const double rate = alpha - p;
            auto f = [&](double s) { return std::exp(-rate * s - q.beta * std::log1p(s / L)); };
            boost::math::quadrature::exp_sinh<double> integrator;
            double err = 0.0;
            const double I = integrator.integrate(f, 1e-14, &err);
            MomentResult r{true, scale * (1.0 + p * I), scale * p * err, false};
            return r;
          },
      },
      law.variant());
}

// ---------------------------------------------------------------------------

OffspringLaw::OffspringLaw(Variant v) : v_(std::move(v)) {
  std::visit(overloaded{
                 [&](const offspring::Deterministic& d) {
                   require(d.m >= 2, "deterministic offspring: m must be an integer >= 2");
                   mean_ = d.m;
                 },
                 [&](const offspring::PoissonShifted& ps) {
                   require(ps.lambda > 0 && std::isfinite(ps.lambda) && ps.lambda <= 200,
                           "poisson_shifted: lambda must be in (0, 200]");
                   mean_ = 1.0 + ps.lambda;
                   double prob = std::exp(-ps.lambda), acc = prob;
                   cdf_.push_back(acc);
                   for (int k = 1; 1.0 - acc > 1e-17 && k < 100000; ++k) {
                     prob *= ps.lambda / k;
                     acc += prob;
                     cdf_.push_back(acc);
                     if (prob < 1e-300 && k > ps.lambda) break;
                   }
                 },
                 [&](const offspring::GeometricShifted& g) {
                   require(g.p > 0 && g.p < 1, "geometric_shifted: p must be in (0, 1)");
                   mean_ = 1.0 / g.p;
                   inv_log_q_ = 1.0 / std::log1p(-g.p);
                 },
                 [&](const offspring::CustomPmf& c) {
                   require(!c.probs.empty(), "custom pmf: probs must be nonempty");
                   double total = 0.0, mean = 0.0;
                   for (std::size_t k = 0; k < c.probs.size(); ++k) {
                     require(c.probs[k] >= 0 && std::isfinite(c.probs[k]),
                             "custom pmf: probabilities must be >= 0");
                     total += c.probs[k];
                     mean += static_cast<double>(k) * c.probs[k];
                     cdf_.push_back(total);
                   }
                   require(std::abs(total - 1.0) <= 1e-9, "custom pmf: probabilities must sum to 1");
                   mean_ = mean;
                 },
             },
             v_);
  require(mean_ > 1.0, "offspring: mean m = E[Z] must be > 1");
}

double OffspringLaw::pgf(double s) const {
  require(s >= 0 && s <= 1, "pgf: s must be in [0, 1]");
  return std::visit(overloaded{
                        [&](const offspring::Deterministic& d) { return std::pow(s, d.m); },
                        [&](const offspring::PoissonShifted& ps) {
                          return s * std::exp(ps.lambda * (s - 1.0));
                        },
                        [&](const offspring::GeometricShifted& g) {
                          return s * g.p / (1.0 - (1.0 - g.p) * s);
                        },
                        [&](const offspring::CustomPmf& c) {
                          double acc = 0.0;
                          for (auto it = c.probs.rbegin(); it != c.probs.rend(); ++it) acc = acc * s + *it;
                          return acc;
                        },
                    },
                    v_);
}

double OffspringLaw::prob_zero() const noexcept {
  if (const auto* c = std::get_if<offspring::CustomPmf>(&v_)) return c->probs.front();
  return 0.0;
}

std::string OffspringLaw::describe() const {
  return std::visit(
      overloaded{
          [](const offspring::Deterministic& d) { return "deterministic(m=" + std::to_string(d.m) + ")"; },
          [](const offspring::PoissonShifted& ps) { return "poisson_shifted(lambda=" + fmt_num(ps.lambda) + ")"; },
          [](const offspring::GeometricShifted& g) { return "geometric_shifted(p=" + fmt_num(g.p) + ")"; },
          [](const offspring::CustomPmf& c) {
            std::string s = "custom(";
            for (std::size_t k = 0; k < c.probs.size(); ++k) s += (k ? ";" : "") + fmt_num(c.probs[k]);
            return s + ")";
          },
      },
      v_);
}

std::uint32_t OffspringLaw::poisson(double u) const noexcept {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::uint32_t>(it - cdf_.begin());
}

std::uint32_t OffspringLaw::custom(double u) const noexcept {
  // Smallest k with cdf[k] > u, skipping zero-probability atoms.
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) {
    const auto& probs = std::get<offspring::CustomPmf>(v_).probs;
    std::size_t k = probs.size() - 1;
    while (k > 0 && probs[k] == 0.0) --k;
    return static_cast<std::uint32_t>(k);
  }
  return static_cast<std::uint32_t>(it - cdf_.begin());
}

}  // namespace brw
