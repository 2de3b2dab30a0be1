// SPDX-License-Identifier: Apache-2.0
//
// Increment laws (Y) and offspring laws (Z).
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

namespace law {
struct Constant { double a; };
struct Uniform { double lo; double hi; };
struct Gaussian { double sigma; };
/// P(Y > x) = (x / xmin)^(-1/theta), Y >= xmin.
struct ParetoPositive { double theta; double xmin = 1.0; };
/// Random sign times a ParetoPositive magnitude.
struct SymmetricPareto { double theta; double xmin = 1.0; };
/// P(Y > x) = (x / xmin)^(-1/h0) * (log x / log xmin)^(-beta), Y >= xmin.
struct LogPareto { double h0; double beta; double xmin = std::numbers::e * std::numbers::e; };
/// Y = +a or -a with probability 1/2 each.
struct TwoPoint { double a; };
}  // namespace law

/// A sampleable law for the increment Y with an exact tail function.
class IncrementLaw {
 public:
  using Variant = std::variant<law::Constant, law::Uniform, law::Gaussian, law::ParetoPositive,
                               law::SymmetricPareto, law::LogPareto, law::TwoPoint>;

  /// Validates parameters; throws Error(InvalidArgument) on bad input.
  explicit IncrementLaw(Variant v);

  static IncrementLaw constant(double a) { return IncrementLaw(law::Constant{a}); }
  static IncrementLaw uniform(double lo, double hi) { return IncrementLaw(law::Uniform{lo, hi}); }
  static IncrementLaw gaussian(double sigma) { return IncrementLaw(law::Gaussian{sigma}); }
  static IncrementLaw pareto(double theta, double xmin = 1.0) {
    return IncrementLaw(law::ParetoPositive{theta, xmin});
  }
  static IncrementLaw sym_pareto(double theta, double xmin = 1.0) {
    return IncrementLaw(law::SymmetricPareto{theta, xmin});
  }
  static IncrementLaw log_pareto(double h0, double beta,
                                 double xmin = std::numbers::e * std::numbers::e) {
    return IncrementLaw(law::LogPareto{h0, beta, xmin});
  }
  static IncrementLaw two_point(double a) { return IncrementLaw(law::TwoPoint{a}); }

  const Variant& variant() const noexcept { return v_; }

  /// P(|Y| > x).
  double tail(double x) const;
  /// log P(|Y| > exp(log_x)); -inf when the probability is zero.
  double log_tail(double log_x) const;

  double sample(const KeyedStream& stream) const;

  bool symmetric() const noexcept;
  bool nonnegative() const noexcept;
  /// sup |Y| for laws with bounded support.
  std::optional<double> abs_bound() const noexcept;
  /// Short label such as "sym_pareto(theta=1)".
  std::string describe() const;

  /// Same law with Y replaced by scale * Y (scale > 0).
  IncrementLaw scaled(double scale) const;

 private:
  Variant v_;
};

/// Branch-free-ish sampler with precomputed constants for the hot loop.
class IncrementSampler {
 public:
  explicit IncrementSampler(const IncrementLaw& law);

  double operator()(const KeyedStream& s) const noexcept {
    switch (kind_) {
      case Kind::Constant:
        return a_;
      case Kind::Uniform:
        return a_ + b_ * s.uniform(1);
      case Kind::Gaussian: {
        const double r = std::sqrt(-2.0 * std::log(s.uniform_pos(1)));
        return a_ * r * std::cos(2.0 * std::numbers::pi * s.uniform(2));
      }
      case Kind::Pareto:
      case Kind::SymPareto: {
        const std::uint64_t w = s.bits(1);
        const double u = static_cast<double>((w >> 11) + 1) * 0x1.0p-53;
        const double mag = a_ * pow_neg(u);
        if (kind_ == Kind::Pareto) return mag;
        return std::bit_cast<double>(std::bit_cast<std::uint64_t>(mag) | (w << 63));
      }
      case Kind::LogPareto:
        return log_pareto(s);
      case Kind::TwoPoint:
        return std::bit_cast<double>(std::bit_cast<std::uint64_t>(a_) | (s.bits(1) << 63));
    }
    return 0.0;
  }

 private:
  enum class Kind { Constant, Uniform, Gaussian, Pareto, SymPareto, LogPareto, TwoPoint };
  enum class PowCase { One, Half, Two, General };
  static PowCase classify(double exponent) noexcept;

  // u^(-b_) for u in (0, 1].
  double pow_neg(double u) const noexcept {
    switch (pow_case_) {
      case PowCase::One: return 1.0 / u;
      case PowCase::Half: return 1.0 / std::sqrt(u);
      case PowCase::Two: return 1.0 / (u * u);
      case PowCase::General: break;
    }
    return std::pow(u, -b_);
  }

  double log_pareto(const KeyedStream& s) const noexcept;

  Kind kind_;
  PowCase pow_case_ = PowCase::General;
  double a_ = 0.0;  // value / scale / xmin
  double b_ = 0.0;  // width / theta
  double h0_ = 0.0, beta_ = 0.0, log_xmin_ = 0.0;
  PowCase beta_case_ = PowCase::General;
};

/// Result of the E|Y|^(1/H) classifier.
struct MomentResult {
  bool finite = false;
  /// Value when finite (closed form or quadrature).
  double value = 0.0;
  /// Absolute error estimate; zero for closed forms.
  double abs_error = 0.0;
  bool closed_form = true;
};

/// E|Y|^(1/H): Pareto types are finite iff H > theta; LogPareto at H = h0 is
/// finite iff beta > 1; bounded and Gaussian laws are always finite.
MomentResult moment_1overH(const IncrementLaw& law, double H);

namespace offspring {
struct Deterministic { int m; };
/// Z = 1 + Poisson(lambda).
struct PoissonShifted { double lambda; };
/// Z = 1 + Geometric(p) on {0, 1, ...}, i.e. P(Z = k) = p (1 - p)^(k - 1).
struct GeometricShifted { double p; };
/// probs[k] = P(Z = k).
struct CustomPmf { std::vector<double> probs; };
}  // namespace offspring

/// A sampleable offspring law with mean m > 1.
class OffspringLaw {
 public:
  using Variant = std::variant<offspring::Deterministic, offspring::PoissonShifted,
                               offspring::GeometricShifted, offspring::CustomPmf>;

  explicit OffspringLaw(Variant v);

  static OffspringLaw deterministic(int m) { return OffspringLaw(offspring::Deterministic{m}); }
  static OffspringLaw poisson_shifted(double lambda) {
    return OffspringLaw(offspring::PoissonShifted{lambda});
  }
  static OffspringLaw geometric_shifted(double p) {
    return OffspringLaw(offspring::GeometricShifted{p});
  }
  static OffspringLaw custom(std::vector<double> probs) {
    return OffspringLaw(offspring::CustomPmf{std::move(probs)});
  }

  const Variant& variant() const noexcept { return v_; }

  double mean() const noexcept { return mean_; }
  /// E[s^Z] for s in [0, 1].
  double pgf(double s) const;
  double prob_zero() const noexcept;
  bool is_deterministic() const noexcept {
    return std::holds_alternative<offspring::Deterministic>(v_);
  }
  /// True when E[Z^q] < inf for every q (all catalog variants).
  bool all_moments_finite() const noexcept { return true; }
  std::string describe() const;

  /// Draws Z from slot 0 of the stream.
  std::uint32_t sample(const KeyedStream& s) const noexcept {
    switch (v_.index()) {
      case 0:
        return static_cast<std::uint32_t>(std::get<0>(v_).m);
      case 1:
        return 1 + poisson(s.uniform(0));
      case 2:
        return 1 + static_cast<std::uint32_t>(std::floor(std::log(s.uniform_pos(0)) * inv_log_q_));
      default:
        return custom(s.uniform(0));
    }
  }

 private:
  std::uint32_t poisson(double u) const noexcept;
  std::uint32_t custom(double u) const noexcept;

  Variant v_;
  double mean_ = 0.0;
  double inv_log_q_ = 0.0;   // geometric: 1 / log(1 - p)
  std::vector<double> cdf_;  // custom pmf / poisson table
};

}  // namespace brw
