// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS / FAIL line per criterion, extra INFO lines for
// context. Exit status is the number of failing criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "brw/chaining.hpp"
#include "brw/experiment.hpp"
#include "brw/rde.hpp"
#include "brw/series.hpp"
#include "brw/sssi.hpp"
#include "brw/tree_sim.hpp"
#include "eight_class_tree.hpp"
#include "oracles.hpp"

using namespace brw;

namespace {

const int kThreads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Line {
 public:
  template <class T>
  Line& operator<<(const T& v) {
    os_ << v;
    return *this;
  }
  std::string str() const { return os_.str(); }
  operator std::string() const { return str(); }

 private:
  std::ostringstream os_;
};

void info(const std::string& s) { std::printf("       INFO %s\n", s.c_str()); }

int failures = 0;

void criterion(int id, const char* name, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), s);
  std::fflush(stdout);
  failures += !v.pass;
}

SimConfig sim(IncrementLaw y, OffspringLaw z, double H, int N, std::uint64_t seed) {
  return SimConfig{std::move(y), std::move(z), H, N, seed};
}

const OffspringLaw kBinary = OffspringLaw::deterministic(2);

Verdict phase_dichotomy() {
  std::vector<PhaseCell> cells;
  for (double H : {0.5, 0.75, 1.5, 2.0}) cells.push_back({H, IncrementLaw::sym_pareto(1.0)});
  PhaseScanOptions o;
  o.depth = 24;
  o.replicas = 32;
  o.seed = 1;
  o.threads = kThreads;
  int hard = 0, agree = 0;
  Line d;
  for (const auto& r : phase_scan(cells, o)) {
    hard += r.hard_disagreement();
    agree += (r.verdict.verdict == Growth::Flat && r.classifier == Boundedness::Bounded) ||
             (r.verdict.verdict == Growth::Growing && r.classifier == Boundedness::Unbounded);
    d << "H=" << r.H << " " << to_string(r.verdict.verdict) << " (slope " << r.verdict.slope << ", "
      << to_string(r.classifier) << "); ";
  }
  d << "hard disagreements " << hard;
  return {hard == 0 && agree == 4, d.str()};
}

Verdict critical_case() {
  PhaseScanOptions o;
  o.depth = 24;
  o.replicas = 32;
  o.seed = 2;
  o.threads = kThreads;
  const auto res = phase_scan({{1.0, IncrementLaw::log_pareto(1.0, 2.0)}, {1.0, IncrementLaw::log_pareto(1.0, 0.5)}}, o);
  Line d;
  for (const auto& r : res)
    d << r.params << ": " << to_string(r.verdict.verdict) << " (slope " << r.verdict.slope << " CI [" << r.verdict.slope_ci.lo
      << ", " << r.verdict.slope_ci.hi << "]), classifier " << to_string(r.classifier) << "; ";
  Line pw;
  pw << "exponent of median max_abs against depth over [N/2, N]:";
  for (const auto& r : res) {
    std::vector<double> lk, lm;
    for (std::size_t k = r.median_max_abs.size() / 2; k < r.median_max_abs.size(); ++k) {
      lk.push_back(std::log(static_cast<double>(k)));
      lm.push_back(std::log(r.median_max_abs[k]));
    }
    pw << " " << r.params << " " << ols_slope(lk, lm) << ";";
  }
  info(pw.str());
  const bool ok = res[0].verdict.verdict == Growth::Flat && res[1].verdict.verdict == Growth::Growing &&
                  res[0].classifier == Boundedness::Bounded && res[1].classifier == Boundedness::Unbounded;
  return {ok, d.str()};
}

Verdict series_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto law = IncrementLaw::sym_pareto(1.0);
  const SeriesResult P = compute_P(law, 2.0, 2.0);
  int violations = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double u = std::pow(1e-6, 1.0 - i / 19.0);
    const SeriesResult e = expected_exceedance(law, 2.0, 2.0, u);
    const double bound = 4.0 * std::pow(u, -0.5);
    violations += !(e.finite && e.value <= bound);
    worst = std::max(worst, e.value / bound);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Line d;
  d << "P = " << P.value << ", grid violations " << violations << ", max series/bound " << worst << ", " << secs
    << " s";
  return {P.finite && std::abs(P.value - 1.0) <= 1e-9 && violations == 0 && secs < 1.0, d.str()};
}

Verdict exceedance_counts() {
  const SimConfig base = sim(IncrementLaw::sym_pareto(1.0), kBinary, 2.0, 16, 4);
  const int levels[] = {2, 3};
  std::vector<double> th;
  for (int n : levels) th.push_back(u_threshold(2.0, n));
  const std::size_t R = 1000;
  const std::uint64_t id = hash_name("acceptance/exceedance_counts");
  std::vector<std::vector<double>> counts(th.size());
  for (std::size_t r = 0; r < R; ++r) {
    const SimulationResult s = simulate(base.with_seed(split_seed(base.seed, id, r)), th);
    for (std::size_t i = 0; i < th.size(); ++i) counts[i].push_back(static_cast<double>(s.exceedances[i].total_count));
  }
  const double C = c_constant(2.0, compute_P(base.increment, 2.0, 2.0).value);
  bool ok = true;
  Line d;
  for (std::size_t i = 0; i < th.size(); ++i) {
    const MeanSe ms = mean_se(counts[i]);
    SeriesOptions so;
    so.max_depth = base.depth;
    const double expect = expected_exceedance(base.increment, 2.0, 2.0, th[i], so).value;
    const double bound = C * std::exp2(std::ldexp(1.0, levels[i]) - levels[i]);
    const bool pass = std::abs(ms.mean - expect) <= 4 * ms.se && ms.mean <= bound;
    ok &= pass;
    d << "n=" << levels[i] << ": mean " << ms.mean << " +- " << ms.se << ", expected " << expect << ", bound "
      << bound << "; ";
  }
  return {ok, d.str()};
}

Verdict ray_tail() {
  const SimConfig base = sim(IncrementLaw::sym_pareto(1.0), kBinary, 2.0, 14, 5);
  const double rs[] = {3, 5, 8};
  const RayTailReport rep = max_ray_exceedance_tail(base, 1.0, rs, 10'000, kThreads);
  bool ok = !rep.any_truncated;
  Line d;
  for (const auto& p : rep.points) {
    ok &= p.ci.hi <= p.bound;
    d << "r=" << p.r << ": " << p.successes << "/" << p.replicas << ", CI hi " << p.ci.hi << " vs bound " << p.bound
      << "; ";
  }
  const double r8[] = {8};
  const RayTailReport big = max_ray_exceedance_tail(base, 1.0, r8, 100'000, kThreads);
  info(Line() << "r=8 at 10^5 replicas: " << big.points[0].successes << " successes, CI hi " << big.points[0].ci.hi
              << " vs bound " << big.points[0].bound << (big.points[0].ci.hi <= big.points[0].bound ? " (below)" : ""));
  return {ok, d.str()};
}

std::vector<SimConfig> chain_suite(int N, std::size_t count, std::uint64_t base_seed) {
  const std::vector<IncrementLaw> ys{IncrementLaw::sym_pareto(1.0), IncrementLaw::sym_pareto(0.5),
                                     IncrementLaw::gaussian(1.0), IncrementLaw::two_point(1.0)};
  const double Hs[] = {0.5, 1.0, 2.0};
  std::vector<SimConfig> out;
  for (std::uint64_t i = 0; i < count; ++i)
    out.push_back(sim(ys[i % 4], kBinary, Hs[(i / 4) % 3], N, split_seed(base_seed, 0, i)));
  return out;
}

Verdict partitions() {
  std::size_t violations = 0, active = 0;
  for (const SimConfig& c : chain_suite(14, 100, 6)) {
    const RaySet rays = extract_raypoints(c);
    const AdmissibleSequence seq = build_partitions(rays, 4);
    violations += check_partitions(seq, rays).violations;
    active += seq.activation_level() < 4;
  }
  const RaySet tree = fixture::eight_class_tree();
  const AdmissibleSequence seq = build_partitions(tree, 3);
  const bool tree_ok = fixture::canonical(seq.levels[3].class_of) == fixture::canonical(fixture::eight_classes) &&
                      seq.levels[3].cardinality == 8 && check_partitions(seq, tree).ok();
  Line d;
  d << "violations " << violations << " over 100 instances (" << active << " with exceedance levels active); "
    << "eight-class tree " << (tree_ok ? "reproduced" : "differ");
  return {violations == 0 && tree_ok, d.str()};
}

Verdict bernoulli() {
  int outside = 0;
  double max_ratio = 0.0, max_z = 0.0;
  std::size_t i = 0;
  for (const SimConfig& c : chain_suite(12, 20, 7)) {
    const RaySet rays = extract_raypoints(c);
    const auto pts = rays.coord_matrix();
    const MeanSe ex = bernoulli_sup(rays, pts, BernoulliMode::Exhaustive, 0, 0, kThreads);
    const MeanSe mc = bernoulli_sup(rays, pts, BernoulliMode::MonteCarlo, 20'000, split_seed(7, 1, i++), kThreads);
    const double z = std::abs(ex.mean - mc.mean) / mc.se;
    max_z = std::max(max_z, z);
    outside += z > 3;
    const AdmissibleSequence seq = build_partitions(rays, 5);
    const Decomposition dec = decompose(rays);
    const double denom = gamma2_upper(seq, rays, dec.s1).gamma2_upper + dec.sup_l1_s2;
    if (denom > 0) max_ratio = std::max(max_ratio, ex.mean / denom);
  }
  Line d;
  d << "exhaustive vs MC outside 3 SE: " << outside << "/20 (max |z| " << max_z << "); max ratio " << max_ratio;
  return {outside == 0 && max_ratio <= 10, d.str()};
}

Verdict rde() {
  bool ok = true;
  Line d;
  const FixedPointReport det = iterate_to_fixpoint(IncrementLaw::constant(1.0), kBinary, 0.25);
  double err = 0.0;
  for (double v : det.cdf.values()) err = std::max(err, std::abs(v - 4.0 / 3.0));
  ok &= det.status == FixpointStatus::Converged && err <= 1e-6;
  d << "deterministic max error " << err << "; ";

  const auto pareto = IncrementLaw::pareto(1.0);
  FixpointOptions o;
  o.seed = 8;
  const FixedPointReport good = iterate_to_fixpoint(pareto, kBinary, 0.25, o);
  ok &= good.status == FixpointStatus::Converged && good.ks_gap <= 2e-2;
  d << "c=1/4 " << to_string(good.status) << " after " << good.iterations << " (KS gap " << good.ks_gap << ")";
  if (good.status == FixpointStatus::Converged) {
    const FieResidual fie = fie_residual(good.cdf, pareto, kBinary, 0.25, quantile_grid(good.cdf), 1'000'000, 9);
    ok &= fie.max_abs <= 0.02;
    d << ", FIE residual " << fie.max_abs;
    const SimulationComparison cmp = compare_to_simulation(good, sim(pareto, kBinary, 2.0, 20, 10), 10'000, kThreads);
    ok &= cmp.ks <= 0.03 && !cmp.any_truncated;
    d << ", simulation KS " << cmp.ks << " (p " << cmp.p_value << ")";
  }
  const FixedPointReport bad = iterate_to_fixpoint(pareto, kBinary, std::sqrt(0.5), o);
  ok &= bad.status == FixpointStatus::Diverged;
  d << "; c=2^-1/2 " << to_string(bad.status) << " after " << bad.iterations << " (final median "
    << bad.median_trajectory.back() << ")";

  // The finite-pool stationary median against pool size.
  Line drift;
  drift << "late-median mean by pool size (c=1/4 | c=2^-1/2):";
  for (std::size_t n : {1'000u, 10'000u, 100'000u}) {
    FixpointOptions q;
    q.pool_size = n;
    q.max_iters = 150;
    q.ks_tol = 0;
    q.monotone_run = 1'000;
    q.seed = 11;
    drift << " n=" << n << ":";
    for (double c : {0.25, std::sqrt(0.5)}) {
      const auto r = iterate_to_fixpoint(pareto, kBinary, c, q);
      double s = 0;
      for (std::size_t k = 51; k < r.median_trajectory.size(); ++k) s += r.median_trajectory[k];
      drift << " " << s / static_cast<double>(r.median_trajectory.size() - 51);
    }
  }
  info(drift.str());
  return {ok, d.str()};
}

SkeletonConfig skel(double c, IncrementLaw y, int K, std::uint64_t seed) {
  SkeletonConfig s;
  s.p = 2;
  s.c = c;
  s.y = std::move(y);
  s.K = K;
  s.seed = seed;
  return s;
}

Verdict sssi() {
  const Skeleton s = build_skeleton(skel(0.6, IncrementLaw::sym_pareto(1.0), 14, 12));
  std::size_t bad_pairs = 0;
  StreamCursor cur(12, make_digest(3, 4));
  for (int t = 0; t < 1000; ++t) {
    const int j = 1 + static_cast<int>(cur.next_below(13));
    const std::uint64_t pj = std::uint64_t{1} << j;
    const std::uint64_t n = cur.next_below(s.X.size());
    const std::uint64_t n2 = n % pj + pj * cur.next_below(s.X.size() / pj);
    for (int k = 1; k <= j; ++k) bad_pairs += s.level_contribution(k, n) != s.level_contribution(k, n2);
  }
  const auto flat = boundedness_scan(skel(0.25, IncrementLaw::sym_pareto(1.0), 14, 13), 8, 14, 32);
  const auto grow = boundedness_scan(skel(std::sqrt(0.5), IncrementLaw::sym_pareto(1.0), 14, 13), 8, 14, 32);
  const bool m_flat = moment_1overH(IncrementLaw::sym_pareto(1.0), 2.0).finite;
  const bool m_grow = moment_1overH(IncrementLaw::sym_pareto(1.0), 0.5).finite;
  const EquivalenceResult eq = equivalence_test(skel(0.5, IncrementLaw::gaussian(1.0), 10, 14), 200, kThreads);
  Line d;
  d << "X_0 = " << s.X[0] << ", periodicity mismatches " << bad_pairs << ", c=1/4 " << to_string(flat.verdict.verdict)
    << " (moment " << (m_flat ? "finite" : "infinite") << "), c=2^-1/2 " << to_string(grow.verdict.verdict)
    << " (moment " << (m_grow ? "finite" : "infinite") << "), equivalence KS " << eq.ks << " p " << eq.p_value;
  const bool ok = s.X[0] == 0.0 && bad_pairs == 0 && flat.verdict.verdict == Growth::Flat && m_flat &&
                  grow.verdict.verdict == Growth::Growing && !m_grow && eq.p_value > 0.01;
  return {ok, d.str()};
}

Verdict engine_oracle() {
  const std::vector<IncrementLaw> ys{IncrementLaw::gaussian(1.0), IncrementLaw::sym_pareto(0.8),
                                     IncrementLaw::uniform(-1, 2), IncrementLaw::two_point(1.5)};
  const std::vector<OffspringLaw> zs{kBinary, OffspringLaw::poisson_shifted(1.2), OffspringLaw::geometric_shifted(0.5),
                                     OffspringLaw::custom({0.3, 0.2, 0.5})};
  std::size_t mismatches = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const SimConfig c = sim(ys[i % 4], zs[(i / 4) % 4], 0.3 + 0.1 * static_cast<double>(i % 17), 4 + static_cast<int>(i % 7),
                            split_seed(15, 0, i));
    const double u = 0.5;
    const double th[] = {u};
    const SimulationResult s = simulate(c, th);
    const auto o = oracle::evaluate(oracle::materialize(c), c.depth, u);
    const auto& e = s.exceedances[0];
    mismatches += s.trajectory.max_signed != o.max_signed || s.trajectory.max_abs != o.max_abs ||
                  s.trajectory.generation_sizes != o.generation_sizes || s.trajectory.survived != o.survived ||
                  e.total_count != o.total_count || e.max_per_ray != o.max_per_ray ||
                  e.witness_depths != o.witness_depths;
  }
  return {mismatches == 0, Line() << "mismatching instances " << mismatches << "/100"};
}

}  // namespace

int main() {
  std::printf("brw %s acceptance, %d thread(s)\n", version(), kThreads);
  criterion(1, "phase dichotomy", phase_dichotomy);
  criterion(2, "critical case", critical_case);
  criterion(3, "exceedance series bound", series_bound);
  criterion(4, "exceedance counts", exceedance_counts);
  criterion(5, "per-ray exceedance tail", ray_tail);
  criterion(6, "admissible partitions", partitions);
  criterion(7, "Bernoulli machinery", bernoulli);
  criterion(8, "RDE", rde);
  criterion(9, "sssi skeleton", sssi);
  criterion(10, "engine oracle", engine_oracle);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
