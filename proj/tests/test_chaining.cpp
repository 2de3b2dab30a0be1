// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>

#include "brw/chaining.hpp"
#include "brw/error.hpp"
#include "brw/series.hpp"
#include "doctest.h"
#include "eight_class_tree.hpp"

using namespace brw;
using fixture::canonical;

namespace {

SimConfig cfg_of(IncrementLaw y, OffspringLaw z, double H, int N, std::uint64_t seed) {
  return SimConfig{std::move(y), std::move(z), H, N, seed};
}

std::vector<SimConfig> admissibility_instances() {
  const std::vector<IncrementLaw> ys{IncrementLaw::sym_pareto(1.0), IncrementLaw::sym_pareto(0.5),
                                     IncrementLaw::gaussian(1.0), IncrementLaw::two_point(1.0)};
  const std::vector<double> Hs{0.5, 1.0, 2.0};
  std::vector<SimConfig> out;
  for (std::uint64_t i = 0; i < 100; ++i)
    out.push_back(cfg_of(ys[i % 4], OffspringLaw::deterministic(2), Hs[(i / 4) % 3], 14, split_seed(6, 0, i)));
  return out;
}

// Child index of every vertex among its siblings (preorder storage).
std::vector<std::uint32_t> sibling_rank(const RaySet& rays) {
  std::vector<std::uint32_t> rank(rays.vertex_count(), 0), seen(rays.vertex_count(), 0);
  for (std::size_t v = 1; v < rays.vertex_count(); ++v)
    rank[v] = seen[static_cast<std::size_t>(rays.parent(static_cast<std::int32_t>(v)))]++;
  return rank;
}

}  // namespace

TEST_CASE("extract_raypoints examples") {
  const RaySet a = extract_raypoints(cfg_of(IncrementLaw::constant(1.0), OffspringLaw::deterministic(2), 1.0, 3, 1));
  CHECK(a.size() == 8);
  for (std::size_t r = 0; r < 8; ++r) {
    const auto c = a.coords(r);
    CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(c[2] == doctest::Approx(0.125).epsilon(1e-15));
  }
  const SimConfig one = cfg_of(IncrementLaw::gaussian(1.0), OffspringLaw::deterministic(3), 0.7, 1, 9);
  const RaySet b = extract_raypoints(one);
  CHECK(b.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(b.coords(r).size() == 1);
    const std::uint32_t idx[] = {static_cast<std::uint32_t>(r)};
    CHECK(b.coords(r)[0] == replay_ray(one, idx)[0]);
  }
  CHECK_THROWS_AS(extract_raypoints(cfg_of(IncrementLaw::constant(1.0), OffspringLaw::deterministic(2), 1.0, 12, 1), 1000),
                  Error);
}

TEST_CASE("ray coordinates replay the streaming tree") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SimConfig c = cfg_of(IncrementLaw::sym_pareto(0.8), OffspringLaw::poisson_shifted(0.8), 1.0, 7, seed);
    const RaySet rays = extract_raypoints(c);
    const auto rank = sibling_rank(rays);
    const SupTrajectory t = dfs_supremum(c);
    CHECK(rays.generation_sizes() == t.generation_sizes);
    double best = -1e300;
    for (std::size_t r = 0; r < rays.size(); r += 7) {
      std::vector<std::uint32_t> idx;
      for (auto v : rays.path(r)) idx.push_back(rank[static_cast<std::size_t>(v)]);
      const auto sums = replay_ray(c, idx);
      double s = 0;
      for (std::size_t i = 0; i < sums.size(); ++i) {
        s += rays.coords(r)[i];
        CHECK(s == sums[i]);
      }
    }
    for (std::size_t r = 0; r < rays.size(); ++r) {
      double s = 0;
      for (double x : rays.coords(r)) s += x;
      best = std::max(best, s);
    }
    CHECK(best == t.max_signed.back());
  }
}

TEST_CASE("decompose") {
  const RaySet small = extract_raypoints(cfg_of(IncrementLaw::uniform(-1, 1), OffspringLaw::deterministic(2), 1.0, 5, 2));
  const Decomposition d = decompose(small);
  CHECK(d.sup_l1_s2 == 0.0);
  for (double x : d.s2) CHECK(x == 0.0);

  const RaySet one = RaySet::from_tree({-1, 0, 1, 0, 3}, {0, 0.2, 3.5, -0.4, 0.9}, 2.0, 1.0);
  CHECK(decompose(one).sup_l1_s2 == 3.5);

  const RaySet heavy = extract_raypoints(cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::deterministic(2), 0.7, 10, 3));
  const Decomposition h = decompose(heavy);
  const auto all = heavy.coord_matrix();
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(h.s1[i] + h.s2[i] == all[i]);
    CHECK(std::abs(h.s1[i]) <= 1.0);
    if (h.s2[i] != 0.0) CHECK(std::abs(h.s2[i]) > 1.0);
  }
}

TEST_CASE("sup of the large part stabilizes in depth") {
  // Same seeds, so the depth-10 tree is a prefix of the depth-16 tree.
  std::vector<double> mean(3, 0.0);
  const int depths[] = {10, 13, 16};
  for (std::uint64_t r = 0; r < 60; ++r)
    for (int j = 0; j < 3; ++j)
      mean[static_cast<std::size_t>(j)] +=
          decompose(extract_raypoints(cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::deterministic(2), 2.0,
                                             depths[j], split_seed(4, 4, r))))
              .sup_l1_s2 /
          60;
  CHECK(mean[2] > 0.0);
  CHECK(std::abs(mean[2] - mean[0]) < 0.05 * mean[2]);
  CHECK(std::abs(mean[2] - mean[1]) < 0.05 * mean[2]);
}

TEST_CASE("chaining depth") {
  CHECK(chaining_depth(2.0, 4) == 4);
  CHECK(chaining_depth(2.0, 3) == 2);
  CHECK(chaining_depth(2.0, 2) == 1);
  CHECK(chaining_depth(3.0, 4) == 2);
  CHECK(chaining_depth(2.0, 5) == 8);
}

TEST_CASE("eight-class tree") {
  const RaySet rays = fixture::eight_class_tree();
  CHECK(rays.size() == 16);
  const AdmissibleSequence seq = build_partitions(rays, 3);
  CHECK(seq.N1 == 0);
  CHECK(seq.N2 == 0);
  CHECK(seq.N3 == 0);
  const PartitionLevel& L = seq.levels[3];
  CHECK(L.h == 2);
  CHECK(L.u_prev == 0.25);
  CHECK(L.cardinality == 8);
  CHECK(canonical(L.class_of) == canonical(fixture::eight_classes));
  CHECK(check_partitions(seq, rays).ok());
}

TEST_CASE("no exceedances leaves a single exceedance class") {
  const RaySet rays =
      extract_raypoints(cfg_of(IncrementLaw::uniform(-0.001, 0.001), OffspringLaw::deterministic(2), 1.0, 8, 1));
  const AdmissibleSequence seq = build_partitions(rays, 3);
  for (const auto& L : seq.levels) {
    std::set<std::uint32_t> cls(L.exceed_class_of.begin(), L.exceed_class_of.end());
    CHECK(cls.size() == 1);
  }
}

TEST_CASE("admissible partitions on random trees") {
  std::size_t active = 0;
  for (const SimConfig& c : admissibility_instances()) {
    const RaySet rays = extract_raypoints(c);
    const AdmissibleSequence seq = build_partitions(rays, 4);
    const PartitionCheck chk = check_partitions(seq, rays);
    INFO("seed ", c.seed, " H ", c.H);
    CHECK(chk.ok());
    CHECK(seq.levels.size() == 5);
    CHECK(seq.levels[0].cardinality == 1);
    active += seq.activation_level() < 4;
  }
  CHECK(active > 50);  // the structural checks were exercised
}

TEST_CASE("the partition checker catches broken partitions") {
  const RaySet rays = extract_raypoints(cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::deterministic(2), 2.0, 10, 8));
  const AdmissibleSequence good = build_partitions(rays, 4);
  REQUIRE(check_partitions(good, rays).ok());
  REQUIRE(good.activation_level() < 4);

  AdmissibleSequence merged = good;  // one class for everything at the last level
  auto& L = merged.levels.back();
  std::fill(L.class_of.begin(), L.class_of.end(), 0u);
  std::fill(L.tree_class_of.begin(), L.tree_class_of.end(), 0u);
  std::fill(L.exceed_class_of.begin(), L.exceed_class_of.end(), 0u);
  L.cardinality = 1;
  const PartitionCheck m = check_partitions(merged, rays);
  CHECK_FALSE(m.common_ancestor);

  AdmissibleSequence crossed = good;  // level 1 no longer refines level 2 upwards
  auto& L1 = crossed.levels[1];
  for (std::size_t r = 0; r < rays.size(); ++r) L1.class_of[r] = static_cast<std::uint32_t>(r % 2);
  L1.cardinality = 2;
  CHECK_FALSE(check_partitions(crossed, rays).nested);

  AdmissibleSequence fat = good;
  fat.levels[1].cardinality = 5;  // > 2^(2^1)
  CHECK_FALSE(check_partitions(fat, rays).admissible);
}

TEST_CASE("too shallow trees are rejected") {
  const RaySet rays = extract_raypoints(cfg_of(IncrementLaw::gaussian(1.0), OffspringLaw::deterministic(2), 1.0, 3, 1));
  try {
    build_partitions(rays, 5);
    FAIL("expected DepthTooShallowForLevel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DepthTooShallowForLevel);
  }
}

TEST_CASE("diameter methods agree") {
  std::size_t classes = 0;
  for (std::uint64_t seed = 0; seed < 10 && classes < 100; ++seed) {
    const RaySet rays =
        extract_raypoints(cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::poisson_shifted(1.0), 1.0, 9, seed));
    const Decomposition dec = decompose(rays);
    for (int k = 0; k < 10; ++k, ++classes) {
      StreamCursor cur(seed, make_digest(k, 77));
      std::vector<std::uint32_t> members;
      const std::size_t size = 1 + cur.next_below(std::min<std::size_t>(200, rays.size()));
      for (std::size_t i = 0; i < size; ++i) members.push_back(static_cast<std::uint32_t>(cur.next_below(rays.size())));
      std::sort(members.begin(), members.end());
      members.erase(std::unique(members.begin(), members.end()), members.end());
      const double a = class_diameter(rays, dec.s1, members, DiameterMethod::Pairwise);
      const double b = class_diameter(rays, dec.s1, members, DiameterMethod::SharedPrefix);
      CHECK(std::abs(a - b) <= 1e-12);
    }
  }
  CHECK(classes >= 100);
}

TEST_CASE("gamma2 examples") {
  const RaySet single = RaySet::from_tree({-1, 0, 1, 2}, {0, 0.5, -0.2, 0.1}, 2.0, 1.0);
  const AdmissibleSequence s1 = build_partitions(single, 2);
  CHECK(gamma2_upper(s1, single, single.coord_matrix()).gamma2_upper == 0.0);

  // Two rays differing only in their first coordinate, by delta.
  const double delta = 0.37;
  const RaySet two = RaySet::from_tree({-1, 0, 1, 2, 0, 4, 5}, {0, 0.1, 0.2, 0.05, 0.1 + delta, 0.2, 0.05}, 2.0, 1.0);
  const AdmissibleSequence s0 = build_partitions(two, 0);
  CHECK(gamma2_upper(s0, two, two.coord_matrix()).gamma2_upper == doctest::Approx(delta).epsilon(1e-15));
  const AdmissibleSequence s2 = build_partitions(two, 2);
  const ChainingReport rep = gamma2_upper(s2, two, two.coord_matrix());
  double brute = 0.0;
  for (const auto& L : s2.levels)
    brute += std::sqrt(std::ldexp(1.0, L.n)) * (L.class_of[0] == L.class_of[1] ? delta : 0.0);
  CHECK(rep.gamma2_upper == doctest::Approx(brute).epsilon(1e-15));
}

TEST_CASE("gamma2 never decreases when rays are added") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RaySet rays = extract_raypoints(cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::deterministic(2), 1.0, 10, seed));
    const AdmissibleSequence seq = build_partitions(rays, 4);
    const Decomposition dec = decompose(rays);
    std::vector<std::uint8_t> mask(rays.size(), 0);
    double prev = 0.0;
    for (std::size_t step = 0; step < rays.size(); step += 97) {
      for (std::size_t r = step; r < std::min(rays.size(), step + 97); ++r) mask[r] = 1;
      const double g = gamma2_upper(seq, rays, dec.s1, DiameterMethod::SharedPrefix, mask).gamma2_upper;
      CHECK(g >= prev);
      prev = g;
    }
    CHECK(prev == doctest::Approx(gamma2_upper(seq, rays, dec.s1).gamma2_upper));
  }
}

TEST_CASE("Bernoulli examples") {
  const RaySet single = RaySet::from_tree({-1, 0, 1}, {0, 0.7, -1.3}, 2.0, 1.0);
  CHECK(std::abs(bernoulli_sup(single, single.coord_matrix(), BernoulliMode::Exhaustive).mean) < 1e-15);
  const RaySet mirror = RaySet::from_tree({-1, 0, 0}, {0, 0.8, -0.8}, 2.0, 1.0);
  CHECK(bernoulli_sup(mirror, mirror.coord_matrix(), BernoulliMode::Exhaustive).mean == doctest::Approx(0.8));
}

TEST_CASE("exhaustive Bernoulli matches brute force") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RaySet rays = extract_raypoints(cfg_of(IncrementLaw::gaussian(1.0), OffspringLaw::poisson_shifted(0.7), 0.5, 6, seed));
    const auto pts = rays.coord_matrix();
    const std::size_t N = 6;
    double total = 0.0;
    for (std::uint64_t s = 0; s < 64; ++s) {
      double best = -1e300;
      for (std::size_t r = 0; r < rays.size(); ++r) {
        double b = 0;
        for (std::size_t i = 0; i < N; ++i) b += ((s >> i) & 1 ? -1.0 : 1.0) * pts[r * N + i];
        best = std::max(best, b);
      }
      total += best;
    }
    CHECK(bernoulli_sup(rays, pts, BernoulliMode::Exhaustive, 0, 0, 3).mean == doctest::Approx(total / 64).epsilon(1e-12));
  }
}

TEST_CASE("exhaustive and Monte Carlo Bernoulli agree") {
  for (std::uint64_t i = 0; i < 5; ++i) {
    const RaySet rays = extract_raypoints(cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::deterministic(2), 1.0, 12, i));
    const MeanSe ex = bernoulli_sup(rays, rays.coord_matrix(), BernoulliMode::Exhaustive);
    const MeanSe mc = bernoulli_sup(rays, rays.coord_matrix(), BernoulliMode::MonteCarlo, 20'000, i);
    CHECK(std::abs(ex.mean - mc.mean) <= 3 * mc.se);
  }
}

TEST_CASE("q prime and event K") {
  CHECK(chaining_q_prime(2.0) == doctest::Approx((0.125 + 2.0) / 2));
  CHECK_THROWS(chaining_q_prime(0.1));
  const SimConfig c = cfg_of(IncrementLaw::sym_pareto(1.0), OffspringLaw::deterministic(2), 2.0, 12, 3);
  const RaySet rays = extract_raypoints(c);
  const AdmissibleSequence seq = build_partitions(rays, 4);
  const double Ks[] = {2, 4, 8, 16};
  const auto ek = event_k_report(seq, rays, compute_P(c.increment, 2.0, 2.0).value, Ks);
  REQUIRE(ek.size() == 4);
  for (std::size_t i = 1; i < 4; ++i)
    if (ek[i - 1].satisfied) CHECK(ek[i].satisfied);  // E_K grows with K
  ChainingReport rep = gamma2_upper(seq, rays, decompose(rays).s1);
  fit_tail_majorant(rep, seq, 2.0);
  CHECK(rep.tail_majorant >= 0.0);
}
