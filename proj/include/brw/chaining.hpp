// SPDX-License-Identifier: Apache-2.0
//
// Chaining on realized finite-depth trees: rays as points of l^2, the split
// into small and large coordinates, an admissible sequence of partitions
// built from the tree, the resulting gamma_2 upper bound, and Bernoulli
// suprema with one Rademacher sign per depth shared by all rays.
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "brw/stats.hpp"
#include "brw/tree_sim.hpp"

namespace brw {

/// A materialized truncated tree together with its depth-N rays.
///
/// Vertices are stored in depth-first preorder with the root at index 0.
/// value[v] = m^(-H l(v)) eta_v (0 at the root). Rays are the depth-N
/// vertices in preorder; ray r visits path(r)[i] at depth i + 1 and its
/// point in l^2 has coordinates coords(r)[i] = value[path(r)[i]].
class RaySet {
 public:
  /// Builds from an explicit parent array (parent[0] = -1, parents precede
  /// children) and per-vertex values. Rays are the deepest vertices.
  static RaySet from_tree(std::vector<std::int32_t> parent, std::vector<double> value, double m, double H);

  int depth() const noexcept { return depth_; }
  double m() const noexcept { return m_; }
  double H() const noexcept { return H_; }
  std::size_t size() const noexcept { return leaves_.size(); }
  std::size_t vertex_count() const noexcept { return parent_.size(); }

  std::span<const double> coords(std::size_t ray) const {
    return {coords_.data() + ray * static_cast<std::size_t>(depth_), static_cast<std::size_t>(depth_)};
  }
  std::span<const std::int32_t> path(std::size_t ray) const {
    return {path_.data() + ray * static_cast<std::size_t>(depth_), static_cast<std::size_t>(depth_)};
  }
  /// Row-major rays x N coordinate matrix.
  std::span<const double> coord_matrix() const noexcept { return coords_; }
  std::int32_t leaf(std::size_t ray) const { return leaves_[ray]; }
  std::int32_t parent(std::int32_t v) const { return parent_[static_cast<std::size_t>(v)]; }
  std::uint32_t vertex_depth(std::int32_t v) const { return vdepth_[static_cast<std::size_t>(v)]; }
  double value(std::int32_t v) const { return value_[static_cast<std::size_t>(v)]; }
  /// #V_k for k = 0..N (all vertices, including lineages that die out).
  const std::vector<std::uint64_t>& generation_sizes() const noexcept { return gen_; }

 private:
  friend RaySet extract_raypoints(const SimConfig& cfg, std::uint64_t coord_budget);
  RaySet() = default;
  void index_rays();

  int depth_ = 0;
  double m_ = 2.0, H_ = 1.0;
  std::vector<std::int32_t> parent_;
  std::vector<std::uint32_t> vdepth_;
  std::vector<double> value_;
  std::vector<std::int32_t> leaves_;
  std::vector<std::int32_t> path_;
  std::vector<double> coords_;
  std::vector<std::uint64_t> gen_;
};

/// Replays the keyed tree of `cfg` and materializes it. Throws
/// Error(BudgetExceeded) when rays x N would exceed `coord_budget` or the
/// vertex count would exceed cfg.node_budget.
RaySet extract_raypoints(const SimConfig& cfg, std::uint64_t coord_budget = 10'000'000);

struct Decomposition {
  std::size_t rays = 0;
  int depth = 0;
  std::vector<double> s1;  // entries with |x| <= 1, else 0
  std::vector<double> s2;  // entries with |x| > 1, else 0
  double sup_l1_s2 = 0.0;
};

Decomposition decompose(const RaySet& rays);

/// One level of the admissible sequence.
struct PartitionLevel {
  int n = 0;
  int h = 0;                       // ancestor depth used by the tree part
  bool tree_part_active = false;   // n > max(N1, N2)
  bool exceed_part_active = false; // n > N3
  double u_prev = 0.0;             // u_{n-1}
  std::vector<std::uint32_t> class_of;         // A_n
  std::vector<std::uint32_t> tree_class_of;    // A_n^(1)
  std::vector<std::uint32_t> exceed_class_of;  // A_n^(2)
  std::vector<std::int32_t> class_root;        // C_n, one subtree root per class
  std::size_t cardinality = 0;
};

struct AdmissibleSequence {
  std::vector<PartitionLevel> levels;  // n = 0..n_max
  int N1 = 0, N2 = 0, N3 = 0, N4 = 1;
  /// N1 is certified only over the observed depths 1..N.
  bool n1_certified_to_depth_only = true;

  int activation_level() const noexcept { return std::max({N1, N2, N3}); }
};

/// Largest h >= 0 with m^h <= 2^(2^(n-2)).
int chaining_depth(double m, int n);

/// Builds A_0..A_{n_max}. The exceedance part groups rays by the deepest
/// vertex on the ray with |value| > u_{n-1} (rays without one form the
/// residual class); the tree part groups rays by their ancestor at depth
/// h(n). Throws Error(DepthTooShallowForLevel) if h(n_max) > N.
AdmissibleSequence build_partitions(const RaySet& rays, int n_max = 5);

struct PartitionCheck {
  bool admissible = true;   // #A_0 = 1 and #A_n <= 2^(2^n)
  bool nested = true;
  bool product = true;      // A_n = A_n^(1) x A_n^(2)
  bool common_ancestor = true;
  bool differing_within_u = true;
  std::size_t violations = 0;

  bool ok() const noexcept { return violations == 0; }
};

/// Exact checks of admissibility, nesting, the product structure and, for
/// n > max(N1, N2, N3), the two structural postconditions.
PartitionCheck check_partitions(const AdmissibleSequence& seq, const RaySet& rays);

enum class DiameterMethod { Pairwise, SharedPrefix };

/// l2 diameter of the given rays of `points` (row-major rays x N).
/// Pairwise compares all coordinates; SharedPrefix skips the common path
/// prefix and uses |s - t|^2 = |s|^2 + |t|^2 - 2<s, t> on the suffix.
double class_diameter(const RaySet& rays, std::span<const double> points,
                      std::span<const std::uint32_t> members, DiameterMethod method);

struct ChainingReport {
  std::vector<std::size_t> level_cardinality;
  std::vector<double> level_diameter;      // Delta_n = max class diameter
  std::vector<double> gamma2_cumulative;   // sum_{l<=n} 2^(l/2) Delta_l
  double gamma2_upper = 0.0;
  /// Reported majorant for levels beyond n_max (never asserted).
  double fitted_constant = 0.0;
  double tail_majorant = 0.0;
  double sup_l1_s2 = 0.0;
  MeanSe bernoulli;
};

/// gamma_2 upper bound sum_n 2^(n/2) Delta_n over the built levels.
/// `include`, when nonempty, restricts to rays with include[r] != 0.
ChainingReport gamma2_upper(const AdmissibleSequence& seq, const RaySet& rays,
                            std::span<const double> points,
                            DiameterMethod method = DiameterMethod::SharedPrefix,
                            std::span<const std::uint8_t> include = {});

/// q' = midpoint of (1/q, H); requires q q' > 1.
double chaining_q_prime(double H, double q = 8.0);

/// Fits C so that C 2^((q'-H) 2^(n-1)) 2^(H(n-1)) dominates the observed
/// Delta_n and sums the majorant over the next `levels` levels.
void fit_tail_majorant(ChainingReport& report, const AdmissibleSequence& seq, double H,
                       double q = 8.0, int levels = 20);

enum class BernoulliMode { Exhaustive, MonteCarlo };

/// b(S) = E sup_t sum_i eps_i points_i(t), one sign per depth shared by all
/// rays. Exhaustive averages all 2^N sign vectors (N <= 20).
MeanSe bernoulli_sup(const RaySet& rays, std::span<const double> points, BernoulliMode mode,
                     std::size_t samples = 100'000, std::uint64_t seed = 0, int threads = 1);

struct EventKCheck {
  double K = 0.0;
  bool satisfied = true;
  /// min over checked (n, j, v) of bound - count (negative when violated).
  double worst_margin = 0.0;
};

/// Whether the realized tree satisfies the bad-event complement E_K for
/// each K, over levels max(N1,N2,N3) <= n <= n_max.
std::vector<EventKCheck> event_k_report(const AdmissibleSequence& seq, const RaySet& rays, double P,
                                        std::span<const double> Ks, double q = 8.0);

}  // namespace brw
