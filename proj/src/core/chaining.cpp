// SPDX-License-Identifier: Apache-2.0
#include "brw/chaining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "brw/error.hpp"
#include "brw/parallel.hpp"
#include "brw/series.hpp"

namespace brw {

void RaySet::index_rays() {
  const std::size_t V = parent_.size();
  vdepth_.assign(V, 0);
  for (std::size_t v = 1; v < V; ++v) {
    const std::int32_t p = parent_[v];
    require(p >= 0 && static_cast<std::size_t>(p) < v, "RaySet: parents must precede children");
    vdepth_[v] = vdepth_[static_cast<std::size_t>(p)] + 1;
  }
  if (depth_ < 0) depth_ = V ? static_cast<int>(*std::max_element(vdepth_.begin(), vdepth_.end())) : 0;
  gen_.assign(static_cast<std::size_t>(depth_) + 1, 0);
  for (std::size_t v = 0; v < V; ++v)
    if (vdepth_[v] <= static_cast<std::uint32_t>(depth_)) ++gen_[vdepth_[v]];

  leaves_.clear();
  if (depth_ == 0) return;
  for (std::size_t v = 0; v < V; ++v)
    if (vdepth_[v] == static_cast<std::uint32_t>(depth_)) leaves_.push_back(static_cast<std::int32_t>(v));
  const auto N = static_cast<std::size_t>(depth_);
  path_.assign(leaves_.size() * N, 0);
  coords_.assign(leaves_.size() * N, 0.0);
  for (std::size_t r = 0; r < leaves_.size(); ++r) {
    std::int32_t v = leaves_[r];
    for (std::size_t i = N; i-- > 0;) {
      path_[r * N + i] = v;
      coords_[r * N + i] = value_[static_cast<std::size_t>(v)];
      v = parent_[static_cast<std::size_t>(v)];
    }
  }
}

RaySet RaySet::from_tree(std::vector<std::int32_t> parent, std::vector<double> value, double m, double H) {
  require(!parent.empty() && parent[0] == -1, "RaySet: vertex 0 must be the root");
  require(parent.size() == value.size(), "RaySet: parent/value size mismatch");
  require(m > 1 && H > 0, "RaySet: need m > 1 and H > 0");
  RaySet s;
  s.parent_ = std::move(parent);
  s.value_ = std::move(value);
  s.value_[0] = 0.0;
  s.m_ = m;
  s.H_ = H;
  s.depth_ = -1;
  s.index_rays();
  return s;
}

RaySet extract_raypoints(const SimConfig& cfg, std::uint64_t coord_budget) {
  cfg.validate();
  const auto N = static_cast<std::size_t>(cfg.depth);
  const DiscountTable disc = discount_table(cfg);
  const IncrementSampler sample(cfg.increment);

  struct Frame {
    VertexKey key;
    std::int32_t id;
    std::uint32_t children, next;
  };
  RaySet s;
  s.m_ = cfg.m();
  s.H_ = cfg.H;
  s.depth_ = cfg.depth;
  s.parent_.push_back(-1);
  s.value_.push_back(0.0);
  std::uint64_t leaves = 0;

  std::vector<Frame> stack(N + 1);
  const VertexKey root = VertexKey::root(cfg.seed);
  stack[0] = {root, 0, cfg.offspring.sample(KeyedStream::at(root)), 0};
  std::size_t d = 0;
  for (;;) {
    Frame& f = stack[d];
    if (d == N || f.next >= f.children) {
      if (d == 0) break;
      --d;
      continue;
    }
    if (s.parent_.size() >= cfg.node_budget)
      fail(ErrorCode::BudgetExceeded, "extract_raypoints: node budget exceeded");
    const VertexKey key = f.key.child(f.next++);
    const KeyedStream ks = KeyedStream::at(key);
    const std::size_t c = d + 1;
    const auto id = static_cast<std::int32_t>(s.parent_.size());
    s.parent_.push_back(f.id);
    s.value_.push_back(disc.factor[c] * sample(ks));
    if (c == N && ++leaves * N > coord_budget)
      fail(ErrorCode::BudgetExceeded, "extract_raypoints: coordinate budget exceeded");
    stack[c] = {key, id, c < N ? cfg.offspring.sample(ks) : 0u, 0};
    d = c;
  }
  s.index_rays();
  return s;
}

Decomposition decompose(const RaySet& rays) {
  Decomposition dec;
  dec.rays = rays.size();
  dec.depth = rays.depth();
  const auto all = rays.coord_matrix();
  dec.s1.assign(all.size(), 0.0);
  dec.s2.assign(all.size(), 0.0);
  for (std::size_t i = 0; i < all.size(); ++i) (std::abs(all[i]) > 1.0 ? dec.s2 : dec.s1)[i] = all[i];
  const auto N = static_cast<std::size_t>(dec.depth);
  for (std::size_t r = 0; r < dec.rays; ++r) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) l1 += std::abs(dec.s2[r * N + i]);
    dec.sup_l1_s2 = std::max(dec.sup_l1_s2, l1);
  }
  return dec;
}

namespace {

// h as a real number, for levels where it exceeds int range.
double chaining_depth_real(double m, int n) {
  const double lm = std::log2(m);
  const double cap = std::ldexp(1.0, n - 2);
  double h = std::floor(cap / lm);
  while ((h + 1) * lm <= cap) h += 1;
  while (h > 0 && h * lm > cap) h -= 1;
  return h;
}

}  // namespace

int chaining_depth(double m, int n) {
  require(m > 1, "chaining_depth: m must be > 1");
  require(n >= 0 && n <= 30, "chaining_depth: n must be in [0, 30]");
  return static_cast<int>(chaining_depth_real(m, n));
}

AdmissibleSequence build_partitions(const RaySet& rays, int n_max) {
  require(n_max >= 0 && n_max <= 6, "build_partitions: n_max must be in [0, 6]");
  const int N = rays.depth();
  const double m = rays.m(), H = rays.H();
  if (chaining_depth(m, n_max) > N)
    fail(ErrorCode::DepthTooShallowForLevel,
         "build_partitions: h(" + std::to_string(n_max) + ") = " + std::to_string(chaining_depth(m, n_max)) +
             " exceeds depth " + std::to_string(N));

  AdmissibleSequence seq;
  const auto& gen = rays.generation_sizes();

  // N1, over observed depths only.
  for (int n = 0;; ++n) {
    const int h = chaining_depth(m, n);
    bool ok = true;
    for (int k = std::max(1, h); k <= N && ok; ++k)
      ok = static_cast<double>(gen[static_cast<std::size_t>(k)]) <= double(k) * k * std::pow(m, k);
    if (ok) {
      seq.N1 = n;
      break;
    }
  }

  // N2: h^2 m^h <= 2^(2^(n-1)), compared in log2.
  auto n2_holds = [&](int n) {
    const double h = chaining_depth_real(m, n);
    if (h == 0) return true;
    return 2 * std::log2(h) + h * std::log2(m) <= std::ldexp(1.0, n - 1);
  };
  seq.N2 = 0;
  for (int n = 40; n >= 0; --n)
    if (!n2_holds(n)) {
      seq.N2 = n + 1;
      break;
    }

  // N3: #{v : |value| > u_n} <= 2^(2^n) - 1 for all larger n. From n = 6
  // on the right side exceeds any vertex count.
  seq.N3 = 0;
  for (int n = 5; n >= 0; --n) {
    const double u = u_threshold(H, n);
    std::uint64_t count = 0;
    for (std::size_t v = 1; v < rays.vertex_count(); ++v) count += std::abs(rays.value(static_cast<std::int32_t>(v))) > u;
    const std::uint64_t cap = (std::uint64_t{1} << (std::uint64_t{1} << n)) - 1;
    if (count > cap) {
      seq.N3 = n + 1;
      break;
    }
  }
  seq.N4 = u_threshold_monotone_from(H);

  const std::size_t R = rays.size();
  const auto Nz = static_cast<std::size_t>(N);
  for (int n = 0; n <= n_max; ++n) {
    PartitionLevel L;
    L.n = n;
    L.h = chaining_depth(m, n);
    L.tree_part_active = n > std::max(seq.N1, seq.N2);
    L.exceed_part_active = n > seq.N3;
    L.u_prev = n >= 1 ? u_threshold(H, n - 1) : std::numeric_limits<double>::infinity();
    L.class_of.resize(R);
    L.tree_class_of.resize(R);
    L.exceed_class_of.resize(R);

    std::unordered_map<std::int32_t, std::uint32_t> tree_ids, exceed_ids;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> prod_ids;
    for (std::size_t r = 0; r < R; ++r) {
      const auto path = rays.path(r);
      const auto x = rays.coords(r);
      const std::int32_t anc = (L.tree_part_active && L.h >= 1) ? path[static_cast<std::size_t>(L.h) - 1] : 0;
      std::int32_t marker = -1;
      if (L.exceed_part_active)
        for (std::size_t i = Nz; i-- > 0;)
          if (std::abs(x[i]) > L.u_prev) {
            marker = path[i];
            break;
          }
      const auto t = tree_ids.try_emplace(anc, static_cast<std::uint32_t>(tree_ids.size())).first->second;
      const auto e = exceed_ids.try_emplace(marker, static_cast<std::uint32_t>(exceed_ids.size())).first->second;
      const auto [it, fresh] = prod_ids.try_emplace({t, e}, static_cast<std::uint32_t>(prod_ids.size()));
      if (fresh) {
        const bool marker_below = marker >= 0 && rays.vertex_depth(marker) > rays.vertex_depth(anc);
        L.class_root.push_back(marker_below ? marker : anc);
      }
      L.tree_class_of[r] = t;
      L.exceed_class_of[r] = e;
      L.class_of[r] = it->second;
    }
    L.cardinality = R ? prod_ids.size() : 1;
    if (L.class_root.empty()) L.class_root.push_back(0);
    seq.levels.push_back(std::move(L));
  }
  return seq;
}

namespace {

// Deepest depth shared by every member's path (0 = root only).
std::size_t class_lca_depth(const RaySet& rays, std::span<const std::uint32_t> members) {
  const auto N = static_cast<std::size_t>(rays.depth());
  if (members.size() < 2) return N;
  const auto first = rays.path(members[0]);
  std::size_t D = N;
  for (std::size_t k = 1; k < members.size() && D > 0; ++k) {
    const auto p = rays.path(members[k]);
    std::size_t c = 0;
    while (c < D && p[c] == first[c]) ++c;
    D = c;
  }
  return D;
}

std::vector<std::vector<std::uint32_t>> group_members(const PartitionLevel& L, std::span<const std::uint8_t> include) {
  std::vector<std::vector<std::uint32_t>> g(L.cardinality);
  for (std::size_t r = 0; r < L.class_of.size(); ++r)
    if (include.empty() || include[r]) g[L.class_of[r]].push_back(static_cast<std::uint32_t>(r));
  return g;
}

}  // namespace

PartitionCheck check_partitions(const AdmissibleSequence& seq, const RaySet& rays) {
  PartitionCheck chk;
  auto flag = [&](bool& field) {
    field = false;
    ++chk.violations;
  };
  const std::size_t R = rays.size();
  const auto N = static_cast<std::size_t>(rays.depth());
  const int act = seq.activation_level();
  for (std::size_t li = 0; li < seq.levels.size(); ++li) {
    const PartitionLevel& L = seq.levels[li];
    if (li == 0 ? L.cardinality != 1 : std::log2(static_cast<double>(L.cardinality)) > std::ldexp(1.0, L.n))
      flag(chk.admissible);

    if (li > 0) {
      const PartitionLevel& P = seq.levels[li - 1];
      std::vector<std::int64_t> up(L.cardinality, -1);
      for (std::size_t r = 0; r < R; ++r) {
        auto& u = up[L.class_of[r]];
        if (u < 0) u = P.class_of[r];
        else if (u != P.class_of[r]) {
          flag(chk.nested);
          break;
        }
      }
    }

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> pair_to_class;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> class_to_pair(L.cardinality, {~0u, ~0u});
    for (std::size_t r = 0; r < R; ++r) {
      const std::pair key{L.tree_class_of[r], L.exceed_class_of[r]};
      const auto [it, fresh] = pair_to_class.try_emplace(key, L.class_of[r]);
      auto& back = class_to_pair[L.class_of[r]];
      if (back.first == ~0u) back = key;
      if (it->second != L.class_of[r] || back != key) {
        flag(chk.product);
        break;
      }
    }

    if (L.n <= act) continue;
    for (const auto& members : group_members(L, {})) {
      if (members.size() < 2) continue;
      const std::size_t D = class_lca_depth(rays, members);
      if (L.h >= 1 && D < static_cast<std::size_t>(L.h)) flag(chk.common_ancestor);
      for (auto r : members) {
        const auto x = rays.coords(r);
        for (std::size_t i = D; i < N; ++i)
          if (std::abs(x[i]) > L.u_prev) {
            flag(chk.differing_within_u);
            break;
          }
      }
    }
  }
  return chk;
}

double class_diameter(const RaySet& rays, std::span<const double> points,
                      std::span<const std::uint32_t> members, DiameterMethod method) {
  const auto N = static_cast<std::size_t>(rays.depth());
  require(points.size() == rays.size() * N, "class_diameter: points must be rays x N");
  const std::size_t k = members.size();
  if (k < 2) return 0.0;
  double best = 0.0;
  if (method == DiameterMethod::Pairwise) {
    for (std::size_t a = 0; a < k; ++a) {
      const double* s = points.data() + members[a] * N;
      for (std::size_t b = a + 1; b < k; ++b) {
        const double* t = points.data() + members[b] * N;
        double d2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) d2 += (s[i] - t[i]) * (s[i] - t[i]);
        best = std::max(best, d2);
      }
    }
    return std::sqrt(best);
  }

  const std::size_t D = class_lca_depth(rays, members);
  // suffix[a * (N + 1) + i] = sum_{j >= i} points_j^2 for member a.
  std::vector<double> suffix(k * (N + 1), 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    const double* s = points.data() + members[a] * N;
    double* out = suffix.data() + a * (N + 1);
    for (std::size_t i = N; i-- > D;) out[i] = out[i + 1] + s[i] * s[i];
  }
  for (std::size_t a = 0; a < k; ++a) {
    const auto ps = rays.path(members[a]);
    const double* s = points.data() + members[a] * N;
    for (std::size_t b = a + 1; b < k; ++b) {
      const auto pt = rays.path(members[b]);
      const double* t = points.data() + members[b] * N;
      std::size_t lca = D;
      while (lca < N && ps[lca] == pt[lca]) ++lca;
      double dot = 0.0;
      for (std::size_t i = lca; i < N; ++i) dot += s[i] * t[i];
      const double d2 = suffix[a * (N + 1) + lca] + suffix[b * (N + 1) + lca] - 2.0 * dot;
      best = std::max(best, d2);
    }
  }
  return std::sqrt(std::max(best, 0.0));
}

ChainingReport gamma2_upper(const AdmissibleSequence& seq, const RaySet& rays, std::span<const double> points,
                            DiameterMethod method, std::span<const std::uint8_t> include) {
  require(include.empty() || include.size() == rays.size(), "gamma2_upper: include mask size mismatch");
  ChainingReport rep;
  double cum = 0.0;
  for (const auto& L : seq.levels) {
    double delta = 0.0;
    std::size_t card = 0;
    for (const auto& members : group_members(L, include)) {
      if (members.empty()) continue;
      ++card;
      delta = std::max(delta, class_diameter(rays, points, members, method));
    }
    cum += std::exp2(0.5 * L.n) * delta;
    rep.level_cardinality.push_back(std::max<std::size_t>(card, 1));
    rep.level_diameter.push_back(delta);
    rep.gamma2_cumulative.push_back(cum);
  }
  rep.gamma2_upper = cum;
  return rep;
}

double chaining_q_prime(double H, double q) {
  require(q > 0 && H > 1.0 / q, "chaining_q_prime: need H > 1/q");
  const double qp = 0.5 * (1.0 / q + H);
  if (!(q * qp > 1.0)) fail(ErrorCode::InternalInconsistency, "chaining_q_prime: q q' <= 1");
  return qp;
}

void fit_tail_majorant(ChainingReport& report, const AdmissibleSequence& seq, double H, double q, int levels) {
  const double qp = chaining_q_prime(H, q);
  auto form = [&](int n) { return std::exp2((qp - H) * std::ldexp(1.0, n - 1) + H * (n - 1)); };
  const int from = std::max({seq.N1, seq.N2, seq.N3, seq.N4});
  double C = 0.0;
  for (std::size_t i = 0; i < report.level_diameter.size(); ++i) {
    const int n = seq.levels[i].n;
    if (n > from && n >= 1 && report.level_diameter[i] > 0) C = std::max(C, report.level_diameter[i] / form(n));
  }
  report.fitted_constant = C;
  report.tail_majorant = 0.0;
  const int last = seq.levels.empty() ? 0 : seq.levels.back().n;
  for (int n = last + 1; n <= last + levels; ++n) report.tail_majorant += std::exp2(0.5 * n) * C * form(n);
}

namespace {

// Vertices lying on surviving rays, in preorder, with per-vertex values.
struct SignForest {
  std::vector<std::int32_t> parent;  // compact index, -1 for depth-1 vertices
  std::vector<std::uint32_t> depth;  // 1-based
  std::vector<double> value;
  std::vector<std::uint8_t> is_leaf;
};

SignForest sign_forest(const RaySet& rays, std::span<const double> points) {
  const auto N = static_cast<std::size_t>(rays.depth());
  require(points.size() == rays.size() * N, "bernoulli_sup: points must be rays x N");
  std::vector<std::int32_t> compact(rays.vertex_count(), -1);
  std::vector<double> val(rays.vertex_count(), 0.0);
  std::vector<std::uint8_t> on(rays.vertex_count(), 0);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto p = rays.path(r);
    for (std::size_t i = 0; i < N; ++i) {
      on[static_cast<std::size_t>(p[i])] = 1;
      val[static_cast<std::size_t>(p[i])] = points[r * N + i];
    }
  }
  SignForest f;
  for (std::size_t v = 1; v < rays.vertex_count(); ++v) {
    if (!on[v]) continue;
    compact[v] = static_cast<std::int32_t>(f.value.size());
    const std::int32_t p = rays.parent(static_cast<std::int32_t>(v));
    f.parent.push_back(p == 0 ? -1 : compact[static_cast<std::size_t>(p)]);
    f.depth.push_back(rays.vertex_depth(static_cast<std::int32_t>(v)));
    f.value.push_back(val[v]);
    f.is_leaf.push_back(rays.vertex_depth(static_cast<std::int32_t>(v)) == N);
  }
  return f;
}

double sup_for_signs(const SignForest& f, std::uint64_t signs, std::vector<double>& acc) {
  acc.resize(f.value.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < f.value.size(); ++v) {
    const double e = (signs >> (f.depth[v] - 1)) & 1 ? -1.0 : 1.0;
    const double a = (f.parent[v] < 0 ? 0.0 : acc[static_cast<std::size_t>(f.parent[v])]) + e * f.value[v];
    acc[v] = a;
    if (f.is_leaf[v]) best = std::max(best, a);
  }
  return best;
}

}  // namespace

MeanSe bernoulli_sup(const RaySet& rays, std::span<const double> points, BernoulliMode mode, std::size_t samples,
                     std::uint64_t seed, int threads) {
  const int N = rays.depth();
  if (rays.size() == 0) return {};
  require(N <= 64, "bernoulli_sup: depth must be <= 64");
  const SignForest f = sign_forest(rays, points);

  if (mode == BernoulliMode::Exhaustive) {
    require(N <= 20, "bernoulli_sup: exhaustive mode needs N <= 20");
    const std::size_t patterns = std::size_t{1} << N;
    const std::size_t blocks = std::min<std::size_t>(patterns, 256);
    const auto partial = parallel_map<double>(blocks, threads, [&](std::size_t b) {
      std::vector<double> acc;
      double s = 0.0;
      for (std::size_t p = b; p < patterns; p += blocks) s += sup_for_signs(f, p, acc);
      return s;
    });
    double total = 0.0;
    for (double s : partial) total += s;
    return {total / static_cast<double>(patterns), 0.0};
  }

  require(samples >= 2, "bernoulli_sup: need at least 2 Monte Carlo samples");
  const std::uint64_t id = hash_name("bernoulli_sup");
  const auto values = parallel_map<double>(samples, threads, [&](std::size_t s) {
    thread_local std::vector<double> acc;
    StreamCursor cur(seed, make_digest(id, s));
    return sup_for_signs(f, cur.next_bits(), acc);
  });
  return mean_se(values);
}

std::vector<EventKCheck> event_k_report(const AdmissibleSequence& seq, const RaySet& rays, double P,
                                        std::span<const double> Ks, double q) {
  require(P > 0 && std::isfinite(P), "event_k_report: P must be finite and > 0");
  const double H = rays.H(), m = rays.m();
  const double qp = chaining_q_prime(H, q);
  const auto N = static_cast<std::size_t>(rays.depth());
  const double log_m_2 = 1.0 / std::log2(m);

  // Ray index range of each vertex subtree (rays are in preorder).
  std::vector<std::uint32_t> lo(rays.vertex_count(), ~0u), hi(rays.vertex_count(), 0);
  lo[0] = 0;
  hi[0] = static_cast<std::uint32_t>(rays.size());
  for (std::size_t r = 0; r < rays.size(); ++r)
    for (auto v : rays.path(r)) {
      lo[static_cast<std::size_t>(v)] = std::min(lo[static_cast<std::size_t>(v)], static_cast<std::uint32_t>(r));
      hi[static_cast<std::size_t>(v)] = static_cast<std::uint32_t>(r + 1);
    }

  std::vector<EventKCheck> out;
  for (double K : Ks) {
    require(K > 0, "event_k_report: K must be > 0");
    EventKCheck chk;
    chk.K = K;
    chk.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& L : seq.levels) {
      if (L.n < seq.activation_level()) continue;
      std::vector<std::int32_t> roots = L.class_root;
      std::sort(roots.begin(), roots.end());
      roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
      for (int j = L.n; j <= 62; ++j) {
        const double bound = 2.0 + (std::ldexp(1.0, j) - j - std::ldexp(1.0, L.n - 2)) * log_m_2 +
                             3.0 * K * P * std::exp2(qp * std::ldexp(1.0, j));
        if (bound > static_cast<double>(N)) {
          chk.worst_margin = std::min(chk.worst_margin, bound - static_cast<double>(N));
          break;
        }
        const double u = u_threshold(H, j);
        for (auto v : roots) {
          const std::size_t from = rays.vertex_depth(v);
          std::uint32_t worst = 0;
          for (std::uint32_t r = lo[static_cast<std::size_t>(v)]; r < hi[static_cast<std::size_t>(v)]; ++r) {
            const auto x = rays.coords(r);
            std::uint32_t c = 0;
            for (std::size_t i = from; i < N; ++i) c += std::abs(x[i]) > u;
            worst = std::max(worst, c);
          }
          const double margin = bound - worst;
          chk.worst_margin = std::min(chk.worst_margin, margin);
          if (margin < 0) chk.satisfied = false;
        }
      }
    }
    out.push_back(chk);
  }
  return out;
}

}  // namespace brw
