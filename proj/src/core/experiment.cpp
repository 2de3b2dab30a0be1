// SPDX-License-Identifier: Apache-2.0
#include "brw/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "brw/chaining.hpp"
#include "brw/error.hpp"
#include "brw/parallel.hpp"
#include "brw/rde.hpp"
#include "brw/sssi.hpp"
#include "brw/tree_sim.hpp"

namespace brw {

using json = nlohmann::ordered_json;

const char* version() noexcept { return "0.1.0"; }

const char* to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Phase: return "phase";
    case ExperimentKind::Lemmas: return "lemmas";
    case ExperimentKind::Exceedance: return "exceedance";
    case ExperimentKind::Chain: return "chain";
    case ExperimentKind::Rde: return "rde";
    case ExperimentKind::Sssi: return "sssi";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::Simulate, ExperimentKind::Phase, ExperimentKind::Lemmas, ExperimentKind::Exceedance,
                 ExperimentKind::Chain, ExperimentKind::Rde, ExperimentKind::Sssi})
    if (name == to_string(k)) return k;
  fail(ErrorCode::ConfigError, "config: unknown experiment kind '" + name + "'");
}

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::ConfigError, "config: " + where + ": " + what);
}

// Object reader that remembers which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_error(where_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return req<T>(key);
  }

  template <class T>
  T req(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) config_error(where_, "missing key '" + key + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      config_error(where_ + "." + key, e.what());
    }
  }

  const json& sub(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) config_error(where_, "missing key '" + key + "'");
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) config_error(where_, "unknown key '" + it.key() + "'");
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap_invalid(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) config_error(where, e.what());
    throw;
  }
}

IncrementLaw parse_increment(const json& j, const std::string& where) {
  Reader r(j, where);
  const auto kind = r.req<std::string>("kind");
  IncrementLaw law = wrap_invalid(where, [&]() -> IncrementLaw {
    if (kind == "constant") return IncrementLaw::constant(r.req<double>("a"));
    if (kind == "uniform") return IncrementLaw::uniform(r.req<double>("lo"), r.req<double>("hi"));
    if (kind == "gaussian") return IncrementLaw::gaussian(r.req<double>("sigma"));
    if (kind == "pareto") return IncrementLaw::pareto(r.req<double>("theta"), r.get("xmin", 1.0));
    if (kind == "sym_pareto") return IncrementLaw::sym_pareto(r.req<double>("theta"), r.get("xmin", 1.0));
    if (kind == "log_pareto")
      return IncrementLaw::log_pareto(r.req<double>("h0"), r.req<double>("beta"),
                                      r.get("xmin", std::numbers::e * std::numbers::e));
    if (kind == "two_point") return IncrementLaw::two_point(r.req<double>("a"));
    config_error(where, "unknown increment kind '" + kind + "'");
  });
  r.finish();
  return law;
}

OffspringLaw parse_offspring(const json& j, const std::string& where) {
  Reader r(j, where);
  const auto kind = r.req<std::string>("kind");
  OffspringLaw law = wrap_invalid(where, [&]() -> OffspringLaw {
    if (kind == "deterministic") return OffspringLaw::deterministic(r.req<int>("m"));
    if (kind == "poisson_shifted") return OffspringLaw::poisson_shifted(r.req<double>("lambda"));
    if (kind == "geometric_shifted") return OffspringLaw::geometric_shifted(r.req<double>("p"));
    if (kind == "custom") return OffspringLaw::custom(r.req<std::vector<double>>("probs"));
    config_error(where, "unknown offspring kind '" + kind + "'");
  });
  r.finish();
  return law;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("config: invalid JSON: ") + e.what());
  }
}

double theta_or_beta(const IncrementLaw& law) {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (requires { p.theta; }) return p.theta;
        else if constexpr (std::is_same_v<T, law::LogPareto>) return p.beta;
        else return std::numeric_limits<double>::quiet_NaN();
      },
      law.variant());
}

// CSV text with RFC 4180 quoting and round-trip number formatting.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) {
    bool first = true;
    for (const auto& h : header) {
      if (!first) out_ << ',';
      first = false;
      field(h);
    }
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((cell(values, first)), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  void field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
      out_ << s;
      return;
    }
    out_ << '"';
    for (char ch : s) out_ << (ch == '"' ? "\"\"" : std::string(1, ch));
    out_ << '"';
  }

  template <class T>
  void cell(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_same_v<T, bool>) {
      out_ << (v ? "true" : "false");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (std::isnan(v)) return;
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
      out_ << buf;
    } else if constexpr (std::is_integral_v<T>) {
      out_ << v;
    } else {
      field(std::string(v));
    }
  }

  std::ostringstream out_;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json series_json(const SeriesResult& s) {
  return {{"finite", s.finite},
          {"value", s.finite ? num(s.value) : json(nullptr)},
          {"truncation_k", s.truncation_k},
          {"tail_bound", num(s.tail_bound)},
          {"divergence_evidence", to_string(s.evidence)}};
}

struct Config {
  json raw;
  std::optional<ExperimentKind> kind;
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t replicas = 32;
  IncrementLaw increment = IncrementLaw::sym_pareto(1.0);
  OffspringLaw offspring = OffspringLaw::deterministic(2);
  double H = 2.0;
  int depth = 12;
  std::uint64_t node_budget = 200'000'000;
  GrowthThresholds thresholds;

  std::vector<double> phase_H;
  std::vector<IncrementLaw> phase_laws;

  int u_points = 20;
  double u_min = 1e-6;
  std::vector<int> levels{2, 3};

  double ex_u = 1.0;
  std::vector<double> ex_r{3, 5, 8};

  int n_max = 5;
  std::size_t instances = 1;
  bool exhaustive = true;
  std::size_t bern_samples = 100'000;
  std::vector<double> Ks{2, 4, 8, 16};
  bool dump_partitions = false;
  std::optional<std::pair<std::vector<std::int32_t>, std::vector<double>>> tree;

  std::optional<double> c;
  FixpointOptions fp;
  std::size_t mc_samples = 1'000'000;
  int fie_points = 19;
  std::size_t compare_replicas = 0;

  int p = 2;
  double sssi_c = 0.25;
  int K_min = 8, K_max = 14;
  int eq_K = 10;
  std::size_t eq_replicas = 0;
};

Config parse_config(const json& j) {
  Config c;
  c.raw = j;
  Reader r(j, "root");
  if (r.has("kind")) c.kind = parse_kind(r.req<std::string>("kind"));
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  c.threads = r.get("threads", c.threads);
  c.replicas = r.get<std::size_t>("replicas", c.replicas);
  if (r.has("increment")) c.increment = parse_increment(r.sub("increment"), "increment");
  if (r.has("offspring")) c.offspring = parse_offspring(r.sub("offspring"), "offspring");
  c.H = r.get("H", c.H);
  c.depth = r.get("depth", c.depth);
  c.node_budget = r.get<std::uint64_t>("node_budget", c.node_budget);
  if (c.threads < 1) config_error("root", "threads must be >= 1");
  if (c.replicas < 1) config_error("root", "replicas must be >= 1");
  if (!(c.H > 0)) config_error("root", "H must be > 0");
  if (c.depth < 1) config_error("root", "depth must be >= 1");
  if (c.node_budget < 1) config_error("root", "node_budget must be >= 1");

  if (r.has("classifier")) {
    Reader s(r.sub("classifier"), "classifier");
    c.thresholds.flat_threshold = s.get("flat_threshold", c.thresholds.flat_threshold);
    c.thresholds.grow_threshold = s.get("grow_threshold", c.thresholds.grow_threshold);
    c.thresholds.bootstrap = s.get("bootstrap", c.thresholds.bootstrap);
    c.thresholds.ci_level = s.get("ci_level", c.thresholds.ci_level);
    s.finish();
    if (!(c.thresholds.flat_threshold <= c.thresholds.grow_threshold))
      config_error("classifier", "flat_threshold must be <= grow_threshold");
  }
  if (r.has("phase")) {
    Reader s(r.sub("phase"), "phase");
    c.phase_H = s.get("H", std::vector<double>{});
    if (s.has("increments")) {
      const json& arr = s.sub("increments");
      if (!arr.is_array()) config_error("phase.increments", "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i)
        c.phase_laws.push_back(parse_increment(arr[i], "phase.increments[" + std::to_string(i) + "]"));
    }
    s.finish();
    for (double h : c.phase_H)
      if (!(h > 0)) config_error("phase.H", "every H must be > 0");
  }
  if (r.has("lemmas")) {
    Reader s(r.sub("lemmas"), "lemmas");
    c.u_points = s.get("u_points", c.u_points);
    c.u_min = s.get("u_min", c.u_min);
    c.levels = s.get("levels", c.levels);
    s.finish();
    if (c.u_points < 2 || !(c.u_min > 0 && c.u_min < 1)) config_error("lemmas", "need u_points >= 2, u_min in (0,1)");
    for (int n : c.levels)
      if (n < 0 || n > 62) config_error("lemmas.levels", "levels must be in [0, 62]");
  }
  if (r.has("exceedance")) {
    Reader s(r.sub("exceedance"), "exceedance");
    c.ex_u = s.get("u", c.ex_u);
    c.ex_r = s.get("r", c.ex_r);
    s.finish();
    if (!(c.ex_u > 0)) config_error("exceedance.u", "must be > 0");
    for (double v : c.ex_r)
      if (!(v > 0)) config_error("exceedance.r", "values must be > 0");
  }
  if (r.has("chain")) {
    Reader s(r.sub("chain"), "chain");
    c.n_max = s.get("n_max", c.n_max);
    c.instances = s.get<std::size_t>("instances", c.instances);
    const auto mode = s.get<std::string>("bernoulli", "exhaustive");
    if (mode != "exhaustive" && mode != "monte_carlo")
      config_error("chain.bernoulli", "expected 'exhaustive' or 'monte_carlo'");
    c.exhaustive = mode == "exhaustive";
    c.bern_samples = s.get<std::size_t>("samples", c.bern_samples);
    c.Ks = s.get("K", c.Ks);
    c.dump_partitions = s.get("dump_partitions", c.dump_partitions);
    if (s.has("tree")) {
      Reader t(s.sub("tree"), "chain.tree");
      c.tree.emplace(t.req<std::vector<std::int32_t>>("parent"), t.req<std::vector<double>>("value"));
      t.finish();
    }
    s.finish();
    if (c.n_max < 0 || c.n_max > 6) config_error("chain.n_max", "must be in [0, 6]");
    if (c.instances < 1) config_error("chain.instances", "must be >= 1");
  }
  if (r.has("rde")) {
    Reader s(r.sub("rde"), "rde");
    if (s.has("c")) c.c = s.req<double>("c");
    c.fp.pool_size = s.get<std::size_t>("pool_size", c.fp.pool_size);
    c.fp.max_iters = s.get("max_iters", c.fp.max_iters);
    c.fp.ks_tol = s.get("ks_tol", c.fp.ks_tol);
    c.fp.init = s.get("init", c.fp.init);
    c.mc_samples = s.get<std::size_t>("mc_samples", c.mc_samples);
    c.fie_points = s.get("fie_points", c.fie_points);
    c.compare_replicas = s.get<std::size_t>("compare_replicas", c.compare_replicas);
    s.finish();
    if (c.c && !(*c.c > 0 && *c.c < 1)) config_error("rde.c", "must be in (0, 1)");
  }
  if (r.has("sssi")) {
    Reader s(r.sub("sssi"), "sssi");
    c.p = s.get("p", c.p);
    c.sssi_c = s.get("c", c.sssi_c);
    c.K_min = s.get("K_min", c.K_min);
    c.K_max = s.get("K_max", c.K_max);
    c.eq_K = s.get("equivalence_K", c.eq_K);
    c.eq_replicas = s.get<std::size_t>("equivalence_replicas", c.eq_replicas);
    s.finish();
  }
  r.finish();
  return c;
}

struct RunContext {
  std::filesystem::path out;
  std::vector<std::string> files;
  bool budget = false;

  void write(const std::string& name, const std::string& body) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) fail(ErrorCode::ConfigError, "cannot write " + (out / name).string());
    f << body;
    files.push_back(name);
  }
};

SimConfig sim_config(const Config& c) {
  SimConfig s{c.increment, c.offspring, c.H, c.depth, c.seed, c.node_budget};
  wrap_invalid("root", [&] {
    s.validate();
    return 0;
  });
  return s;
}

json run_simulate(const Config& c, RunContext& ctx) {
  const SimConfig base = sim_config(c);
  const std::uint64_t id = hash_name("simulate");
  const auto runs = parallel_map<SupTrajectory>(c.replicas, c.threads, [&](std::size_t r) {
    return dfs_supremum(base.with_seed(split_seed(c.seed, id, r)));
  });
  Csv csv({"replica", "depth", "generation_size", "W", "max_signed", "max_abs"});
  std::size_t survived = 0, truncated = 0;
  std::uint64_t nodes = 0;
  const double m = base.m();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& t = runs[r];
    survived += t.survived;
    truncated += t.truncated;
    nodes += t.nodes_visited;
    for (std::size_t k = 0; k < t.generation_sizes.size(); ++k)
      csv.row(r, k, t.generation_sizes[k], static_cast<double>(t.generation_sizes[k]) / std::pow(m, double(k)),
              t.max_signed[k], t.max_abs[k]);
  }
  ctx.write("simulate.csv", csv.str());
  ctx.budget = truncated > 0;
  return {{"replicas", c.replicas},
          {"survived", survived},
          {"truncated", truncated},
          {"nodes_visited", nodes},
          {"underflow_depth", runs.empty() ? -1 : runs[0].underflow_depth},
          {"classifier", to_string(classify_boundedness(c.increment, c.offspring, c.H))}};
}

json run_phase(const Config& c, RunContext& ctx) {
  std::vector<PhaseCell> cells;
  const auto Hs = c.phase_H.empty() ? std::vector<double>{c.H} : c.phase_H;
  const auto laws = c.phase_laws.empty() ? std::vector<IncrementLaw>{c.increment} : c.phase_laws;
  for (const auto& law : laws)
    for (double H : Hs) cells.push_back({H, law});
  PhaseScanOptions o;
  o.offspring = c.offspring;
  o.depth = c.depth;
  o.replicas = c.replicas;
  o.seed = c.seed;
  o.node_budget = c.node_budget;
  o.thresholds = c.thresholds;
  o.threads = c.threads;
  const auto results = phase_scan(cells, o);

  Csv phase({"H", "theta_or_beta", "depth", "median_max_abs", "replicas"});
  Csv verdicts({"H", "params", "slope", "ci_lo", "ci_hi", "verdict", "classifier"});
  std::map<std::string, std::map<std::string, int>> confusion;
  int hard = 0;
  json cells_json = json::array();
  for (const auto& res : results) {
    for (std::size_t k = 0; k < res.median_max_abs.size(); ++k)
      phase.row(res.H, res.theta_or_beta, k, res.median_max_abs[k], res.replicas);
    verdicts.row(res.H, res.params, res.verdict.slope, res.verdict.slope_ci.lo, res.verdict.slope_ci.hi,
                 to_string(res.verdict.verdict), to_string(res.classifier));
    ++confusion[to_string(res.verdict.verdict)][to_string(res.classifier)];
    hard += res.hard_disagreement();
    ctx.budget |= res.budget_exceeded;
    cells_json.push_back({{"H", res.H},
                          {"params", res.params},
                          {"slope", num(res.verdict.slope)},
                          {"verdict", to_string(res.verdict.verdict)},
                          {"classifier", to_string(res.classifier)},
                          {"budget_exceeded", res.budget_exceeded}});
  }
  ctx.write("phase.csv", phase.str());
  ctx.write("verdicts.csv", verdicts.str());
  return {{"replicas", c.replicas},
          {"depth", c.depth},
          {"regression_window", {c.depth / 2, c.depth}},
          {"cells", cells_json},
          {"confusion", confusion},
          {"hard_disagreements", hard}};
}

json run_lemmas(const Config& c, RunContext& ctx) {
  const SimConfig base = sim_config(c);
  const double m = base.m();
  const SeriesResult P = compute_P(c.increment, m, c.H);
  json rep = {{"P", series_json(P)}, {"m", m}, {"H", c.H}};
  const bool usable = P.finite && P.value > 0;
  const double C = usable ? c_constant(m, P.value) : std::numeric_limits<double>::quiet_NaN();
  const double C0 = usable ? c_constant_with_origin(m, P.value) : std::numeric_limits<double>::quiet_NaN();
  rep["C_mP"] = num(C);
  rep["C_with_origin"] = num(C0);

  Csv lem({"u", "series_value", "bound", "pass", "bound_with_origin", "pass_with_origin"});
  int violations = 0, violations0 = 0, rows = 0;
  if (usable) {
    for (int i = 0; i < c.u_points; ++i) {
      const double u = std::exp(std::log(c.u_min) * (1.0 - static_cast<double>(i) / (c.u_points - 1)));
      const SeriesResult e = expected_exceedance(c.increment, m, c.H, u);
      const double bound = C * std::pow(u, -1.0 / c.H), bound0 = C0 * std::pow(u, -1.0 / c.H);
      const bool pass = e.finite && e.value <= bound, pass0 = e.finite && e.value <= bound0;
      violations += !pass;
      violations0 += !pass0;
      ++rows;
      lem.row(u, e.value, bound, pass, bound0, pass0);
    }
  }
  ctx.write("lemmas.csv", lem.str());
  rep["grid_rows"] = rows;
  rep["grid_violations"] = violations;
  rep["grid_violations_with_origin"] = violations0;

  Csv counts({"n", "u", "mc_mean", "mc_se", "expected", "bound", "within_4se", "below_bound"});
  json levels = json::array();
  std::vector<double> th;
  for (int n : c.levels) th.push_back(u_threshold(c.H, n));
  const std::uint64_t id = hash_name("lemmas");
  const auto runs = parallel_map<std::vector<std::uint64_t>>(c.replicas, c.threads, [&](std::size_t r) {
    const SimulationResult s = simulate(base.with_seed(split_seed(c.seed, id, r)), th);
    std::vector<std::uint64_t> out;
    for (const auto& e : s.exceedances) out.push_back(e.total_count);
    if (s.trajectory.truncated) out.push_back(~std::uint64_t{0});
    return out;
  });
  for (const auto& run : runs) ctx.budget |= run.size() > th.size();
  for (std::size_t i = 0; i < th.size(); ++i) {
    std::vector<double> xs;
    for (const auto& run : runs) xs.push_back(static_cast<double>(run[i]));
    const MeanSe ms = mean_se(xs);
    SeriesOptions so;
    so.max_depth = c.depth;
    const SeriesResult e = expected_exceedance(c.increment, m, c.H, th[i], so);
    const double bound = usable ? C * std::exp2(std::ldexp(1.0, c.levels[i]) - c.levels[i])
                                : std::numeric_limits<double>::infinity();
    const bool within = std::abs(ms.mean - e.value) <= 4 * ms.se + 1e-12;
    const bool below = ms.mean <= bound;
    counts.row(c.levels[i], th[i], ms.mean, ms.se, e.value, bound, within, below);
    levels.push_back({{"n", c.levels[i]},
                      {"u", th[i]},
                      {"mc_mean", ms.mean},
                      {"mc_se", ms.se},
                      {"expected", e.value},
                      {"bound", num(bound)},
                      {"within_4se", within},
                      {"below_bound", below}});
  }
  ctx.write("exceedance_counts.csv", counts.str());
  rep["exceedance_counts"] = levels;
  rep["replicas"] = c.replicas;
  rep["depth"] = c.depth;
  return rep;
}

json run_exceedance(const Config& c, RunContext& ctx) {
  const SimConfig base = sim_config(c);
  const RayTailReport rep = max_ray_exceedance_tail(base, c.ex_u, c.ex_r, c.replicas, c.threads);
  ctx.budget |= rep.any_truncated;
  Csv csv({"r", "successes", "replicas", "p_hat", "ci_lo", "ci_hi", "bound", "pass"});
  json pts = json::array();
  for (const auto& p : rep.points) {
    const bool pass = p.ci.hi <= p.bound;
    csv.row(p.r, p.successes, p.replicas, p.p_hat, p.ci.lo, p.ci.hi, p.bound, pass);
    pts.push_back({{"r", p.r}, {"p_hat", p.p_hat}, {"ci_hi", p.ci.hi}, {"bound", num(p.bound)}, {"pass", pass}});
  }
  ctx.write("ray_tail.csv", csv.str());
  return {{"u", rep.u}, {"alpha", rep.alpha}, {"P_u", num(rep.P)}, {"replicas", c.replicas}, {"points", pts}};
}

json run_chain(const Config& c, RunContext& ctx) {
  const SimConfig base = sim_config(c);
  const std::uint64_t id = hash_name("chain");
  std::optional<double> P;
  if (const SeriesResult s = compute_P(c.increment, base.m(), c.H); s.finite && s.value > 0) P = s.value;

  Csv chain({"instance", "level", "cardinality", "diameter", "gamma2_cum"});
  Csv inst({"instance", "rays", "N1", "N2", "N3", "N4", "checks_ok", "gamma2_upper", "tail_majorant",
            "sup_l1_s2", "bernoulli", "bernoulli_se", "ratio"});
  Csv parts({"instance", "ray_id", "level", "class_id"});
  Csv ek({"instance", "K", "satisfied", "worst_margin"});
  const std::size_t count = c.tree ? 1 : c.instances;
  double max_ratio = 0.0;
  std::size_t violations = 0;
  json per = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const RaySet rays = c.tree ? RaySet::from_tree(c.tree->first, c.tree->second, base.m(), c.H)
                               : extract_raypoints(base.with_seed(split_seed(c.seed, id, i)));
    const AdmissibleSequence seq = build_partitions(rays, c.n_max);
    const PartitionCheck chk = check_partitions(seq, rays);
    violations += chk.violations;
    const Decomposition dec = decompose(rays);
    ChainingReport rep = gamma2_upper(seq, rays, dec.s1);
    if (c.H > 1.0 / 8) fit_tail_majorant(rep, seq, c.H);
    rep.sup_l1_s2 = dec.sup_l1_s2;
    const bool exhaustive = c.exhaustive && rays.depth() <= 20;
    rep.bernoulli = bernoulli_sup(rays, rays.coord_matrix(), exhaustive ? BernoulliMode::Exhaustive
                                                                        : BernoulliMode::MonteCarlo,
                                  c.bern_samples, split_seed(c.seed, hash_name("chain/bernoulli"), i), c.threads);
    const double denom = rep.gamma2_upper + rep.sup_l1_s2;
    const double ratio = denom > 0 ? rep.bernoulli.mean / denom : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(ratio)) max_ratio = std::max(max_ratio, ratio);

    for (std::size_t l = 0; l < seq.levels.size(); ++l)
      chain.row(i, seq.levels[l].n, rep.level_cardinality[l], rep.level_diameter[l], rep.gamma2_cumulative[l]);
    inst.row(i, rays.size(), seq.N1, seq.N2, seq.N3, seq.N4, chk.ok(), rep.gamma2_upper, rep.tail_majorant,
             rep.sup_l1_s2, rep.bernoulli.mean, rep.bernoulli.se, ratio);
    if (c.dump_partitions)
      for (const auto& L : seq.levels)
        for (std::size_t r = 0; r < rays.size(); ++r) parts.row(i, r, L.n, L.class_of[r]);
    json ek_json = json::array();
    if (P && c.H > 1.0 / 8)
      for (const auto& e : event_k_report(seq, rays, *P, c.Ks)) {
        ek.row(i, e.K, e.satisfied, e.worst_margin);
        ek_json.push_back({{"K", e.K}, {"satisfied", e.satisfied}, {"worst_margin", num(e.worst_margin)}});
      }
    per.push_back({{"rays", rays.size()},
                   {"N1", seq.N1},
                   {"N2", seq.N2},
                   {"N3", seq.N3},
                   {"N4", seq.N4},
                   {"n1_certified_to_depth_only", seq.n1_certified_to_depth_only},
                   {"admissible", chk.admissible},
                   {"nested", chk.nested},
                   {"product", chk.product},
                   {"common_ancestor", chk.common_ancestor},
                   {"differing_within_u", chk.differing_within_u},
                   {"gamma2_upper", rep.gamma2_upper},
                   {"fitted_constant", num(rep.fitted_constant)},
                   {"tail_majorant", num(rep.tail_majorant)},
                   {"sup_l1_s2", rep.sup_l1_s2},
                   {"bernoulli", {{"mean", rep.bernoulli.mean}, {"se", rep.bernoulli.se}}},
                   {"ratio", num(ratio)},
                   {"event_k", ek_json}});
  }
  ctx.write("chain.csv", chain.str());
  ctx.write("chain_instances.csv", inst.str());
  if (P && c.H > 1.0 / 8) ctx.write("event_k.csv", ek.str());
  if (c.dump_partitions) ctx.write("partitions.csv", parts.str());
  return {{"instances", per},
          {"n_max", c.n_max},
          {"q", 8},
          {"partition_violations", violations},
          {"max_ratio", max_ratio},
          {"bernoulli_mode", c.exhaustive ? "exhaustive" : "monte_carlo"}};
}

json run_rde(const Config& c, RunContext& ctx) {
  const double m = c.offspring.mean();
  const double cc = c.c ? *c.c : std::pow(m, -c.H);
  FixpointOptions o = c.fp;
  o.seed = c.seed;
  const FixedPointReport rep = wrap_invalid("rde", [&] { return iterate_to_fixpoint(c.increment, c.offspring, cc, o); });

  Csv it({"iter", "ks_gap", "median"});
  for (int k = 1; k <= rep.iterations; ++k)
    it.row(k, rep.ks_trajectory[static_cast<std::size_t>(k)], rep.median_trajectory[static_cast<std::size_t>(k)]);
  ctx.write("rde.csv", it.str());
  Csv pool({"x"});
  for (double x : rep.cdf.values()) pool.row(x);
  ctx.write("rde_pool.csv", pool.str());

  json out = {{"status", to_string(rep.status)},
              {"iterations", rep.iterations},
              {"ks_gap", num(rep.ks_gap)},
              {"pool_size", rep.pool_size},
              {"c", rep.c},
              {"m", rep.m},
              {"H", rep.H},
              {"median", num(rep.median_trajectory.back())},
              {"initial_value", o.init}};
  if (rep.status == FixpointStatus::Converged && c.increment.nonnegative()) {
    const auto grid = quantile_grid(rep.cdf, c.fie_points);
    const FieResidual fie = fie_residual(rep.cdf, c.increment, c.offspring, cc, grid, c.mc_samples,
                                         split_seed(c.seed, hash_name("rde/fie"), 0));
    Csv f({"x", "residual", "se"});
    for (std::size_t i = 0; i < fie.x.size(); ++i) f.row(fie.x[i], fie.residual[i], fie.se[i]);
    ctx.write("fie.csv", f.str());
    out["fie_max_residual"] = fie.max_abs;
    if (c.compare_replicas > 0) {
      SimConfig sc{c.increment, c.offspring, rep.H, c.depth, c.seed, c.node_budget};
      const SimulationComparison cmp = compare_to_simulation(rep, sc, c.compare_replicas, c.threads);
      ctx.budget |= cmp.any_truncated;
      out["simulation"] = {{"depth", c.depth},
                           {"replicas", c.compare_replicas},
                           {"ks", cmp.ks},
                           {"p_value", cmp.p_value}};
    }
  }
  return out;
}

json run_sssi(const Config& c, RunContext& ctx) {
  SkeletonConfig sk{c.p, c.sssi_c, c.increment, c.K_max, c.seed};
  wrap_invalid("sssi", [&] {
    sk.validate();
    return 0;
  });
  const SkeletonScan scan = wrap_invalid(
      "sssi", [&] { return boundedness_scan(sk, c.K_min, c.K_max, c.replicas, c.thresholds, c.threads); });
  Csv csv({"K", "replica", "max_abs"});
  for (std::size_t k = 0; k < scan.K.size(); ++k)
    for (std::size_t r = 0; r < scan.max_abs.size(); ++r) csv.row(scan.K[k], r, scan.max_abs[r][k]);
  ctx.write("sssi.csv", csv.str());
  const MomentResult mom = moment_1overH(c.increment, sk.H());
  json out = {{"p", c.p},
              {"c", c.sssi_c},
              {"H", sk.H()},
              {"K_range", {c.K_min, c.K_max}},
              {"replicas", c.replicas},
              {"slope", num(scan.verdict.slope)},
              {"slope_ci", {num(scan.verdict.slope_ci.lo), num(scan.verdict.slope_ci.hi)}},
              {"verdict", to_string(scan.verdict.verdict)},
              {"moment_finite", mom.finite},
              {"tail_majorant", num(scan.tail_majorant)}};
  if (c.eq_replicas > 0) {
    SkeletonConfig eq = sk;
    eq.K = c.eq_K;
    const EquivalenceResult e = equivalence_test(eq, c.eq_replicas, c.threads);
    out["equivalence"] = {{"K", c.eq_K}, {"replicas", c.eq_replicas}, {"ks", e.ks}, {"p_value", e.p_value}};
  }
  return out;
}

}  // namespace

IncrementLaw increment_from_json(const std::string& text) { return parse_increment(parse_text(text), "increment"); }
OffspringLaw offspring_from_json(const std::string& text) { return parse_offspring(parse_text(text), "offspring"); }

bool PhaseCellResult::hard_disagreement() const noexcept {
  return (verdict.verdict == Growth::Flat && classifier == Boundedness::Unbounded) ||
         (verdict.verdict == Growth::Growing && classifier == Boundedness::Bounded);
}

std::vector<PhaseCellResult> phase_scan(const std::vector<PhaseCell>& cells, const PhaseScanOptions& o) {
  require(o.replicas >= 2, "phase_scan: need at least 2 replicas");
  require(o.depth >= 2, "phase_scan: depth must be >= 2");
  const std::uint64_t id = hash_name("phase");
  std::vector<PhaseCellResult> out;
  for (const auto& cell : cells) {
    SimConfig base{cell.increment, o.offspring, cell.H, o.depth, o.seed, o.node_budget};
    base.validate();
    struct Run {
      std::vector<double> max_abs;
      bool truncated = false;
    };
    const auto runs = parallel_map<Run>(o.replicas, o.threads, [&](std::size_t r) {
      SupTrajectory t = dfs_supremum(base.with_seed(split_seed(o.seed, id, r)));
      return Run{std::move(t.max_abs), t.truncated};
    });
    PhaseCellResult res;
    res.H = cell.H;
    res.params = cell.increment.describe();
    res.theta_or_beta = theta_or_beta(cell.increment);
    res.replicas = o.replicas;
    res.classifier = classify_boundedness(cell.increment, o.offspring, cell.H);
    std::vector<std::vector<double>> traj;
    for (const auto& run : runs) {
      res.budget_exceeded |= run.truncated;
      traj.push_back(run.max_abs);
    }
    const auto N = static_cast<std::size_t>(o.depth);
    for (std::size_t k = 0; k <= N; ++k) {
      std::vector<double> col;
      for (const auto& t : traj) col.push_back(t[k]);
      res.median_max_abs.push_back(median(std::move(col)));
    }
    res.verdict = classify_growth(traj, N / 2, N, o.thresholds, split_seed(o.seed, id, ~std::uint64_t{0}));
    if (res.budget_exceeded) res.verdict.verdict = Growth::Ambiguous;
    out.push_back(std::move(res));
  }
  return out;
}

struct Experiment::Impl {
  Config cfg;
  std::string summary;
};

Experiment::Experiment(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Experiment::Experiment(Experiment&&) noexcept = default;
Experiment& Experiment::operator=(Experiment&&) noexcept = default;
Experiment::~Experiment() = default;

Experiment Experiment::from_json(const std::string& text) {
  auto impl = std::make_unique<Impl>();
  impl->cfg = parse_config(parse_text(text));
  return Experiment(std::move(impl));
}

Experiment Experiment::from_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::ConfigError, "config: cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

ExperimentKind Experiment::kind() const noexcept { return impl_->cfg.kind.value_or(ExperimentKind::Simulate); }

void Experiment::require_kind(ExperimentKind k) const {
  if (impl_->cfg.kind && *impl_->cfg.kind != k)
    fail(ErrorCode::ConfigError, std::string("config: kind '") + to_string(*impl_->cfg.kind) +
                                     "' does not match subcommand '" + to_string(k) + "'");
  impl_->cfg.kind = k;
}

void Experiment::set_seed(std::uint64_t seed) { impl_->cfg.seed = seed; }

void Experiment::set_threads(int threads) {
  require(threads >= 1, "threads must be >= 1");
  impl_->cfg.threads = threads;
}

void Experiment::set_dump_partitions(bool on) { impl_->cfg.dump_partitions = on; }

const std::string& Experiment::summary_json() const noexcept { return impl_->summary; }

Experiment::Outcome Experiment::run(const std::filesystem::path& out_dir) {
  const Config& c = impl_->cfg;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::ConfigError, "cannot create output directory " + out_dir.string() + ": " + ec.message());
  RunContext ctx{out_dir, {}, false};
  const auto t0 = std::chrono::steady_clock::now();
  json report;
  switch (kind()) {
    case ExperimentKind::Simulate: report = run_simulate(c, ctx); break;
    case ExperimentKind::Phase: report = run_phase(c, ctx); break;
    case ExperimentKind::Lemmas: report = run_lemmas(c, ctx); break;
    case ExperimentKind::Exceedance: report = run_exceedance(c, ctx); break;
    case ExperimentKind::Chain: report = run_chain(c, ctx); break;
    case ExperimentKind::Rde: report = run_rde(c, ctx); break;
    case ExperimentKind::Sssi: report = run_sssi(c, ctx); break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json summary = {{"tool", "brw"},
                  {"version", version()},
                  {"kind", to_string(kind())},
                  {"seed", c.seed},
                  {"threads", c.threads},
                  {"seed_rule", "replica r uses mix(mix(seed ^ mix(id + gamma)) + r * gamma), id = fnv1a(name)"},
                  {"increment", c.increment.describe()},
                  {"offspring", c.offspring.describe()},
                  {"classifier_thresholds",
                   {{"flat_threshold", c.thresholds.flat_threshold},
                    {"grow_threshold", c.thresholds.grow_threshold},
                    {"bootstrap", c.thresholds.bootstrap},
                    {"ci_level", c.thresholds.ci_level}}},
                  {"budget_exhausted", ctx.budget},
                  {"wall_time_s", wall},
                  {"config", c.raw},
                  {"report", report}};
  impl_->summary = summary.dump(2);
  ctx.write("summary.json", impl_->summary + "\n");
  return {ctx.budget, ctx.files};
}

}  // namespace brw
