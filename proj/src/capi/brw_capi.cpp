// SPDX-License-Identifier: Apache-2.0
#include "brw/brw.h"

#include <new>
#include <string>

#include "brw/error.hpp"
#include "brw/experiment.hpp"
#include "brw/series.hpp"
#include "brw/tree_sim.hpp"

struct brw_experiment {
  brw::Experiment exp;
};

struct brw_law {
  brw::IncrementLaw law;
};

namespace {

thread_local std::string g_last_error;

brw_status status_of(brw::ErrorCode c) {
  switch (c) {
    case brw::ErrorCode::InvalidArgument: return BRW_ERR_INVALID_ARGUMENT;
    case brw::ErrorCode::ConfigError: return BRW_ERR_CONFIG;
    case brw::ErrorCode::BudgetExceeded: return BRW_ERR_BUDGET;
    case brw::ErrorCode::InternalInconsistency: return BRW_ERR_INTERNAL;
    case brw::ErrorCode::BoundViolated: return BRW_ERR_BOUND_VIOLATED;
    case brw::ErrorCode::DepthTooShallowForLevel: return BRW_ERR_DEPTH_TOO_SHALLOW;
  }
  return BRW_ERR_INTERNAL;
}

template <class F>
brw_status guarded(F&& f) {
  try {
    return f();
  } catch (const brw::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BRW_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BRW_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BRW_ERR_INTERNAL;
  }
}

brw_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be null";
  return BRW_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* brw_version(void) { return brw::version(); }

const char* brw_status_string(brw_status s) {
  switch (s) {
    case BRW_OK: return "ok";
    case BRW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BRW_ERR_CONFIG: return "config error";
    case BRW_ERR_BUDGET: return "budget exceeded";
    case BRW_ERR_INTERNAL: return "internal inconsistency";
    case BRW_ERR_BOUND_VIOLATED: return "bound violated";
    case BRW_ERR_DEPTH_TOO_SHALLOW: return "depth too shallow for level";
  }
  return "unknown status";
}

const char* brw_last_error(void) { return g_last_error.c_str(); }

brw_status brw_experiment_create(const char* config_json, brw_experiment** out) {
  if (!config_json) return null_arg("config_json");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new brw_experiment{brw::Experiment::from_json(config_json)};
    return BRW_OK;
  });
}

brw_status brw_experiment_create_from_file(const char* path, brw_experiment** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new brw_experiment{brw::Experiment::from_file(path)};
    return BRW_OK;
  });
}

brw_status brw_experiment_set_kind(brw_experiment* e, const char* kind) {
  if (!e) return null_arg("experiment");
  if (!kind) return null_arg("kind");
  return guarded([&] {
    e->exp.require_kind(brw::parse_kind(kind));
    return BRW_OK;
  });
}

brw_status brw_experiment_set_seed(brw_experiment* e, uint64_t seed) {
  if (!e) return null_arg("experiment");
  e->exp.set_seed(seed);
  return BRW_OK;
}

brw_status brw_experiment_set_threads(brw_experiment* e, int threads) {
  if (!e) return null_arg("experiment");
  return guarded([&] {
    e->exp.set_threads(threads);
    return BRW_OK;
  });
}

brw_status brw_experiment_set_dump_partitions(brw_experiment* e, int on) {
  if (!e) return null_arg("experiment");
  e->exp.set_dump_partitions(on != 0);
  return BRW_OK;
}

brw_status brw_experiment_run(brw_experiment* e, const char* out_dir) {
  if (!e) return null_arg("experiment");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] {
    const auto outcome = e->exp.run(out_dir);
    if (outcome.budget_exhausted) {
      g_last_error = "node budget exhausted in at least one replica; outputs cover the visited part";
      return BRW_ERR_BUDGET;
    }
    return BRW_OK;
  });
}

const char* brw_experiment_summary_json(const brw_experiment* e) { return e ? e->exp.summary_json().c_str() : ""; }

void brw_experiment_destroy(brw_experiment* e) { delete e; }

brw_status brw_law_create(const char* spec_json, brw_law** out) {
  if (!spec_json) return null_arg("spec_json");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new brw_law{brw::increment_from_json(spec_json)};
    return BRW_OK;
  });
}

brw_status brw_law_tail(const brw_law* law, double x, double* out) {
  if (!law) return null_arg("law");
  if (!out) return null_arg("out");
  return guarded([&] {
    brw::require(x >= 0, "tail: x must be >= 0");
    *out = law->law.tail(x);
    return BRW_OK;
  });
}

brw_status brw_law_moment(const brw_law* law, double H, int* finite, double* value) {
  if (!law) return null_arg("law");
  if (!finite || !value) return null_arg("finite/value");
  return guarded([&] {
    const auto m = brw::moment_1overH(law->law, H);
    *finite = m.finite;
    if (m.finite) *value = m.value;
    return BRW_OK;
  });
}

void brw_law_destroy(brw_law* law) { delete law; }

brw_status brw_series_P(const brw_law* law, double m, double H, int* finite, double* value) {
  if (!law) return null_arg("law");
  if (!finite || !value) return null_arg("finite/value");
  return guarded([&] {
    const auto r = brw::compute_P(law->law, m, H);
    *finite = r.finite;
    if (r.finite) *value = r.value;
    return BRW_OK;
  });
}

brw_status brw_series_expected_exceedance(const brw_law* law, double m, double H, double u, int* finite,
                                          double* value) {
  if (!law) return null_arg("law");
  if (!finite || !value) return null_arg("finite/value");
  return guarded([&] {
    const auto r = brw::expected_exceedance(law->law, m, H, u);
    *finite = r.finite;
    if (r.finite) *value = r.value;
    return BRW_OK;
  });
}

brw_status brw_u_threshold(double H, int n, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = brw::u_threshold(H, n);
    return BRW_OK;
  });
}

brw_status brw_simulate_max_abs(const brw_law* law, const char* offspring_json, double H, int depth, uint64_t seed,
                                double* max_abs, size_t len) {
  if (!law) return null_arg("law");
  if (!offspring_json) return null_arg("offspring_json");
  if (!max_abs) return null_arg("max_abs");
  return guarded([&] {
    brw::require(depth >= 1 && len >= static_cast<size_t>(depth) + 1, "max_abs must hold depth + 1 values");
    const brw::SimConfig cfg{law->law, brw::offspring_from_json(offspring_json), H, depth, seed};
    const auto t = brw::dfs_supremum(cfg);
    for (size_t k = 0; k < t.max_abs.size(); ++k) max_abs[k] = t.max_abs[k];
    return t.truncated ? BRW_ERR_BUDGET : BRW_OK;
  });
}

}  // extern "C"
