// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration behind the command line tool and the C API:
// config parsing, replica seeding, the phase scan and CSV / JSON output.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "brw/laws.hpp"
#include "brw/series.hpp"
#include "brw/stats.hpp"

namespace brw {

enum class ExperimentKind { Simulate, Phase, Lemmas, Exceedance, Chain, Rde, Sssi };
const char* to_string(ExperimentKind k) noexcept;
/// Throws Error(ConfigError) for unknown names.
ExperimentKind parse_kind(const std::string& name);

/// Law specifications in the config format, e.g.
///   {"kind": "sym_pareto", "theta": 1.0, "xmin": 1.0}
/// Throws Error(ConfigError) on unknown kinds or keys and on invalid
/// parameters.
IncrementLaw increment_from_json(const std::string& json);
OffspringLaw offspring_from_json(const std::string& json);

struct PhaseCell {
  double H = 1.0;
  IncrementLaw increment;
};

struct PhaseScanOptions {
  OffspringLaw offspring = OffspringLaw::deterministic(2);
  int depth = 24;
  std::size_t replicas = 32;
  std::uint64_t seed = 0;
  std::uint64_t node_budget = 200'000'000;
  GrowthThresholds thresholds;
  int threads = 1;
};

struct PhaseCellResult {
  double H = 0.0;
  std::string params;          // law description
  double theta_or_beta = 0.0;  // NaN for laws without either
  std::vector<double> median_max_abs;  // depths 0..N
  GrowthVerdict verdict;
  Boundedness classifier = Boundedness::NotCovered;
  bool budget_exceeded = false;
  std::size_t replicas = 0;

  /// Flat against Unbounded, or Growing against Bounded.
  bool hard_disagreement() const noexcept;
};

/// For each cell: replicas of the streaming supremum, median max_abs per
/// depth, slope verdict over depths [N/2, N], and the analytic classifier.
/// Replica r of every cell uses the same split seed, so cells share noise.
std::vector<PhaseCellResult> phase_scan(const std::vector<PhaseCell>& cells, const PhaseScanOptions& options);

/// A parsed experiment config. Unknown keys are rejected at every level.
class Experiment {
 public:
  static Experiment from_json(const std::string& json);
  static Experiment from_file(const std::filesystem::path& path);

  Experiment(Experiment&&) noexcept;
  Experiment& operator=(Experiment&&) noexcept;
  ~Experiment();

  ExperimentKind kind() const noexcept;
  /// Throws Error(ConfigError) when the config names another kind.
  void require_kind(ExperimentKind k) const;
  void set_seed(std::uint64_t seed);
  void set_threads(int threads);
  void set_dump_partitions(bool on);

  struct Outcome {
    /// Set when some replica hit its node budget (CSV files still written).
    bool budget_exhausted = false;
    std::vector<std::string> files;
  };

  /// Runs the experiment and writes CSV files and summary.json into
  /// out_dir (created if missing). CSV bodies depend only on the config
  /// and seed; wall time appears only in the summary.
  Outcome run(const std::filesystem::path& out_dir);

  /// summary.json of the last run (empty before).
  const std::string& summary_json() const noexcept;

 private:
  struct Impl;
  explicit Experiment(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

const char* version() noexcept;

}  // namespace brw
