#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "admplan/diffusion.hpp"
#include "admplan/env.hpp"

namespace admplan {

/// One experiment cell: a checkpoint plus optional inference-time overrides.
struct ExperimentCell {
  std::string name;        ///< unique label, also used in file names
  std::string checkpoint;  ///< checkpoint path
  std::string curriculum;  ///< "pre"/"mid"/"post"/"off"; empty keeps the checkpoint's
  std::string projector;   ///< "P"/"Pref"/"PA"/"PSA"; empty keeps the checkpoint's
};

/// Batch comparison protocol: every cell is sampled from the same initial
/// states with the same sample seeds, so cells differ only in their model
/// and overrides.
struct ExperimentPlan {
  std::string env_name;
  std::vector<ExperimentCell> cells;
  int n_initial_states = 4;
  int samples_per_state = 4;
  std::vector<std::string> metrics;  ///< any of: sae, cae, survival-fraction,
                                     ///  reward-proxy, task-completion
  std::uint64_t seed = 0;

  void validate() const;
};

ExperimentPlan plan_from_json(const std::string& text);
std::string plan_to_json(const ExperimentPlan& plan);

/// Per-cell aggregates in plan metric order (sae expands to sae_mean and
/// sae_max). `stddev` is the population standard deviation of the per-sample
/// values.
struct CellSummary {
  std::string cell;
  std::vector<std::string> metric_names;
  std::vector<double> mean;
  std::vector<double> stddev;

  double value(const std::string& metric_name) const;
};

struct ExperimentReport {
  std::string directory;
  std::vector<CellSummary> summaries;
};

/// Runs every cell and writes a report bundle into out_dir:
///   plan.json      the resolved plan echo
///   metrics.csv    one row per sample, referencing its trajectory file
///   summary.csv    per-cell mean and population std of each metric
///   trajectories/  one trajectory file per sample
///   plots/         SAE/CAE distribution curves and the violation-ratio curve
/// SAE/CAE come from the inverse-dynamics verifier, so every reported value
/// is recomputable from the stored trajectory files. Identical plans and
/// seeds produce byte-identical bundles.
ExperimentReport run_experiment(const Env& env, const ExperimentPlan& plan,
                                const std::string& out_dir);

}  // namespace admplan
