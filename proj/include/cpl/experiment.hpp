#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpl/conformal.hpp"
#include "cpl/datagen.hpp"
#include "cpl/eval.hpp"
#include "cpl/model.hpp"
#include "cpl/train.hpp"
#include "cpl/types.hpp"

namespace cpl {

// What to do to the precise dataset before calibration sees it.
enum class ContaminationKind { None, Random, InstanceDependent };

struct ContaminationConfig {
  ContaminationKind kind = ContaminationKind::Random;
  double p = 0.3;  // only for Random
};

// Full experiment description, normally parsed from a JSON file. Unknown
// keys in the file are hard errors so typos cannot silently change a run.
struct ExperimentConfig {
  // Exactly one of generator / dataset_file is in use.
  std::optional<GaussianMixtureSpec> generator;
  std::optional<std::string> dataset_file;

  ContaminationConfig contamination;
  ModelKind model_kind = ModelKind::SoftmaxRegression;
  std::vector<int> hidden_widths;
  TrainConfig train;
  std::optional<TrainConfig> supermodel_train;  // instance-dependent only

  std::vector<CalibrationMethod> methods;
  double epsilon = 0.1;
  SplitSpec split;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";

  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

// One calibrate/predict cycle for a single seed.
struct SeedRun {
  std::uint64_t seed = 0;
  bool oracle = false;
  double mean_candidate_set_size = 0.0;
  double train_accuracy = 0.0;  // NaN when truths unavailable
  double test_accuracy = 0.0;   // NaN when truths unavailable
  std::vector<MethodMetrics> metrics;  // one row per configured method
  // predictions[m][i] is the set for test instance i under method m.
  std::vector<std::vector<PredictionSet>> predictions;
  std::optional<TheoremAuditReport> audit;  // oracle mode only
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedRun> runs;
  std::vector<MethodAggregate> aggregates;  // across seeds, configured order
  SummaryStat css;
  bool invariants_ok = true;
  std::vector<std::string> invariant_failures;
};

// Runs the full pipeline for every configured seed. Throws InvariantError
// when a guarantee that should hold (exactly, or conditionally with its
// precondition satisfied) is violated.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Same pipeline but collects violations in the report instead of throwing;
// used by the audit command.
ExperimentReport run_experiment_no_throw(const ExperimentConfig& config);

// Report writers. All output is deterministic byte-for-byte for a fixed
// config (no timestamps, fixed float formatting, fixed ordering).
std::string metrics_csv(const ExperimentReport& report);
std::string summary_json(const ExperimentReport& report);
std::string predictions_csv(const SeedRun& run, double epsilon);
void write_report_files(const ExperimentReport& report,
                        const std::string& out_dir);

}  // namespace cpl
