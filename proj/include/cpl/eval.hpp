#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cpl/classifier.hpp"
#include "cpl/conformal.hpp"
#include "cpl/types.hpp"

namespace cpl {

// Fraction of prediction sets containing the true label.
double coverage(const std::vector<PredictionSet>& preds,
                const std::vector<LabelId>& truths);

// Mean prediction-set cardinality.
double efficiency(const std::vector<PredictionSet>& preds);

struct SummaryStat {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by count)
};

SummaryStat summarize(const std::vector<double>& values);

// One (seed, method) result row.
struct MethodMetrics {
  CalibrationMethod method;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double efficiency = 0.0;
  double critical = 0.0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

// Per-method aggregate over seeds.
struct MethodAggregate {
  CalibrationMethod method;
  SummaryStat coverage;
  SummaryStat efficiency;
  std::size_t num_seeds = 0;
};

// Brute-force trial of the rank-shift lemma behind all-scores validity:
// starting from e1 with critical value q, add t_l values <= q and t_r values
// > q, and report whether the new critical value is >= q. Guaranteed true
// when t_l >= 2, t_r >= t_l, and epsilon <= 1/4.
// With enforce_preconditions the guarantee range is checked up front
// (ConfigError outside it); without it, trials outside the range may
// legitimately return false.
bool lemma_check(const ScoreSet& e1, std::size_t t_l, std::size_t t_r,
                 double epsilon, std::uint64_t seed,
                 bool enforce_preconditions = true);

struct LemmaTrialSummary {
  std::size_t trials = 0;
  std::size_t holds = 0;
  std::size_t failures = 0;
};

// Randomized lemma trials over random score sets, ranks, and epsilon values.
// With enforce_preconditions, sampling stays inside the guarantee range and
// every trial must hold; otherwise epsilon ranges over (1/4, 1/2) and
// failures are counted, not raised.
LemmaTrialSummary run_lemma_trials(std::size_t trials, std::uint64_t seed,
                                   bool enforce_preconditions = true);

// Per-method audit of the validity mechanisms on one trained run.
struct MethodAudit {
  CalibrationMethod method;
  bool has_guarantee = false;       // max always; all/mean under conditions
  bool preconditions_held = false;  // vacuously true for max
  bool containment_held = false;    // T(E1) subset of T(E_method), exact, every test instance
  double q_method = 0.0;
  double q_oracle = 0.0;
  // preconditions held but the guaranteed quantile dominance failed
  bool hard_failure = false;
};

struct TheoremAuditReport {
  std::vector<MethodAudit> methods;
  MeanConditionReport mean_condition;
  AllConditionReport all_condition;
  bool any_hard_failure = false;
};

// Evaluates, for each method, whether its validity preconditions held on the
// calibration split and whether oracle-set containment held empirically on
// the test split. Requires oracle mode. Quantile dominance for the
// conditional guarantees is checked with tolerance 1e-12.
TheoremAuditReport theorem_audit(const PartialDataset& calib,
                                 const ProbabilisticClassifier& f,
                                 const PartialDataset& test, double epsilon,
                                 const std::vector<CalibrationMethod>& methods);

}  // namespace cpl
