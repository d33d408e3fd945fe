#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cpl/classifier.hpp"
#include "cpl/types.hpp"

namespace cpl {

// A score-set construction: one of the five set-valued calibration rules or
// the precise oracle baseline (testing/diagnostics only).
struct CalibrationMethod {
  ScoreMethod kind = ScoreMethod::Max;
  double mu = 0.0;  // used only when kind == Mu

  void validate() const;  // throws ConfigError (mu outside [0,1])
  std::string name() const;
  static CalibrationMethod parse(const std::string& name);  // "max", "mu:0.3", ...
};

// The calibration threshold: the ceil((1+|E|)(1-eps))-th smallest score, or
// +infinity when that rank exceeds |E|.
struct CriticalScore {
  double value = 0.0;
  std::size_t rank = 0;  // 1-indexed rank t
  double epsilon = 0.0;

  bool infinite() const;
};

// Labels admitted for one test instance: y is a member iff
// f(x)_y >= 1 - critical.value.
struct PredictionSet {
  std::vector<LabelId> members;  // sorted
  CriticalScore critical;
  std::int64_t instance_id = -1;

  bool contains(LabelId y) const;
  std::size_t size() const { return members.size(); }
};

// Builds the nonconformity score multiset for the calibration split.
// PreciseOracle requires oracle mode; empty calibration data is an error.
// Scores are clamped to [0,1].
ScoreSet score_set(const PartialDataset& calib, const ProbabilisticClassifier& f,
                   const CalibrationMethod& method);

// Same construction from precomputed probability rows (row j = f(x_j)).
ScoreSet score_set_from_probs(const PartialDataset& calib,
                              const Eigen::MatrixXd& probs,
                              const CalibrationMethod& method);

CriticalScore critical_score(const ScoreSet& e, double epsilon);

PredictionSet prediction_set(const Eigen::VectorXd& x, std::int64_t instance_id,
                             const ProbabilisticClassifier& f, const ScoreSet& e,
                             double epsilon);

// Membership from precomputed probabilities and critical score.
PredictionSet prediction_set_from_probs(const Eigen::VectorXd& probs,
                                        std::int64_t instance_id,
                                        const CriticalScore& critical);

// Per-instance check of f(x_j)_{y_j} >= 1/|S_j| on the calibration split.
// When every instance satisfies it, mean-score calibration inherits validity.
struct MeanConditionReport {
  std::vector<bool> per_instance;
  std::size_t num_satisfied = 0;
  bool all_satisfied = false;
};

MeanConditionReport check_mean_condition(const PartialDataset& calib,
                                         const ProbabilisticClassifier& f);
MeanConditionReport check_mean_condition_from_probs(const PartialDataset& calib,
                                                    const Eigen::MatrixXd& probs);

// The two side conditions under which all-scores calibration inherits
// validity: an upper bound on epsilon and a cap on the oracle critical score.
struct AllConditionReport {
  double epsilon_bound = 0.0;  // min(1/4, (n + K) / (K * (1 + n)))
  bool epsilon_ok = false;
  double oracle_critical = 0.0;  // q(E_1, eps)
  bool critical_ok = false;      // q(E_1, eps) <= 0.5
  bool all_satisfied = false;
};

AllConditionReport check_all_condition(const PartialDataset& calib,
                                       const ProbabilisticClassifier& f,
                                       double epsilon);
AllConditionReport check_all_condition_from_probs(const PartialDataset& calib,
                                                  const Eigen::MatrixXd& probs,
                                                  double epsilon);

}  // namespace cpl
