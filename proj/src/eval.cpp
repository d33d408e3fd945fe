#include "cpl/eval.hpp"

#include <algorithm>
#include <cmath>

#include "cpl/errors.hpp"
#include "cpl/rng.hpp"

namespace cpl {

namespace {

constexpr double kQuantileTol = 1e-12;

Eigen::MatrixXd predict_rows(const PartialDataset& d,
                             const ProbabilisticClassifier& f) {
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(d.size()), f.num_classes());
  for (std::size_t j = 0; j < d.size(); ++j) {
    probs.row(static_cast<Eigen::Index>(j)) =
        f.predict_proba(d.features.row(static_cast<Eigen::Index>(j)).transpose())
            .transpose();
  }
  return probs;
}

}  // namespace

double coverage(const std::vector<PredictionSet>& preds,
                const std::vector<LabelId>& truths) {
  if (preds.size() != truths.size()) {
    throw ConfigError("coverage: prediction/truth length mismatch");
  }
  if (preds.empty()) throw ConfigError("coverage of an empty prediction list");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].contains(truths[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(preds.size());
}

double efficiency(const std::vector<PredictionSet>& preds) {
  if (preds.empty()) throw ConfigError("efficiency of an empty prediction list");
  std::size_t total = 0;
  for (const auto& p : preds) total += p.size();
  return static_cast<double>(total) / static_cast<double>(preds.size());
}

SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

bool lemma_check(const ScoreSet& e1, std::size_t t_l, std::size_t t_r,
                 double epsilon, std::uint64_t seed,
                 bool enforce_preconditions) {
  if (e1.scores.empty()) throw ConfigError("lemma check on empty score set");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must be in (0,1)");
  }
  if (enforce_preconditions) {
    if (t_l < 2) throw ConfigError("lemma requires t_l >= 2");
    if (t_r < t_l) throw ConfigError("lemma requires t_r >= t_l");
    if (epsilon > 0.25) throw ConfigError("lemma requires epsilon <= 1/4");
  }

  CriticalScore c1 = critical_score(e1, epsilon);
  if (c1.infinite()) {
    throw ConfigError("lemma check needs a finite critical score");
  }
  double q1 = c1.value;

  Rng rng(seed);
  ScoreSet e2 = e1;
  for (std::size_t i = 0; i < t_l; ++i) {
    e2.scores.push_back(rng.uniform(0.0, q1));
  }
  for (std::size_t i = 0; i < t_r; ++i) {
    double v = q1 + (1.0 - q1) * rng.uniform();
    if (v <= q1) v = std::nextafter(q1, 2.0);
    e2.scores.push_back(v);
  }
  CriticalScore c2 = critical_score(e2, epsilon);
  return c2.value >= q1;
}

LemmaTrialSummary run_lemma_trials(std::size_t trials, std::uint64_t seed,
                                   bool enforce_preconditions) {
  LemmaTrialSummary summary;
  Rng rng(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::size_t n = 4 + rng.uniform_index(197);  // |E1| in [4, 200]
    ScoreSet e1;
    e1.scores.reserve(n);
    for (std::size_t i = 0; i < n; ++i) e1.scores.push_back(rng.uniform());

    // epsilon >= 1/(n+1) keeps the critical score finite
    double lo = 1.0 / (static_cast<double>(n) + 1.0);
    double epsilon = enforce_preconditions ? rng.uniform(lo, 0.25)
                                           : rng.uniform(0.26, 0.5);
    if (critical_score(e1, epsilon).infinite()) continue;
    if (critical_score(e1, epsilon).value >= 1.0) continue;

    std::size_t t_l = 2 + rng.uniform_index(9);
    // Inside the guarantee range t_r >= t_l; exploration also samples
    // t_r < t_l, where counterexamples live once epsilon exceeds 1/4.
    std::size_t t_r = enforce_preconditions ? t_l + rng.uniform_index(10)
                                            : rng.uniform_index(t_l + 10);
    bool held = lemma_check(e1, t_l, t_r, epsilon, rng.next_u64(),
                            enforce_preconditions);
    ++summary.trials;
    if (held) {
      ++summary.holds;
    } else {
      ++summary.failures;
    }
  }
  return summary;
}

TheoremAuditReport theorem_audit(const PartialDataset& calib,
                                 const ProbabilisticClassifier& f,
                                 const PartialDataset& test, double epsilon,
                                 const std::vector<CalibrationMethod>& methods) {
  if (!calib.oracle_mode()) {
    throw OracleError("theorem audit requires an oracle-mode calibration set");
  }
  Eigen::MatrixXd calib_probs = predict_rows(calib, f);
  Eigen::MatrixXd test_probs = predict_rows(test, f);

  TheoremAuditReport report;
  report.mean_condition = check_mean_condition_from_probs(calib, calib_probs);
  report.all_condition =
      check_all_condition_from_probs(calib, calib_probs, epsilon);

  CalibrationMethod oracle{ScoreMethod::PreciseOracle, 0.0};
  ScoreSet e1 = score_set_from_probs(calib, calib_probs, oracle);
  CriticalScore q1 = critical_score(e1, epsilon);

  for (const auto& method : methods) {
    MethodAudit audit;
    audit.method = method;
    ScoreSet em = score_set_from_probs(calib, calib_probs, method);
    CriticalScore qm = critical_score(em, epsilon);
    audit.q_method = qm.value;
    audit.q_oracle = q1.value;

    audit.containment_held = true;
    for (Eigen::Index i = 0; i < test_probs.rows(); ++i) {
      Eigen::VectorXd row = test_probs.row(i).transpose();
      PredictionSet base = prediction_set_from_probs(row, test.ids[i], q1);
      PredictionSet wide = prediction_set_from_probs(row, test.ids[i], qm);
      if (!std::includes(wide.members.begin(), wide.members.end(),
                         base.members.begin(), base.members.end())) {
        audit.containment_held = false;
        break;
      }
    }

    switch (method.kind) {
      case ScoreMethod::Max:
        audit.has_guarantee = true;
        audit.preconditions_held = true;  // exchangeability only
        audit.hard_failure = !audit.containment_held;
        break;
      case ScoreMethod::All:
        audit.has_guarantee = true;
        audit.preconditions_held = report.all_condition.all_satisfied;
        audit.hard_failure = audit.preconditions_held &&
                             qm.value < q1.value - kQuantileTol;
        break;
      case ScoreMethod::Mean:
        audit.has_guarantee = true;
        audit.preconditions_held = report.mean_condition.all_satisfied;
        audit.hard_failure = audit.preconditions_held &&
                             qm.value < q1.value - kQuantileTol;
        break;
      default:
        // min / mu / oracle: no validity guarantee, report only
        break;
    }
    if (audit.hard_failure) report.any_hard_failure = true;
    report.methods.push_back(audit);
  }
  return report;
}

}  // namespace cpl
