#include "cpl/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

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

void CalibrationMethod::validate() const {
  if (kind == ScoreMethod::Mu && (mu < 0.0 || mu > 1.0)) {
    throw ConfigError("mu must be in [0,1]");
  }
}

std::string CalibrationMethod::name() const {
  if (kind == ScoreMethod::Mu) {
    std::string v = std::to_string(mu);
    v.erase(v.find_last_not_of('0') + 1);
    if (!v.empty() && v.back() == '.') v.pop_back();
    return "mu:" + v;
  }
  return score_method_name(kind);
}

CalibrationMethod CalibrationMethod::parse(const std::string& name) {
  CalibrationMethod m;
  if (name == "max") {
    m.kind = ScoreMethod::Max;
  } else if (name == "all") {
    m.kind = ScoreMethod::All;
  } else if (name == "mean") {
    m.kind = ScoreMethod::Mean;
  } else if (name == "min") {
    m.kind = ScoreMethod::Min;
  } else if (name == "oracle") {
    m.kind = ScoreMethod::PreciseOracle;
  } else if (name.rfind("mu:", 0) == 0) {
    m.kind = ScoreMethod::Mu;
    try {
      m.mu = std::stod(name.substr(3));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse mu value in method '" + name + "'");
    }
  } else {
    throw ConfigError("unknown calibration method '" + name + "'");
  }
  m.validate();
  return m;
}

bool CriticalScore::infinite() const {
  return std::isinf(value) && value > 0.0;
}

bool PredictionSet::contains(LabelId y) const {
  return std::binary_search(members.begin(), members.end(), y);
}

ScoreSet score_set_from_probs(const PartialDataset& calib,
                              const Eigen::MatrixXd& probs,
                              const CalibrationMethod& method) {
  method.validate();
  if (calib.size() == 0) throw ConfigError("empty calibration set");
  if (static_cast<std::size_t>(probs.rows()) != calib.size()) {
    throw DimensionError("probability rows do not match calibration set");
  }
  if (method.kind == ScoreMethod::PreciseOracle && !calib.oracle_mode()) {
    throw OracleError("precise-oracle scores require an oracle-mode dataset");
  }

  ScoreSet e;
  e.method = method.kind;
  e.mu = method.mu;
  for (std::size_t j = 0; j < calib.size(); ++j) {
    const auto row = probs.row(static_cast<Eigen::Index>(j));
    const auto& s = calib.candidates[j];
    if (s.empty()) throw ConfigError("empty candidate set @" + std::to_string(j));

    switch (method.kind) {
      case ScoreMethod::All: {
        for (LabelId y : s.ids()) e.scores.push_back(clamp01(1.0 - row(y)));
        break;
      }
      case ScoreMethod::PreciseOracle: {
        LabelId y = (*calib.hidden_truths)[j];
        e.scores.push_back(clamp01(1.0 - row(y)));
        break;
      }
      default: {
        double p_min = std::numeric_limits<double>::infinity();
        double p_max = -std::numeric_limits<double>::infinity();
        double p_sum = 0.0;
        for (LabelId y : s.ids()) {
          p_min = std::min(p_min, row(y));
          p_max = std::max(p_max, row(y));
          p_sum += row(y);
        }
        double score = 0.0;
        if (method.kind == ScoreMethod::Max) {
          score = 1.0 - p_min;
        } else if (method.kind == ScoreMethod::Min) {
          score = 1.0 - p_max;
        } else if (method.kind == ScoreMethod::Mean) {
          score = 1.0 - p_sum / static_cast<double>(s.size());
        } else {  // Mu: weighted average of the min and max score
          score = method.mu * (1.0 - p_max) + (1.0 - method.mu) * (1.0 - p_min);
        }
        e.scores.push_back(clamp01(score));
      }
    }
  }
  return e;
}

ScoreSet score_set(const PartialDataset& calib, const ProbabilisticClassifier& f,
                   const CalibrationMethod& method) {
  return score_set_from_probs(calib, predict_rows(calib, f), method);
}

CriticalScore critical_score(const ScoreSet& e, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must be in (0,1)");
  }
  if (e.scores.empty()) throw ConfigError("critical score of an empty score set");

  std::size_t n = e.scores.size();
  auto t = static_cast<std::size_t>(
      std::ceil((1.0 + static_cast<double>(n)) * (1.0 - epsilon)));
  CriticalScore c;
  c.rank = t;
  c.epsilon = epsilon;
  if (t > n) {
    c.value = std::numeric_limits<double>::infinity();
    return c;
  }
  std::vector<double> scores = e.scores;
  auto nth = scores.begin() + static_cast<std::ptrdiff_t>(t - 1);
  std::nth_element(scores.begin(), nth, scores.end());
  c.value = *nth;
  return c;
}

PredictionSet prediction_set_from_probs(const Eigen::VectorXd& probs,
                                        std::int64_t instance_id,
                                        const CriticalScore& critical) {
  PredictionSet p;
  p.critical = critical;
  p.instance_id = instance_id;
  double threshold = 1.0 - critical.value;  // -inf when the rank overflowed
  for (Eigen::Index y = 0; y < probs.size(); ++y) {
    if (probs(y) >= threshold) p.members.push_back(static_cast<LabelId>(y));
  }
  return p;
}

PredictionSet prediction_set(const Eigen::VectorXd& x, std::int64_t instance_id,
                             const ProbabilisticClassifier& f, const ScoreSet& e,
                             double epsilon) {
  return prediction_set_from_probs(f.predict_proba(x), instance_id,
                                   critical_score(e, epsilon));
}

MeanConditionReport check_mean_condition_from_probs(const PartialDataset& calib,
                                                    const Eigen::MatrixXd& probs) {
  if (!calib.oracle_mode()) {
    throw OracleError("mean-condition check requires an oracle-mode dataset");
  }
  if (static_cast<std::size_t>(probs.rows()) != calib.size()) {
    throw DimensionError("probability rows do not match calibration set");
  }
  MeanConditionReport r;
  r.per_instance.reserve(calib.size());
  for (std::size_t j = 0; j < calib.size(); ++j) {
    LabelId y = (*calib.hidden_truths)[j];
    double p = probs(static_cast<Eigen::Index>(j), y);
    bool ok = p >= 1.0 / static_cast<double>(calib.candidates[j].size());
    r.per_instance.push_back(ok);
    if (ok) ++r.num_satisfied;
  }
  r.all_satisfied = r.num_satisfied == calib.size();
  return r;
}

MeanConditionReport check_mean_condition(const PartialDataset& calib,
                                         const ProbabilisticClassifier& f) {
  return check_mean_condition_from_probs(calib, predict_rows(calib, f));
}

AllConditionReport check_all_condition_from_probs(const PartialDataset& calib,
                                                  const Eigen::MatrixXd& probs,
                                                  double epsilon) {
  if (!calib.oracle_mode()) {
    throw OracleError("all-condition check requires an oracle-mode dataset");
  }
  auto n = static_cast<double>(calib.size());
  auto k = static_cast<double>(calib.num_classes);
  AllConditionReport r;
  r.epsilon_bound = std::min(0.25, (n + k) / (k * (1.0 + n)));
  r.epsilon_ok = epsilon <= r.epsilon_bound;
  CalibrationMethod oracle{ScoreMethod::PreciseOracle, 0.0};
  ScoreSet e1 = score_set_from_probs(calib, probs, oracle);
  r.oracle_critical = critical_score(e1, epsilon).value;
  r.critical_ok = r.oracle_critical <= 0.5;
  r.all_satisfied = r.epsilon_ok && r.critical_ok;
  return r;
}

AllConditionReport check_all_condition(const PartialDataset& calib,
                                       const ProbabilisticClassifier& f,
                                       double epsilon) {
  return check_all_condition_from_probs(calib, predict_rows(calib, f), epsilon);
}

}  // namespace cpl
