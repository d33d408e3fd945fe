#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cpl {

// Dense class label in [0, K).
using LabelId = std::int32_t;

// Nonempty set of candidate labels, stored as a sorted list of unique ids.
class CandidateSet {
 public:
  CandidateSet() = default;
  explicit CandidateSet(std::vector<LabelId> ids);
  static CandidateSet singleton(LabelId y) { return CandidateSet({y}); }

  const std::vector<LabelId>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(LabelId y) const;

  bool operator==(const CandidateSet& other) const = default;

 private:
  std::vector<LabelId> ids_;
};

// Partially labeled dataset. Features are row-per-instance; `ids` carries the
// original instance index through splits. `hidden_truths` is present only in
// oracle mode and is reserved for diagnostics, never for deployment paths.
struct PartialDataset {
  Eigen::MatrixXd features;            // n x dim
  std::vector<CandidateSet> candidates;
  std::optional<std::vector<LabelId>> hidden_truths;
  std::vector<std::int64_t> ids;
  int num_classes = 0;

  std::size_t size() const { return candidates.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool oracle_mode() const { return hidden_truths.has_value(); }
  // True when every candidate set is a singleton (precise labels).
  bool precise() const;
  double mean_candidate_set_size() const;
};

// Checks entry nonnegativity and unit sum within `tol`.
bool is_probability_vector(const Eigen::VectorXd& probs, double tol = 1e-6);

enum class ScoreMethod { Max, All, Mean, Min, Mu, PreciseOracle };

std::string score_method_name(ScoreMethod m);

// Finite multiset of nonconformity scores in [0,1], tagged with the
// construction that produced it.
struct ScoreSet {
  std::vector<double> scores;
  ScoreMethod method = ScoreMethod::PreciseOracle;
  double mu = 0.0;  // meaningful only for ScoreMethod::Mu

  std::size_t size() const { return scores.size(); }
};

struct SplitSpec {
  double train_fraction = 0.72;
  double calib_fraction = 0.08;
  double test_fraction = 0.20;
  std::uint64_t seed = 0;

  // Throws ConfigError unless fractions are positive and sum to 1 within 1e-9.
  void validate() const;
};

struct SplitResult {
  PartialDataset train;
  PartialDataset calib;
  PartialDataset test;
};

// Diagnostic check of every dataset invariant; returns human-readable
// violations (empty means valid). Never throws.
std::vector<std::string> validate_dataset(const PartialDataset& d);

// Deterministic disjoint partition with proportions matching the configured
// fractions within rounding. Oracle truths are carried along when present.
// Throws ConfigError on invalid inputs or when any part would be empty.
SplitResult split(const PartialDataset& d, const SplitSpec& spec);

// Row subset of a dataset, preserving ids and truths.
PartialDataset subset(const PartialDataset& d,
                      const std::vector<std::size_t>& indices);

}  // namespace cpl
