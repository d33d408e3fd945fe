#pragma once

#include <Eigen/Core>

namespace cpl {

// Any model mapping an instance to a probability vector over K classes.
class ProbabilisticClassifier {
 public:
  virtual ~ProbabilisticClassifier() = default;

  // Returns a valid probability vector of length num_classes().
  // Throws DimensionError when the feature dimension does not match.
  virtual Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const = 0;

  virtual int input_dim() const = 0;
  virtual int num_classes() const = 0;
};

}  // namespace cpl
