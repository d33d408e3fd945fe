#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cpl/classifier.hpp"
#include "cpl/train.hpp"
#include "cpl/types.hpp"

namespace cpl {

// Synthetic stand-in for the image benchmarks: K spherical Gaussian classes
// with shared scale sigma.
struct GaussianMixtureSpec {
  int num_classes = 0;
  int dim = 0;
  std::vector<Eigen::VectorXd> means;  // one per class
  double sigma = 1.0;
  int samples_per_class = 0;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Class means on a circle in the first two feature dims.
std::vector<Eigen::VectorXd> circle_means(int num_classes, int dim, double radius);

// Class means drawn i.i.d. N(0, scale^2 I); deterministic given seed.
std::vector<Eigen::VectorXd> random_means(int num_classes, int dim, double scale,
                                          std::uint64_t seed);

// Precise oracle dataset: singleton candidate sets, class-major order,
// per-instance random streams.
PartialDataset generate_gaussian(const GaussianMixtureSpec& spec);

// Adds each non-ground-truth label independently with probability p; when no
// false label lands, one uniformly random false label is forced so every
// instance stays partial. Requires a precise oracle dataset; p in (0,1].
PartialDataset contaminate_random(const PartialDataset& d, double p,
                                  std::uint64_t seed);

// Per-label inclusion probabilities for instance-dependent contamination:
// p_y = f(x)_y / max over false labels, and 0 at the true label. Returns an
// all-zero vector when every false-label probability is zero.
Eigen::VectorXd instance_inclusion_probabilities(const Eigen::VectorXd& probs,
                                                 LabelId truth);

// Adds each false label y with probability f(x_i)_y / max false probability,
// so the supermodel's favorite false label is always included. Falls back to
// the forced-add rule when the supermodel puts zero mass on all false labels.
PartialDataset contaminate_instance_dependent(const PartialDataset& d,
                                              const ProbabilisticClassifier& supermodel,
                                              std::uint64_t seed);

struct SupermodelResult {
  NeuralClassifier model;
  double train_accuracy = 0.0;
};

// Deliberately small classifier (one hidden layer of width 16) trained on the
// same precise set it will later contaminate.
SupermodelResult train_supermodel(const PartialDataset& d, const TrainConfig& config);

}  // namespace cpl
