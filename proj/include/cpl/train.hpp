#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cpl/model.hpp"
#include "cpl/types.hpp"

namespace cpl {

enum class LossKind { OptimisticSuperset, ProgressiveWeighting };
enum class LrSchedule { Constant, CosineAnnealing };

struct TrainConfig {
  LossKind loss = LossKind::ProgressiveWeighting;
  int epochs = 60;
  int batch_size = 64;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  LrSchedule lr_schedule = LrSchedule::CosineAnnealing;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Per-instance weight vectors over the candidate sets; weights[i][k] belongs
// to candidates[i].ids()[k]. Each row is a distribution (zero mass outside
// the candidate set by construction).
struct LabelWeights {
  std::vector<std::vector<double>> weights;
};

LabelWeights uniform_weights(const PartialDataset& d);

// One progressive-disambiguation step: w_{i,y} proportional to the model
// probability of y within S_i, renormalized. Instances whose in-set
// probability mass is entirely zero keep their previous weights.
void progressive_reweight(LabelWeights& w, const PartialDataset& d,
                          const Eigen::MatrixXd& probs);

// min over y in S of the cross-entropy -log(probs_y), log-clamped at 1e-12.
double optimistic_superset_loss(const CandidateSet& s,
                                const Eigen::VectorXd& probs);

struct TrainResult {
  NeuralClassifier model;
  std::vector<double> epoch_losses;  // epoch-averaged objective
};

// Fits a classifier to partially labeled data by mini-batch gradient descent
// with momentum. Deterministic given config.seed. Throws DivergenceError when
// the loss turns NaN, naming the epoch.
TrainResult erm_fit(const PartialDataset& train, const ModelSpec& model_spec,
                    const TrainConfig& config);

// Mean objective over a dataset for the given parameters; `weights` is used
// only by ProgressiveWeighting. Exposed so tests can difference the loss.
double dataset_loss(const NeuralClassifier& model, const PartialDataset& d,
                    LossKind loss, const LabelWeights* weights);

// Mean-loss gradient with respect to the flat parameter vector.
std::vector<double> dataset_loss_gradient(const NeuralClassifier& model,
                                          const PartialDataset& d,
                                          LossKind loss,
                                          const LabelWeights* weights);

}  // namespace cpl
