#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpl/classifier.hpp"
#include "cpl/types.hpp"

namespace cpl {

enum class ModelKind { SoftmaxRegression, Mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxRegression;
  std::vector<int> hidden_widths;  // used only for Mlp
  int input_dim = 0;
  int num_classes = 0;

  void validate() const;  // throws ConfigError
};

// Feed-forward softmax classifier: a linear softmax regression or an MLP with
// rectifier hidden layers. Weights are initialized from a centered uniform
// scaled by 1/sqrt(fan_in), seed-controlled.
class NeuralClassifier final : public ProbabilisticClassifier {
 public:
  NeuralClassifier() = default;
  NeuralClassifier(const ModelSpec& spec, std::uint64_t seed);

  Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const override;
  int input_dim() const override { return spec_.input_dim; }
  int num_classes() const override { return spec_.num_classes; }

  // Row-per-instance batch of probability vectors.
  Eigen::MatrixXd predict_proba_batch(const Eigen::MatrixXd& xs) const;

  // Pre-softmax outputs for one instance.
  Eigen::VectorXd logits(const Eigen::VectorXd& x) const;

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::size_t num_layers() const { return weights_.size(); }
  const Eigen::MatrixXd& weight(std::size_t layer) const { return weights_[layer]; }
  const Eigen::VectorXd& bias(std::size_t layer) const { return biases_[layer]; }
  Eigen::MatrixXd& weight(std::size_t layer) { return weights_[layer]; }
  Eigen::VectorXd& bias(std::size_t layer) { return biases_[layer]; }

  // Flat parameter vector (layer weights row-major, then bias, per layer).
  // Used by checkpoints and the finite-difference tests.
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::size_t parameter_count() const;

  bool operator==(const NeuralClassifier& other) const;

 private:
  ModelSpec spec_;
  std::uint64_t init_seed_ = 0;
  std::vector<Eigen::MatrixXd> weights_;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases_;
};

// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Fraction of instances whose argmax probability matches the hidden truth.
// Requires oracle mode.
double argmax_accuracy(const ProbabilisticClassifier& f, const PartialDataset& d);

// Versioned textual checkpoint; doubles are written as hex floats so the
// round trip is bit-exact.
void save_checkpoint(const NeuralClassifier& model, const std::string& path);
NeuralClassifier load_checkpoint(const std::string& path);
void write_checkpoint(const NeuralClassifier& model, std::ostream& os);
NeuralClassifier read_checkpoint(std::istream& is);

}  // namespace cpl
