#include "cpl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpl/errors.hpp"
#include "cpl/rng.hpp"

namespace cpl {

namespace {

constexpr double kLogClamp = 1e-12;
constexpr double kPi = 3.14159265358979323846;

double clamped_nll(double p) { return -std::log(std::max(p, kLogClamp)); }

// In-set argmax probability, lowest label id on ties.
LabelId optimistic_pick(const CandidateSet& s, const Eigen::VectorXd& probs) {
  LabelId best = s.ids().front();
  double best_p = probs(best);
  for (LabelId y : s.ids()) {
    if (probs(y) > best_p) {
      best_p = probs(y);
      best = y;
    }
  }
  return best;
}

struct ForwardPass {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer, b x out
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = inputs, acts[l+1] = layer output
  Eigen::MatrixXd probs;              // b x K
};

ForwardPass forward_batch(const NeuralClassifier& m, const Eigen::MatrixXd& x) {
  ForwardPass fp;
  fp.acts.push_back(x);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    Eigen::MatrixXd z =
        (fp.acts.back() * m.weight(l).transpose()).rowwise() +
        m.bias(l).transpose();
    fp.pre.push_back(z);
    if (l + 1 < m.num_layers()) {
      fp.acts.push_back(z.cwiseMax(0.0));
    } else {
      fp.acts.push_back(z);
    }
  }
  Eigen::MatrixXd& logits = fp.acts.back();
  fp.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    fp.probs.row(i) = softmax(logits.row(i).transpose()).transpose();
  }
  return fp;
}

struct BatchGrad {
  double loss = 0.0;  // batch mean
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
};

// Mean loss and its gradient on the given instances. `weights` is required
// for ProgressiveWeighting and ignored otherwise.
BatchGrad batch_gradient(const NeuralClassifier& m, const PartialDataset& d,
                         const std::vector<std::size_t>& idx, LossKind loss,
                         const LabelWeights* weights) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd x(b, d.features.cols());
  for (Eigen::Index r = 0; r < b; ++r) {
    x.row(r) = d.features.row(static_cast<Eigen::Index>(idx[r]));
  }
  ForwardPass fp = forward_batch(m, x);

  // Soft targets: one-hot at the optimistic pick, or the candidate weights.
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(b, m.num_classes());
  double loss_sum = 0.0;
  for (Eigen::Index r = 0; r < b; ++r) {
    std::size_t i = idx[r];
    const CandidateSet& s = d.candidates[i];
    Eigen::VectorXd p = fp.probs.row(r).transpose();
    if (loss == LossKind::OptimisticSuperset) {
      LabelId pick = optimistic_pick(s, p);
      targets(r, pick) = 1.0;
      loss_sum += clamped_nll(p(pick));
    } else {
      const auto& w = weights->weights[i];
      for (std::size_t k = 0; k < s.size(); ++k) {
        LabelId y = s.ids()[k];
        targets(r, y) += w[k];
        loss_sum += w[k] * clamped_nll(p(y));
      }
    }
  }

  BatchGrad g;
  g.loss = loss_sum / static_cast<double>(b);
  g.dw.resize(m.num_layers());
  g.db.resize(m.num_layers());
  Eigen::MatrixXd delta = (fp.probs - targets) / static_cast<double>(b);
  for (std::size_t l = m.num_layers(); l-- > 0;) {
    g.dw[l] = delta.transpose() * fp.acts[l];
    g.db[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd da = delta * m.weight(l);
      delta = da.cwiseProduct(
          (fp.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

LabelWeights uniform_weights(const PartialDataset& d) {
  LabelWeights w;
  w.weights.reserve(d.size());
  for (const auto& s : d.candidates) {
    w.weights.emplace_back(s.size(), 1.0 / static_cast<double>(s.size()));
  }
  return w;
}

void progressive_reweight(LabelWeights& w, const PartialDataset& d,
                          const Eigen::MatrixXd& probs) {
  if (w.weights.size() != d.size() ||
      static_cast<std::size_t>(probs.rows()) != d.size()) {
    throw DimensionError("label weights / probability rows mismatch");
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& ids = d.candidates[i].ids();
    double total = 0.0;
    for (LabelId y : ids) total += probs(static_cast<Eigen::Index>(i), y);
    if (total <= 0.0) continue;  // keep previous weights
    auto& wi = w.weights[i];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      wi[k] = probs(static_cast<Eigen::Index>(i), ids[k]) / total;
    }
  }
}

double optimistic_superset_loss(const CandidateSet& s,
                                const Eigen::VectorXd& probs) {
  if (s.empty()) throw ConfigError("optimistic loss on empty candidate set");
  return clamped_nll(probs(optimistic_pick(s, probs)));
}

double dataset_loss(const NeuralClassifier& model, const PartialDataset& d,
                    LossKind loss, const LabelWeights* weights) {
  if (loss == LossKind::ProgressiveWeighting && weights == nullptr) {
    throw ConfigError("progressive loss needs label weights");
  }
  auto idx = all_indices(d.size());
  return batch_gradient(model, d, idx, loss, weights).loss;
}

std::vector<double> dataset_loss_gradient(const NeuralClassifier& model,
                                          const PartialDataset& d,
                                          LossKind loss,
                                          const LabelWeights* weights) {
  if (loss == LossKind::ProgressiveWeighting && weights == nullptr) {
    throw ConfigError("progressive loss needs label weights");
  }
  auto idx = all_indices(d.size());
  BatchGrad g = batch_gradient(model, d, idx, loss, weights);
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& w = g.dw[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    for (Eigen::Index r = 0; r < g.db[l].size(); ++r) flat.push_back(g.db[l](r));
  }
  return flat;
}

TrainResult erm_fit(const PartialDataset& train, const ModelSpec& model_spec,
                    const TrainConfig& config) {
  config.validate();
  model_spec.validate();
  auto violations = validate_dataset(train);
  if (!violations.empty()) {
    throw ConfigError("invalid training dataset: " + violations.front());
  }
  if (train.size() == 0) throw ConfigError("empty training dataset");
  if (model_spec.input_dim != train.dim()) {
    throw DimensionError("model input_dim does not match dataset");
  }
  if (model_spec.num_classes != train.num_classes) {
    throw DimensionError("model num_classes does not match dataset");
  }

  NeuralClassifier model(model_spec, config.seed);
  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(model.weight(l).rows(),
                                          model.weight(l).cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(model.bias(l).size()));
  }

  LabelWeights label_weights = uniform_weights(train);
  Rng shuffle_rng(derive_seed(config.seed, SeedStream::Shuffle));
  auto order = all_indices(train.size());
  std::vector<double> epoch_losses;
  epoch_losses.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.learning_rate;
    if (config.lr_schedule == LrSchedule::CosineAnnealing) {
      lr *= 0.5 * (1.0 + std::cos(kPi * static_cast<double>(epoch) /
                                  static_cast<double>(config.epochs)));
    }

    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(order.size(),
                                 start + static_cast<std::size_t>(config.batch_size));
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
      BatchGrad g = batch_gradient(model, train, batch, config.loss,
                                   &label_weights);
      if (!std::isfinite(g.loss)) {
        throw DivergenceError("divergence at epoch " + std::to_string(epoch));
      }
      loss_sum += g.loss * static_cast<double>(batch.size());
      for (std::size_t l = 0; l < model.num_layers(); ++l) {
        Eigen::MatrixXd gw = g.dw[l] + config.weight_decay * model.weight(l);
        Eigen::VectorXd gb = g.db[l] + config.weight_decay * model.bias(l);
        vel_w[l] = config.momentum * vel_w[l] + gw;
        vel_b[l] = config.momentum * vel_b[l] + gb;
        model.weight(l) -= lr * vel_w[l];
        model.bias(l) -= lr * vel_b[l];
      }
    }
    epoch_losses.push_back(loss_sum / static_cast<double>(train.size()));

    if (config.loss == LossKind::ProgressiveWeighting) {
      Eigen::MatrixXd probs = model.predict_proba_batch(train.features);
      progressive_reweight(label_weights, train, probs);
    }
  }
  return TrainResult{std::move(model), std::move(epoch_losses)};
}

}  // namespace cpl
