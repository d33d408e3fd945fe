#include "doctest.h"

#include <cmath>
#include <numeric>

#include "cpl/datagen.hpp"
#include "cpl/errors.hpp"
#include "cpl/train.hpp"
#include "cpl/types.hpp"
#include "test_support.hpp"

using namespace cpl;
using cpl_test::probs3;

namespace {

ModelSpec softmax_spec(int dim, int k) {
  ModelSpec s;
  s.input_dim = dim;
  s.num_classes = k;
  return s;
}

GaussianMixtureSpec two_blob_spec(double separation, double sigma, int per_class,
                                  std::uint64_t seed) {
  GaussianMixtureSpec g;
  g.num_classes = 2;
  g.dim = 2;
  g.sigma = sigma;
  g.samples_per_class = per_class;
  g.seed = seed;
  Eigen::VectorXd m0(2), m1(2);
  m0 << -separation, 0.0;
  m1 << separation, 0.0;
  g.means = {m0, m1};
  return g;
}

// Independent reference: binary logistic regression fitted by plain
// full-batch gradient descent, used as an accuracy oracle.
double logistic_regression_accuracy(const PartialDataset& train,
                                    const PartialDataset& test) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(train.dim());
  double b = 0.0;
  const auto& y = *train.hidden_truths;
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(train.dim());
    double gb = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      Eigen::VectorXd x = train.features.row(i).transpose();
      double p = 1.0 / (1.0 + std::exp(-(w.dot(x) + b)));
      double err = p - double(y[i]);
      gw += err * x;
      gb += err;
    }
    w -= 0.1 / double(train.size()) * gw;
    b -= 0.1 / double(train.size()) * gb;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Eigen::VectorXd x = test.features.row(i).transpose();
    int pred = (w.dot(x) + b) > 0.0 ? 1 : 0;
    if (pred == (*test.hidden_truths)[i]) ++hits;
  }
  return double(hits) / double(test.size());
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.epochs = 1;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.learning_rate = 0.1;
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.momentum = 0.0;
  c.weight_decay = -1e-9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.weight_decay = 0.0;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("optimistic superset loss picks the best in-set label") {
  CHECK(optimistic_superset_loss(CandidateSet({0, 1}), probs3(0.6, 0.3, 0.1)) ==
        doctest::Approx(-std::log(0.6)));

  Eigen::VectorXd uniform4 = Eigen::VectorXd::Constant(4, 0.25);
  CHECK(optimistic_superset_loss(CandidateSet({0, 1, 2, 3}), uniform4) ==
        doctest::Approx(-std::log(0.25)));

  // singleton set reduces to ordinary cross-entropy
  CHECK(optimistic_superset_loss(CandidateSet({2}), probs3(0.1, 0.1, 0.8)) ==
        doctest::Approx(-std::log(0.8)));

  // all-zero in-set mass is clamped, never infinite
  double clamped =
      optimistic_superset_loss(CandidateSet({0, 1}), probs3(0.0, 0.0, 1.0));
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("progressive reweighting normalizes in-set probabilities") {
  PartialDataset d;
  d.num_classes = 3;
  d.features = Eigen::MatrixXd::Zero(3, 1);
  d.candidates = {CandidateSet({0, 1}), CandidateSet({0, 1, 2}),
                  CandidateSet({2})};
  d.ids = {0, 1, 2};

  LabelWeights w = uniform_weights(d);
  CHECK(w.weights[0] == std::vector<double>({0.5, 0.5}));
  CHECK(w.weights[2] == std::vector<double>({1.0}));

  Eigen::MatrixXd probs(3, 3);
  probs.row(0) << 0.8, 0.2, 0.0;
  probs.row(1) << 1.0 / 3, 1.0 / 3, 1.0 / 3;  // uniform: fixed point
  probs.row(2) << 0.9, 0.1, 0.0;              // in-set mass zero: keep previous

  progressive_reweight(w, d, probs);
  CHECK(w.weights[0][0] == doctest::Approx(0.8));
  CHECK(w.weights[0][1] == doctest::Approx(0.2));
  CHECK(w.weights[1][0] == doctest::Approx(1.0 / 3));
  CHECK(w.weights[1][2] == doctest::Approx(1.0 / 3));
  CHECK(w.weights[2] == std::vector<double>({1.0}));  // singleton stays 1
}

TEST_CASE("reweighted label weights stay a valid distribution") {
  GaussianMixtureSpec g;
  g.num_classes = 4;
  g.dim = 3;
  g.sigma = 1.0;
  g.samples_per_class = 30;
  g.seed = 3;
  g.means = random_means(4, 3, 2.0, 9);
  PartialDataset d = contaminate_random(generate_gaussian(g), 0.5, 17);

  NeuralClassifier f(ModelSpec{ModelKind::Mlp, {8}, 3, 4}, 5);
  LabelWeights w = uniform_weights(d);
  for (int round = 0; round < 3; ++round) {
    progressive_reweight(w, d, f.predict_proba_batch(d.features));
    for (std::size_t i = 0; i < d.size(); ++i) {
      REQUIRE(w.weights[i].size() == d.candidates[i].size());
      double sum = 0.0;
      for (double v : w.weights[i]) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("one SGD step matches the hand-derived update") {
  // Single precise instance, batch 1: every piece of the update rule is
  // computable in closed form from the initial weights.
  PartialDataset d;
  d.num_classes = 2;
  d.features.resize(1, 2);
  d.features << 0.5, -1.0;
  d.candidates = {CandidateSet::singleton(1)};
  d.hidden_truths = std::vector<LabelId>{1};
  d.ids = {0};

  TrainConfig c;
  c.loss = LossKind::OptimisticSuperset;
  c.epochs = 2;
  c.batch_size = 1;
  c.learning_rate = 0.5;
  c.momentum = 0.9;
  c.weight_decay = 0.1;
  c.lr_schedule = LrSchedule::CosineAnnealing;
  c.seed = 77;

  ModelSpec spec = softmax_spec(2, 2);
  NeuralClassifier expected(spec, c.seed);  // same init the trainer uses

  Eigen::VectorXd x = d.features.row(0).transpose();
  Eigen::MatrixXd vw = Eigen::MatrixXd::Zero(2, 2);
  Eigen::VectorXd vb = Eigen::VectorXd::Zero(2);
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    double lr = c.learning_rate * 0.5 *
                (1.0 + std::cos(M_PI * double(epoch) / double(c.epochs)));
    Eigen::VectorXd p = softmax(expected.weight(0) * x + expected.bias(0));
    Eigen::VectorXd delta = p;
    delta(1) -= 1.0;  // d(cross-entropy)/d(logits) for true label 1
    Eigen::MatrixXd gw = delta * x.transpose() + c.weight_decay * expected.weight(0);
    Eigen::VectorXd gb = delta + c.weight_decay * expected.bias(0);
    vw = c.momentum * vw + gw;
    vb = c.momentum * vb + gb;
    expected.weight(0) -= lr * vw;
    expected.bias(0) -= lr * vb;
  }

  TrainResult r = erm_fit(d, spec, c);
  CHECK(r.model.weight(0).isApprox(expected.weight(0), 1e-14));
  CHECK(r.model.bias(0).isApprox(expected.bias(0), 1e-14));
}

TEST_CASE("training is deterministic and epoch loss decreases") {
  GaussianMixtureSpec g;
  g.num_classes = 3;
  g.dim = 2;
  g.sigma = 1.0;
  g.samples_per_class = 150;
  g.seed = 21;
  g.means = circle_means(3, 2, 3.0);
  PartialDataset d = contaminate_random(generate_gaussian(g), 0.3, 4);

  TrainConfig c;
  c.epochs = 25;
  c.seed = 5;
  TrainResult a = erm_fit(d, softmax_spec(2, 3), c);
  TrainResult b = erm_fit(d, softmax_spec(2, 3), c);
  CHECK(a.model == b.model);
  CHECK(a.epoch_losses == b.epoch_losses);

  REQUIRE(a.epoch_losses.size() == 25);
  for (std::size_t e = 1; e < a.epoch_losses.size(); ++e) {
    // monotone up to mini-batch noise: 5% slack
    CHECK(a.epoch_losses[e] <= a.epoch_losses[e - 1] * 1.05);
  }
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());

  TrainConfig c2 = c;
  c2.seed = 6;
  TrainResult other = erm_fit(d, softmax_spec(2, 3), c2);
  CHECK_FALSE(a.model == other.model);
}

TEST_CASE("optimistic loss on singletons equals plain cross-entropy training") {
  GaussianMixtureSpec g = two_blob_spec(2.0, 1.0, 120, 31);
  PartialDataset d = generate_gaussian(g);  // precise: all singletons

  TrainConfig c;
  c.epochs = 15;
  c.seed = 9;
  c.loss = LossKind::OptimisticSuperset;
  TrainResult opt = erm_fit(d, softmax_spec(2, 2), c);
  c.loss = LossKind::ProgressiveWeighting;  // weights stay one-hot here
  TrainResult ce = erm_fit(d, softmax_spec(2, 2), c);

  // bitwise identical trajectories, not merely close
  auto pa = opt.model.parameters();
  auto pb = ce.model.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
  CHECK(opt.epoch_losses == ce.epoch_losses);
}

TEST_CASE("precise separable data reaches the reference accuracy") {
  GaussianMixtureSpec g = two_blob_spec(3.0, 0.8, 500, 13);
  PartialDataset all = generate_gaussian(g);
  SplitSpec sp;
  sp.seed = 2;
  SplitResult parts = split(all, sp);

  TrainConfig c;
  c.epochs = 40;
  c.seed = 3;
  TrainResult fit = erm_fit(parts.train, softmax_spec(2, 2), c);
  double acc = argmax_accuracy(fit.model, parts.test);
  double reference = logistic_regression_accuracy(parts.train, parts.test);

  CHECK(acc >= 0.95);
  CHECK(acc >= reference - 0.03);
}

TEST_CASE("fully ambiguous candidate sets give chance accuracy") {
  GaussianMixtureSpec g;
  g.num_classes = 3;
  g.dim = 2;
  g.sigma = 1.0;
  g.samples_per_class = 200;
  g.seed = 8;
  // identical means: features carry no class signal at all
  g.means = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2),
             Eigen::VectorXd::Zero(2)};
  PartialDataset all = contaminate_random(generate_gaussian(g), 1.0, 3);
  for (const auto& s : all.candidates) REQUIRE(s.size() == 3);

  SplitSpec sp;
  sp.seed = 4;
  SplitResult parts = split(all, sp);
  TrainConfig c;
  c.epochs = 30;
  c.seed = 12;
  TrainResult fit = erm_fit(parts.train, softmax_spec(2, 3), c);
  double acc = argmax_accuracy(fit.model, parts.test);
  CHECK(acc == doctest::Approx(1.0 / 3.0).epsilon(0.3));  // 1/3 +/- 0.1
}

TEST_CASE("partial labels still train a usable classifier") {
  GaussianMixtureSpec g;
  g.num_classes = 3;
  g.dim = 2;
  g.sigma = 1.0;
  g.samples_per_class = 400;
  g.seed = 15;
  g.means = circle_means(3, 2, 3.0);
  PartialDataset precise = generate_gaussian(g);
  PartialDataset partial = contaminate_random(precise, 0.3, 6);

  SplitSpec sp;
  sp.seed = 5;
  SplitResult precise_parts = split(precise, sp);
  SplitResult partial_parts = split(partial, sp);  // same index partition

  TrainConfig c;
  c.epochs = 40;
  c.seed = 7;
  c.loss = LossKind::ProgressiveWeighting;
  double pll_acc =
      argmax_accuracy(erm_fit(partial_parts.train, softmax_spec(2, 3), c).model,
                      partial_parts.test);
  double precise_acc =
      argmax_accuracy(erm_fit(precise_parts.train, softmax_spec(2, 3), c).model,
                      precise_parts.test);

  CHECK(pll_acc >= 0.85);
  CHECK(pll_acc >= precise_acc - 0.1);
}

TEST_CASE("NaN features abort with a divergence error naming the epoch") {
  PartialDataset d = cpl_test::tiny_precise_dataset(8, 2);
  d.features(3, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  try {
    erm_fit(d, softmax_spec(1, 2), c);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("gradients match finite differences on a small model") {
  GaussianMixtureSpec g;
  g.num_classes = 3;
  g.dim = 2;
  g.sigma = 1.0;
  g.samples_per_class = 8;
  g.seed = 40;
  g.means = circle_means(3, 2, 2.0);
  PartialDataset d = contaminate_random(generate_gaussian(g), 0.4, 41);

  NeuralClassifier model(ModelSpec{ModelKind::Mlp, {4}, 2, 3}, 19);
  LabelWeights w = uniform_weights(d);

  for (LossKind loss :
       {LossKind::OptimisticSuperset, LossKind::ProgressiveWeighting}) {
    const LabelWeights* wp =
        loss == LossKind::ProgressiveWeighting ? &w : nullptr;
    std::vector<double> grad = dataset_loss_gradient(model, d, loss, wp);
    std::vector<double> params = model.parameters();
    REQUIRE(grad.size() == params.size());

    NeuralClassifier probe = model;
    const double h = 1e-6;
    for (std::size_t j = 0; j < params.size(); j += 3) {
      std::vector<double> bumped = params;
      bumped[j] = params[j] + h;
      probe.set_parameters(bumped);
      double up = dataset_loss(probe, d, loss, wp);
      bumped[j] = params[j] - h;
      probe.set_parameters(bumped);
      double down = dataset_loss(probe, d, loss, wp);
      double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(fd - grad[j]) <= 1e-3 * std::max(1.0, std::abs(fd)));
    }
  }
}
