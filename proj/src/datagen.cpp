#include "cpl/datagen.hpp"

#include <cmath>
#include <string>

#include "cpl/errors.hpp"
#include "cpl/rng.hpp"

namespace cpl {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_precise_oracle(const PartialDataset& d, const char* op) {
  if (!d.oracle_mode()) {
    throw OracleError(std::string(op) + " requires an oracle-mode dataset");
  }
  if (!d.precise()) {
    throw ConfigError(std::string(op) + " requires a precise dataset");
  }
  if (d.num_classes < 2) throw ConfigError("K < 2");
}

}  // namespace

void GaussianMixtureSpec::validate() const {
  if (num_classes < 2) throw ConfigError("K < 2");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (sigma <= 0.0) throw ConfigError("sigma must be > 0");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (means.size() != static_cast<std::size_t>(num_classes)) {
    throw ConfigError("need one mean per class");
  }
  for (const auto& m : means) {
    if (m.size() != dim) throw ConfigError("mean dimension mismatch");
  }
}

std::vector<Eigen::VectorXd> circle_means(int num_classes, int dim, double radius) {
  if (dim < 2) throw ConfigError("circle means need dim >= 2");
  std::vector<Eigen::VectorXd> means;
  means.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
    double angle = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(num_classes);
    m(0) = radius * std::cos(angle);
    m(1) = radius * std::sin(angle);
    means.push_back(std::move(m));
  }
  return means;
}

std::vector<Eigen::VectorXd> random_means(int num_classes, int dim, double scale,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> means;
  means.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd m(dim);
    for (int j = 0; j < dim; ++j) m(j) = rng.normal(0.0, scale);
    means.push_back(std::move(m));
  }
  return means;
}

PartialDataset generate_gaussian(const GaussianMixtureSpec& spec) {
  spec.validate();
  std::size_t n = static_cast<std::size_t>(spec.num_classes) *
                  static_cast<std::size_t>(spec.samples_per_class);
  PartialDataset d;
  d.num_classes = spec.num_classes;
  d.features.resize(static_cast<Eigen::Index>(n), spec.dim);
  d.candidates.reserve(n);
  d.ids.reserve(n);
  d.hidden_truths.emplace();
  d.hidden_truths->reserve(n);

  std::size_t i = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++i) {
      Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
      for (int j = 0; j < spec.dim; ++j) {
        d.features(static_cast<Eigen::Index>(i), j) =
            spec.means[static_cast<std::size_t>(c)](j) + spec.sigma * rng.normal();
      }
      d.candidates.push_back(CandidateSet::singleton(static_cast<LabelId>(c)));
      d.hidden_truths->push_back(static_cast<LabelId>(c));
      d.ids.push_back(static_cast<std::int64_t>(i));
    }
  }
  return d;
}

PartialDataset contaminate_random(const PartialDataset& d, double p,
                                  std::uint64_t seed) {
  require_precise_oracle(d, "random contamination");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("contamination p must be in (0,1]");

  PartialDataset out = d;
  int k = d.num_classes;
  for (std::size_t i = 0; i < d.size(); ++i) {
    LabelId truth = (*d.hidden_truths)[i];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<LabelId> members{truth};
    for (LabelId y = 0; y < k; ++y) {
      if (y == truth) continue;
      if (rng.bernoulli(p)) members.push_back(y);
    }
    if (members.size() == 1) {
      // forced add: pick uniformly among the K-1 false labels
      auto r = static_cast<LabelId>(rng.uniform_index(static_cast<std::size_t>(k - 1)));
      members.push_back(r < truth ? r : r + 1);
    }
    out.candidates[i] = CandidateSet(std::move(members));
  }
  return out;
}

Eigen::VectorXd instance_inclusion_probabilities(const Eigen::VectorXd& probs,
                                                 LabelId truth) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(probs.size());
  double max_false = 0.0;
  for (Eigen::Index y = 0; y < probs.size(); ++y) {
    if (static_cast<LabelId>(y) != truth) max_false = std::max(max_false, probs(y));
  }
  if (max_false <= 0.0) return p;
  for (Eigen::Index y = 0; y < probs.size(); ++y) {
    if (static_cast<LabelId>(y) != truth) p(y) = probs(y) / max_false;
  }
  return p;
}

PartialDataset contaminate_instance_dependent(const PartialDataset& d,
                                              const ProbabilisticClassifier& supermodel,
                                              std::uint64_t seed) {
  require_precise_oracle(d, "instance-dependent contamination");
  if (supermodel.num_classes() != d.num_classes) {
    throw DimensionError("supermodel class count does not match dataset");
  }

  PartialDataset out = d;
  int k = d.num_classes;
  for (std::size_t i = 0; i < d.size(); ++i) {
    LabelId truth = (*d.hidden_truths)[i];
    Eigen::VectorXd probs =
        supermodel.predict_proba(d.features.row(static_cast<Eigen::Index>(i)).transpose());
    Eigen::VectorXd inc = instance_inclusion_probabilities(probs, truth);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<LabelId> members{truth};
    if (inc.maxCoeff() <= 0.0) {
      // supermodel puts zero mass on every false label: forced-add rule
      auto r = static_cast<LabelId>(rng.uniform_index(static_cast<std::size_t>(k - 1)));
      members.push_back(r < truth ? r : r + 1);
    } else {
      // bernoulli(1) always fires, so the argmax false label is always kept
      for (LabelId y = 0; y < k; ++y) {
        if (y == truth) continue;
        if (rng.bernoulli(inc(y))) members.push_back(y);
      }
    }
    out.candidates[i] = CandidateSet(std::move(members));
  }
  return out;
}

SupermodelResult train_supermodel(const PartialDataset& d, const TrainConfig& config) {
  require_precise_oracle(d, "supermodel training");
  ModelSpec spec;
  spec.kind = ModelKind::Mlp;
  spec.hidden_widths = {16};
  spec.input_dim = d.dim();
  spec.num_classes = d.num_classes;
  TrainResult r = erm_fit(d, spec, config);
  double acc = argmax_accuracy(r.model, d);
  return SupermodelResult{std::move(r.model), acc};
}

}  // namespace cpl
