#include "cpl/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cpl/errors.hpp"
#include "cpl/rng.hpp"

namespace cpl {

void ModelSpec::validate() const {
  if (num_classes < 2) throw ConfigError("K < 2");
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (kind == ModelKind::Mlp) {
    if (hidden_widths.empty()) throw ConfigError("MLP needs at least one hidden layer");
    for (int w : hidden_widths) {
      if (w < 1) throw ConfigError("hidden widths must be positive");
    }
  }
}

namespace {

std::vector<int> layer_dims(const ModelSpec& spec) {
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  if (spec.kind == ModelKind::Mlp) {
    dims.insert(dims.end(), spec.hidden_widths.begin(), spec.hidden_widths.end());
  }
  dims.push_back(spec.num_classes);
  return dims;
}

}  // namespace

NeuralClassifier::NeuralClassifier(const ModelSpec& spec, std::uint64_t seed)
    : spec_(spec), init_seed_(seed) {
  spec_.validate();
  if (spec_.kind == ModelKind::SoftmaxRegression) spec_.hidden_widths.clear();
  auto dims = layer_dims(spec_);
  Rng rng(derive_seed(seed, SeedStream::Init));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    int in = dims[l];
    int out = dims[l + 1];
    double scale = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-scale, scale);
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(out));
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

Eigen::VectorXd NeuralClassifier::logits(const Eigen::VectorXd& x) const {
  if (x.size() != spec_.input_dim) {
    throw DimensionError("feature dimension " + std::to_string(x.size()) +
                         " does not match model input " +
                         std::to_string(spec_.input_dim));
  }
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    if (l + 1 < weights_.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::VectorXd NeuralClassifier::predict_proba(const Eigen::VectorXd& x) const {
  return softmax(logits(x));
}

Eigen::MatrixXd NeuralClassifier::predict_proba_batch(const Eigen::MatrixXd& xs) const {
  Eigen::MatrixXd out(xs.rows(), spec_.num_classes);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    out.row(i) = predict_proba(xs.row(i).transpose()).transpose();
  }
  return out;
}

std::vector<double> NeuralClassifier::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    const auto& b = biases_[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) flat.push_back(b(r));
  }
  return flat;
}

void NeuralClassifier::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("parameter vector size mismatch");
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    }
    auto& b = biases_[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = flat[k++];
  }
}

std::size_t NeuralClassifier::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size()) +
         static_cast<std::size_t>(biases_[l].size());
  }
  return n;
}

bool NeuralClassifier::operator==(const NeuralClassifier& other) const {
  if (weights_.size() != other.weights_.size()) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != other.weights_[l].rows() ||
        weights_[l].cols() != other.weights_[l].cols())
      return false;
    if (weights_[l] != other.weights_[l]) return false;
    if (biases_[l] != other.biases_[l]) return false;
  }
  return true;
}

double argmax_accuracy(const ProbabilisticClassifier& f, const PartialDataset& d) {
  if (!d.oracle_mode()) {
    throw OracleError("accuracy requires an oracle-mode dataset");
  }
  if (d.size() == 0) throw ConfigError("accuracy on empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    Eigen::VectorXd p =
        f.predict_proba(d.features.row(static_cast<Eigen::Index>(i)).transpose());
    Eigen::Index best;
    p.maxCoeff(&best);
    if (static_cast<LabelId>(best) == (*d.hidden_truths)[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

namespace {

constexpr const char* kCheckpointMagic = "cpl-model v1";

std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

}  // namespace

void write_checkpoint(const NeuralClassifier& model, std::ostream& os) {
  const auto& spec = model.spec();
  os << kCheckpointMagic << "\n";
  os << "kind=" << (spec.kind == ModelKind::Mlp ? "mlp" : "softmax") << "\n";
  os << "input_dim=" << spec.input_dim << "\n";
  os << "num_classes=" << spec.num_classes << "\n";
  os << "hidden=";
  for (std::size_t i = 0; i < spec.hidden_widths.size(); ++i) {
    if (i) os << ",";
    os << spec.hidden_widths[i];
  }
  os << "\n";
  os << "seed=" << model.init_seed() << "\n";
  auto flat = model.parameters();
  os << "params=" << flat.size() << "\n";
  for (double v : flat) os << hex_double(v) << "\n";
}

NeuralClassifier read_checkpoint(std::istream& is) {
  std::string line;
  auto next = [&is, &line](const std::string& what) -> std::string& {
    if (!std::getline(is, line)) throw IoError("checkpoint truncated: " + what);
    return line;
  };
  auto field = [&next](const std::string& key) {
    std::string& l = next(key);
    if (l.rfind(key + "=", 0) != 0) throw IoError("checkpoint: expected " + key);
    return l.substr(key.size() + 1);
  };

  if (next("magic") != kCheckpointMagic) throw IoError("not a cpl checkpoint");
  ModelSpec spec;
  std::string kind = field("kind");
  if (kind == "mlp") {
    spec.kind = ModelKind::Mlp;
  } else if (kind == "softmax") {
    spec.kind = ModelKind::SoftmaxRegression;
  } else {
    throw IoError("checkpoint: unknown model kind '" + kind + "'");
  }
  spec.input_dim = std::stoi(field("input_dim"));
  spec.num_classes = std::stoi(field("num_classes"));
  std::string hidden = field("hidden");
  std::stringstream hs(hidden);
  std::string tok;
  while (std::getline(hs, tok, ',')) {
    if (!tok.empty()) spec.hidden_widths.push_back(std::stoi(tok));
  }
  std::uint64_t seed = std::stoull(field("seed"));
  std::size_t count = std::stoul(field("params"));

  NeuralClassifier model(spec, seed);
  if (model.parameter_count() != count) {
    throw IoError("checkpoint parameter count mismatch");
  }
  std::vector<double> flat;
  flat.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    flat.push_back(std::strtod(next("parameter").c_str(), nullptr));
  }
  model.set_parameters(flat);
  return model;
}

void save_checkpoint(const NeuralClassifier& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  write_checkpoint(model, os);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

NeuralClassifier load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

}  // namespace cpl
