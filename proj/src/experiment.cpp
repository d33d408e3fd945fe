#include "cpl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cpl/dataset_io.hpp"
#include "cpl/errors.hpp"
#include "cpl/rng.hpp"

namespace cpl {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TrainConfig default_supermodel_train() {
  TrainConfig t;
  t.loss = LossKind::ProgressiveWeighting;  // precise data; loss is moot
  t.epochs = 20;
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  const int sources = (generator.has_value() ? 1 : 0) +
                      (dataset_file.has_value() ? 1 : 0);
  if (sources != 1) {
    throw ConfigError("exactly one of dataset.generator and dataset.file");
  }
  if (generator) generator->validate();
  if (dataset_file && dataset_file->empty()) {
    throw ConfigError("dataset.file is empty");
  }

  if (contamination.kind == ContaminationKind::Random &&
      !(contamination.p > 0.0 && contamination.p <= 1.0)) {
    throw ConfigError("contamination p must be in (0,1]");
  }
  if (supermodel_train) {
    if (contamination.kind != ContaminationKind::InstanceDependent) {
      throw ConfigError(
          "supermodel settings require instance_dependent contamination");
    }
    supermodel_train->validate();
  }

  if (model_kind == ModelKind::SoftmaxRegression && !hidden_widths.empty()) {
    throw ConfigError("softmax model takes no hidden widths");
  }
  if (model_kind == ModelKind::Mlp) {
    if (hidden_widths.empty()) throw ConfigError("mlp needs hidden widths");
    for (int w : hidden_widths) {
      if (w < 1) throw ConfigError("hidden width < 1");
    }
  }
  train.validate();

  if (methods.empty()) throw ConfigError("no calibration methods configured");
  std::set<std::string> names;
  for (const auto& m : methods) {
    m.validate();
    if (!names.insert(m.name()).second) {
      throw ConfigError("duplicate calibration method '" + m.name() + "'");
    }
  }

  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must be in (0,1)");
  }
  split.validate();

  if (seeds.empty()) throw ConfigError("no seeds configured");
  std::set<std::uint64_t> unique_seeds(seeds.begin(), seeds.end());
  if (unique_seeds.size() != seeds.size()) {
    throw ConfigError("duplicate seeds configured");
  }
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
}

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

const json& expect_object(const json& v, const std::string& what) {
  if (!v.is_object()) throw ConfigError(what + " must be an object");
  return v;
}

int get_int(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw ConfigError(what + " must be an integer");
  return v.get<int>();
}

double get_num(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError(what + " must be a number");
  return v.get<double>();
}

std::string get_str(const json& v, const std::string& what) {
  if (!v.is_string()) throw ConfigError(what + " must be a string");
  return v.get<std::string>();
}

TrainConfig parse_train(const json& obj, const std::string& where) {
  check_keys(expect_object(obj, where), where,
             {"loss", "epochs", "batch_size", "learning_rate", "momentum",
              "weight_decay", "lr_schedule"});
  TrainConfig t;
  if (obj.contains("loss")) {
    const std::string s = get_str(obj["loss"], where + ".loss");
    if (s == "optimistic") {
      t.loss = LossKind::OptimisticSuperset;
    } else if (s == "progressive") {
      t.loss = LossKind::ProgressiveWeighting;
    } else {
      throw ConfigError("unknown loss '" + s + "'");
    }
  }
  if (obj.contains("epochs")) t.epochs = get_int(obj["epochs"], where + ".epochs");
  if (obj.contains("batch_size")) {
    t.batch_size = get_int(obj["batch_size"], where + ".batch_size");
  }
  if (obj.contains("learning_rate")) {
    t.learning_rate = get_num(obj["learning_rate"], where + ".learning_rate");
  }
  if (obj.contains("momentum")) {
    t.momentum = get_num(obj["momentum"], where + ".momentum");
  }
  if (obj.contains("weight_decay")) {
    t.weight_decay = get_num(obj["weight_decay"], where + ".weight_decay");
  }
  if (obj.contains("lr_schedule")) {
    const std::string s = get_str(obj["lr_schedule"], where + ".lr_schedule");
    if (s == "constant") {
      t.lr_schedule = LrSchedule::Constant;
    } else if (s == "cosine") {
      t.lr_schedule = LrSchedule::CosineAnnealing;
    } else {
      throw ConfigError("unknown lr_schedule '" + s + "'");
    }
  }
  return t;
}

GaussianMixtureSpec parse_generator(const json& obj) {
  check_keys(expect_object(obj, "dataset.generator"), "dataset.generator",
             {"num_classes", "dim", "samples_per_class", "sigma", "seed",
              "means", "mean_radius"});
  GaussianMixtureSpec g;
  if (!obj.contains("num_classes") || !obj.contains("dim") ||
      !obj.contains("samples_per_class")) {
    throw ConfigError(
        "dataset.generator needs num_classes, dim, samples_per_class");
  }
  g.num_classes = get_int(obj["num_classes"], "num_classes");
  g.dim = get_int(obj["dim"], "dim");
  g.samples_per_class = get_int(obj["samples_per_class"], "samples_per_class");
  if (obj.contains("sigma")) g.sigma = get_num(obj["sigma"], "sigma");
  if (obj.contains("seed")) {
    g.seed = static_cast<std::uint64_t>(get_int(obj["seed"], "seed"));
  }
  if (obj.contains("means") && obj.contains("mean_radius")) {
    throw ConfigError("means and mean_radius are mutually exclusive");
  }
  if (obj.contains("means")) {
    if (!obj["means"].is_array()) throw ConfigError("means must be an array");
    for (const auto& row : obj["means"]) {
      if (!row.is_array()) throw ConfigError("means rows must be arrays");
      Eigen::VectorXd m(row.size());
      Eigen::Index c = 0;
      for (const auto& v : row) m(c++) = get_num(v, "means entry");
      g.means.push_back(std::move(m));
    }
  } else {
    double radius = 3.0;
    if (obj.contains("mean_radius")) {
      radius = get_num(obj["mean_radius"], "mean_radius");
    }
    if (g.num_classes >= 1 && g.dim >= 2) {
      g.means = circle_means(g.num_classes, g.dim, radius);
    }
  }
  return g;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_object(root, "config");
  check_keys(root, "config",
             {"dataset", "contamination", "model", "train", "supermodel",
              "methods", "epsilon", "split", "seeds", "output_dir"});

  ExperimentConfig cfg;
  cfg.methods = {CalibrationMethod::parse("max"), CalibrationMethod::parse("all"),
                 CalibrationMethod::parse("mean"), CalibrationMethod::parse("min"),
                 CalibrationMethod::parse("mu:0.5"),
                 CalibrationMethod::parse("oracle")};
  cfg.seeds = {1, 2, 3, 4, 5};

  if (!root.contains("dataset")) throw ConfigError("missing dataset section");
  const json& ds = expect_object(root["dataset"], "dataset");
  check_keys(ds, "dataset", {"generator", "file"});
  if (ds.contains("generator")) cfg.generator = parse_generator(ds["generator"]);
  if (ds.contains("file")) cfg.dataset_file = get_str(ds["file"], "dataset.file");

  if (root.contains("contamination")) {
    const json& c = expect_object(root["contamination"], "contamination");
    check_keys(c, "contamination", {"kind", "p"});
    if (!c.contains("kind")) throw ConfigError("contamination needs a kind");
    const std::string kind = get_str(c["kind"], "contamination.kind");
    if (kind == "none") {
      cfg.contamination.kind = ContaminationKind::None;
    } else if (kind == "random") {
      cfg.contamination.kind = ContaminationKind::Random;
    } else if (kind == "instance_dependent") {
      cfg.contamination.kind = ContaminationKind::InstanceDependent;
    } else {
      throw ConfigError("unknown contamination kind '" + kind + "'");
    }
    if (c.contains("p")) {
      if (cfg.contamination.kind != ContaminationKind::Random) {
        throw ConfigError("contamination p only applies to kind random");
      }
      cfg.contamination.p = get_num(c["p"], "contamination.p");
    }
  }

  if (root.contains("model")) {
    const json& m = expect_object(root["model"], "model");
    check_keys(m, "model", {"kind", "hidden"});
    if (m.contains("kind")) {
      const std::string kind = get_str(m["kind"], "model.kind");
      if (kind == "softmax") {
        cfg.model_kind = ModelKind::SoftmaxRegression;
      } else if (kind == "mlp") {
        cfg.model_kind = ModelKind::Mlp;
      } else {
        throw ConfigError("unknown model kind '" + kind + "'");
      }
    }
    if (m.contains("hidden")) {
      if (!m["hidden"].is_array()) throw ConfigError("model.hidden must be an array");
      for (const auto& v : m["hidden"]) {
        cfg.hidden_widths.push_back(get_int(v, "model.hidden entry"));
      }
    }
  }

  if (root.contains("train")) cfg.train = parse_train(root["train"], "train");
  if (root.contains("supermodel")) {
    cfg.supermodel_train = parse_train(root["supermodel"], "supermodel");
  }

  if (root.contains("methods")) {
    if (!root["methods"].is_array()) {
      throw ConfigError("methods must be an array");
    }
    cfg.methods.clear();
    for (const auto& v : root["methods"]) {
      cfg.methods.push_back(CalibrationMethod::parse(get_str(v, "methods entry")));
    }
  }

  if (root.contains("epsilon")) cfg.epsilon = get_num(root["epsilon"], "epsilon");

  if (root.contains("split")) {
    const json& s = expect_object(root["split"], "split");
    check_keys(s, "split", {"train", "calib", "test"});
    if (!(s.contains("train") && s.contains("calib") && s.contains("test"))) {
      throw ConfigError("split needs train, calib and test fractions");
    }
    cfg.split.train_fraction = get_num(s["train"], "split.train");
    cfg.split.calib_fraction = get_num(s["calib"], "split.calib");
    cfg.split.test_fraction = get_num(s["test"], "split.test");
  }

  if (root.contains("seeds")) {
    if (!root["seeds"].is_array()) throw ConfigError("seeds must be an array");
    cfg.seeds.clear();
    for (const auto& v : root["seeds"]) {
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("seeds must be nonnegative integers");
      }
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }

  if (root.contains("output_dir")) {
    cfg.output_dir = get_str(root["output_dir"], "output_dir");
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path + ": cannot open");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_experiment_config(buf.str());
}

namespace {

ordered_json config_json(const ExperimentConfig& cfg) {
  ordered_json j;
  ordered_json ds;
  if (cfg.generator) {
    const auto& g = *cfg.generator;
    ordered_json gj;
    gj["num_classes"] = g.num_classes;
    gj["dim"] = g.dim;
    gj["samples_per_class"] = g.samples_per_class;
    gj["sigma"] = g.sigma;
    gj["seed"] = g.seed;
    ordered_json means = ordered_json::array();
    for (const auto& m : g.means) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index c = 0; c < m.size(); ++c) row.push_back(m(c));
      means.push_back(std::move(row));
    }
    gj["means"] = std::move(means);
    ds["generator"] = std::move(gj);
  } else {
    ds["file"] = *cfg.dataset_file;
  }
  j["dataset"] = std::move(ds);

  ordered_json cj;
  switch (cfg.contamination.kind) {
    case ContaminationKind::None:
      cj["kind"] = "none";
      break;
    case ContaminationKind::Random:
      cj["kind"] = "random";
      cj["p"] = cfg.contamination.p;
      break;
    case ContaminationKind::InstanceDependent:
      cj["kind"] = "instance_dependent";
      break;
  }
  j["contamination"] = std::move(cj);

  ordered_json mj;
  mj["kind"] = cfg.model_kind == ModelKind::Mlp ? "mlp" : "softmax";
  if (cfg.model_kind == ModelKind::Mlp) mj["hidden"] = cfg.hidden_widths;
  j["model"] = std::move(mj);

  auto train_json = [](const TrainConfig& t) {
    ordered_json tj;
    tj["loss"] = t.loss == LossKind::OptimisticSuperset ? "optimistic"
                                                        : "progressive";
    tj["epochs"] = t.epochs;
    tj["batch_size"] = t.batch_size;
    tj["learning_rate"] = t.learning_rate;
    tj["momentum"] = t.momentum;
    tj["weight_decay"] = t.weight_decay;
    tj["lr_schedule"] =
        t.lr_schedule == LrSchedule::Constant ? "constant" : "cosine";
    return tj;
  };
  j["train"] = train_json(cfg.train);
  if (cfg.supermodel_train) j["supermodel"] = train_json(*cfg.supermodel_train);

  ordered_json methods = ordered_json::array();
  for (const auto& m : cfg.methods) methods.push_back(m.name());
  j["methods"] = std::move(methods);

  j["epsilon"] = cfg.epsilon;
  ordered_json sj;
  sj["train"] = cfg.split.train_fraction;
  sj["calib"] = cfg.split.calib_fraction;
  sj["test"] = cfg.split.test_fraction;
  j["split"] = std::move(sj);
  j["seeds"] = cfg.seeds;
  // The output destination is deliberately not echoed: reports must be
  // byte-identical no matter where they are written.
  return j;
}

PartialDataset materialize_dataset(const ExperimentConfig& cfg,
                                   std::uint64_t run_seed) {
  if (cfg.generator) {
    // Each run seed gets an independent draw; the configured generator seed
    // still distinguishes otherwise identical configs.
    GaussianMixtureSpec g = *cfg.generator;
    g.seed = derive_seed(derive_seed(run_seed, SeedStream::Generate), g.seed);
    return generate_gaussian(g);
  }
  return load_dataset(*cfg.dataset_file);
}

SeedRun run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                     std::vector<std::string>* failures) {
  SeedRun run;
  run.seed = seed;

  PartialDataset base = materialize_dataset(cfg, seed);

  PartialDataset data;
  switch (cfg.contamination.kind) {
    case ContaminationKind::None:
      data = std::move(base);
      break;
    case ContaminationKind::Random:
      data = contaminate_random(base, cfg.contamination.p,
                                derive_seed(seed, SeedStream::Contaminate));
      break;
    case ContaminationKind::InstanceDependent: {
      TrainConfig sc = cfg.supermodel_train.value_or(default_supermodel_train());
      sc.seed = derive_seed(seed, SeedStream::Supermodel);
      SupermodelResult sm = train_supermodel(base, sc);
      data = contaminate_instance_dependent(
          base, sm.model, derive_seed(seed, SeedStream::Contaminate));
      break;
    }
  }
  run.oracle = data.oracle_mode();
  run.mean_candidate_set_size = data.mean_candidate_set_size();

  SplitSpec sp = cfg.split;
  sp.seed = derive_seed(seed, SeedStream::Split);
  SplitResult parts = split(data, sp);

  ModelSpec ms;
  ms.kind = cfg.model_kind;
  ms.hidden_widths = cfg.hidden_widths;
  ms.input_dim = data.dim();
  ms.num_classes = data.num_classes;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, SeedStream::Train);
  TrainResult fit = erm_fit(parts.train, ms, tc);

  const Eigen::MatrixXd calib_probs =
      fit.model.predict_proba_batch(parts.calib.features);
  const Eigen::MatrixXd test_probs =
      fit.model.predict_proba_batch(parts.test.features);

  run.train_accuracy =
      run.oracle ? argmax_accuracy(fit.model, parts.train) : kNaN;
  run.test_accuracy = run.oracle ? argmax_accuracy(fit.model, parts.test) : kNaN;

  for (const CalibrationMethod& method : cfg.methods) {
    ScoreSet e = score_set_from_probs(parts.calib, calib_probs, method);
    CriticalScore q = critical_score(e, cfg.epsilon);

    std::vector<PredictionSet> preds;
    preds.reserve(parts.test.size());
    for (std::size_t i = 0; i < parts.test.size(); ++i) {
      preds.push_back(prediction_set_from_probs(
          test_probs.row(static_cast<Eigen::Index>(i)).transpose(),
          parts.test.ids[i], q));
    }

    MethodMetrics mm;
    mm.method = method;
    mm.seed = seed;
    mm.n_test = parts.test.size();
    mm.efficiency = efficiency(preds);
    mm.critical = q.value;
    if (run.oracle) mm.coverage = coverage(preds, *parts.test.hidden_truths);
    run.metrics.push_back(mm);
    run.predictions.push_back(std::move(preds));
  }

  if (run.oracle) {
    run.audit =
        theorem_audit(parts.calib, fit.model, parts.test, cfg.epsilon, cfg.methods);
    if (failures) {
      for (const MethodAudit& a : run.audit->methods) {
        if (!a.hard_failure) continue;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "seed %llu method %s: guarantee violated "
                      "(q_method=%.17g q_oracle=%.17g containment=%d)",
                      static_cast<unsigned long long>(seed),
                      a.method.name().c_str(), a.q_method, a.q_oracle,
                      a.containment_held ? 1 : 0);
        failures->push_back(buf);
      }
    }
  }
  return run;
}

ExperimentReport run_experiment_impl(const ExperimentConfig& config,
                                     bool throw_on_violation) {
  config.validate();
  ExperimentReport report;
  report.config = config;

  for (std::uint64_t seed : config.seeds) {
    report.runs.push_back(run_one_seed(config, seed, &report.invariant_failures));
  }

  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    MethodAggregate agg;
    agg.method = config.methods[m];
    std::vector<double> covs;
    std::vector<double> effs;
    for (const SeedRun& run : report.runs) {
      const MethodMetrics& mm = run.metrics[m];
      if (!std::isnan(mm.coverage)) covs.push_back(mm.coverage);
      effs.push_back(mm.efficiency);
    }
    agg.coverage = summarize(covs);
    if (covs.empty()) agg.coverage.mean = kNaN;
    agg.efficiency = summarize(effs);
    agg.num_seeds = report.runs.size();
    report.aggregates.push_back(agg);
  }

  std::vector<double> css;
  for (const SeedRun& run : report.runs) {
    css.push_back(run.mean_candidate_set_size);
  }
  report.css = summarize(css);

  report.invariants_ok = report.invariant_failures.empty();
  if (!report.invariants_ok && throw_on_violation) {
    std::string msg = "validity guarantee violated:";
    for (const auto& f : report.invariant_failures) msg += "\n  " + f;
    throw InvariantError(msg);
  }
  return report;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  return run_experiment_impl(config, /*throw_on_violation=*/true);
}

ExperimentReport run_experiment_no_throw(const ExperimentConfig& config) {
  return run_experiment_impl(config, /*throw_on_violation=*/false);
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  return config_json(config).dump(2) + "\n";
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// CSV cell for a possibly-unavailable (non-oracle) or infinite value.
std::string cell(double v, const char* spec) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt(spec, v);
}

ordered_json stat_json(const SummaryStat& s) {
  ordered_json j;
  j["mean"] = s.mean;
  j["stddev"] = s.stddev;
  return j;
}

}  // namespace

std::string metrics_csv(const ExperimentReport& report) {
  std::string out =
      "seed,method,epsilon,coverage,efficiency,critical_score,n_test,"
      "train_accuracy,test_accuracy\n";
  for (const SeedRun& run : report.runs) {
    for (const MethodMetrics& mm : run.metrics) {
      out += std::to_string(mm.seed);
      out += ',' + mm.method.name();
      out += ',' + fmt("%.6g", report.config.epsilon);
      out += ',' + cell(mm.coverage, "%.6f");
      out += ',' + cell(mm.efficiency, "%.6f");
      out += ',' + cell(mm.critical, "%.9g");
      out += ',' + std::to_string(mm.n_test);
      out += ',' + cell(run.train_accuracy, "%.6f");
      out += ',' + cell(run.test_accuracy, "%.6f");
      out += '\n';
    }
  }
  return out;
}

std::string predictions_csv(const SeedRun& run, double epsilon) {
  std::string out = "instance_id,epsilon,method,critical_score,set_size,members\n";
  for (std::size_t m = 0; m < run.metrics.size(); ++m) {
    const std::string method = run.metrics[m].method.name();
    for (const PredictionSet& p : run.predictions[m]) {
      out += std::to_string(p.instance_id);
      out += ',' + fmt("%.6g", epsilon);
      out += ',' + method;
      out += ',' + cell(p.critical.value, "%.9g");
      out += ',' + std::to_string(p.size());
      out += ',';
      for (std::size_t k = 0; k < p.members.size(); ++k) {
        if (k > 0) out += ';';
        out += std::to_string(p.members[k]);
      }
      out += '\n';
    }
  }
  return out;
}

std::string summary_json(const ExperimentReport& report) {
  ordered_json j;
  j["config"] = config_json(report.config);
  j["num_seeds"] = report.runs.size();
  j["stddev_convention"] = "population";
  j["mean_candidate_set_size"] = stat_json(report.css);

  std::vector<double> train_acc;
  std::vector<double> test_acc;
  for (const SeedRun& run : report.runs) {
    if (!std::isnan(run.train_accuracy)) train_acc.push_back(run.train_accuracy);
    if (!std::isnan(run.test_accuracy)) test_acc.push_back(run.test_accuracy);
  }
  j["train_accuracy"] =
      train_acc.empty() ? ordered_json() : stat_json(summarize(train_acc));
  j["test_accuracy"] =
      test_acc.empty() ? ordered_json() : stat_json(summarize(test_acc));

  ordered_json methods = ordered_json::array();
  for (std::size_t m = 0; m < report.aggregates.size(); ++m) {
    const MethodAggregate& agg = report.aggregates[m];
    ordered_json mj;
    mj["method"] = agg.method.name();
    mj["coverage"] =
        std::isnan(agg.coverage.mean) ? ordered_json() : stat_json(agg.coverage);
    mj["efficiency"] = stat_json(agg.efficiency);
    std::vector<double> criticals;
    bool any_infinite = false;
    for (const SeedRun& run : report.runs) {
      const double q = run.metrics[m].critical;
      if (std::isinf(q)) {
        any_infinite = true;
      } else {
        criticals.push_back(q);
      }
    }
    mj["critical_score"] =
        criticals.empty() ? ordered_json() : stat_json(summarize(criticals));
    mj["any_infinite_critical"] = any_infinite;
    methods.push_back(std::move(mj));
  }
  j["methods"] = std::move(methods);

  ordered_json audit;
  std::size_t oracle_runs = 0;
  std::size_t mean_ok = 0;
  std::size_t all_ok = 0;
  for (const SeedRun& run : report.runs) {
    if (!run.audit) continue;
    ++oracle_runs;
    if (run.audit->mean_condition.all_satisfied) ++mean_ok;
    if (run.audit->all_condition.all_satisfied) ++all_ok;
  }
  audit["oracle_runs"] = oracle_runs;
  audit["mean_condition_runs_satisfied"] = mean_ok;
  audit["all_condition_runs_satisfied"] = all_ok;
  audit["invariants_ok"] = report.invariants_ok;
  audit["failures"] = report.invariant_failures;
  j["audit"] = std::move(audit);

  return j.dump(2) + "\n";
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os << text;
  os.flush();
  if (!os) throw IoError(path.string() + ": write failed");
}

}  // namespace

void write_report_files(const ExperimentReport& report,
                        const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir + ": cannot create directory");

  const std::filesystem::path dir(out_dir);
  write_text_file(dir / "metrics.csv", metrics_csv(report));
  write_text_file(dir / "summary.json", summary_json(report));
  for (const SeedRun& run : report.runs) {
    write_text_file(dir / ("predictions_seed" + std::to_string(run.seed) + ".csv"),
                    predictions_csv(run, report.config.epsilon));
  }
}

}  // namespace cpl
