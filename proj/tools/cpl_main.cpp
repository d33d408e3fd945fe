// cpl: conformal prediction with partially labeled calibration data.
//
// Subcommands:
//   generate    materialize a synthetic dataset (precise + contaminated)
//   run         full pipeline: contaminate, split, train, calibrate, report
//   audit       per-seed report on validity preconditions and containment
//   lemma-test  randomized trials of the rank-shift lemma
//
// Exit codes: 0 success, 2 configuration error, 3 violated guarantee or
// diverged training, 4 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpl/dataset_io.hpp"
#include "cpl/errors.hpp"
#include "cpl/experiment.hpp"
#include "cpl/rng.hpp"

namespace {

using cpl::ExperimentConfig;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed_override = -1;
  double epsilon_override = -1.0;
};

void add_common(CLI::App* cmd, CommonFlags* flags, bool needs_config) {
  auto* opt = cmd->add_option("--config", flags->config_path,
                              "experiment config (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--out", flags->out_dir, "output directory override");
  cmd->add_option("--seed-override", flags->seed_override,
                  "run only this seed (replaces the configured list)");
  cmd->add_option("--epsilon", flags->epsilon_override,
                  "significance level override");
}

ExperimentConfig load_config(const CommonFlags& flags) {
  ExperimentConfig cfg = cpl::load_experiment_config(flags.config_path);
  if (flags.seed_override >= 0) {
    cfg.seeds = {static_cast<std::uint64_t>(flags.seed_override)};
  }
  if (flags.epsilon_override >= 0.0) cfg.epsilon = flags.epsilon_override;
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  cfg.validate();
  return cfg;
}

void emit_error_record(const std::string& type, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

std::string stat_str(const cpl::SummaryStat& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f +/- %.4f", s.mean, s.stddev);
  return buf;
}

int cmd_generate(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  if (!cfg.generator) {
    throw cpl::ConfigError("generate needs dataset.generator");
  }
  const std::uint64_t seed = cfg.seeds.front();

  // Materialize exactly what a run with this seed would see.
  cpl::GaussianMixtureSpec g = *cfg.generator;
  g.seed = cpl::derive_seed(cpl::derive_seed(seed, cpl::SeedStream::Generate),
                            g.seed);
  cpl::PartialDataset precise = cpl::generate_gaussian(g);

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw cpl::IoError(cfg.output_dir + ": cannot create directory");
  const std::filesystem::path dir(cfg.output_dir);

  cpl::save_dataset(precise, (dir / "precise.txt").string());
  double css = precise.mean_candidate_set_size();

  if (cfg.contamination.kind != cpl::ContaminationKind::None) {
    cpl::PartialDataset contaminated;
    if (cfg.contamination.kind == cpl::ContaminationKind::Random) {
      contaminated = cpl::contaminate_random(
          precise, cfg.contamination.p,
          cpl::derive_seed(seed, cpl::SeedStream::Contaminate));
    } else {
      cpl::TrainConfig sc;
      if (cfg.supermodel_train) {
        sc = *cfg.supermodel_train;
      } else {
        sc.epochs = 20;
      }
      sc.seed = cpl::derive_seed(seed, cpl::SeedStream::Supermodel);
      cpl::SupermodelResult sm = cpl::train_supermodel(precise, sc);
      contaminated = cpl::contaminate_instance_dependent(
          precise, sm.model,
          cpl::derive_seed(seed, cpl::SeedStream::Contaminate));
    }
    cpl::save_dataset(contaminated, (dir / "contaminated.txt").string());
    css = contaminated.mean_candidate_set_size();
  }

  std::printf("n=%zu K=%d dim=%d\n", precise.size(), precise.num_classes,
              precise.dim());
  std::printf("mean candidate set size: %.4f\n", css);
  std::printf("wrote %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_run(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  // Collect first, write reports, then enforce: a violated guarantee should
  // still leave the evidence on disk.
  cpl::ExperimentReport report = cpl::run_experiment_no_throw(cfg);
  cpl::write_report_files(report, cfg.output_dir);

  std::printf("%-10s %-22s %-22s %s\n", "method", "coverage", "set size",
              "critical");
  for (const cpl::MethodAggregate& agg : report.aggregates) {
    std::string cov = std::isnan(agg.coverage.mean) ? std::string("n/a")
                                                    : stat_str(agg.coverage);
    std::vector<double> qs;
    for (const cpl::SeedRun& run : report.runs) {
      for (const cpl::MethodMetrics& mm : run.metrics) {
        if (mm.method.name() == agg.method.name() && std::isfinite(mm.critical)) {
          qs.push_back(mm.critical);
        }
      }
    }
    std::string q = qs.empty() ? std::string("inf")
                               : stat_str(cpl::summarize(qs));
    std::printf("%-10s %-22s %-22s %s\n", agg.method.name().c_str(),
                cov.c_str(), stat_str(agg.efficiency).c_str(), q.c_str());
  }
  std::printf("mean candidate set size: %s\n", stat_str(report.css).c_str());
  std::printf("reports: %s\n", cfg.output_dir.c_str());

  if (!report.invariants_ok) {
    std::string msg = "validity guarantee violated:";
    for (const auto& f : report.invariant_failures) msg += "\n  " + f;
    throw cpl::InvariantError(msg);
  }
  std::printf("guarantees: ok\n");
  return 0;
}

int cmd_audit(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cpl::ExperimentReport report = cpl::run_experiment_no_throw(cfg);

  nlohmann::ordered_json out;
  out["config"] = nlohmann::ordered_json::parse(
      cpl::experiment_config_to_json(cfg));
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();

  bool any_hard_failure = false;
  std::printf("%-6s %-10s %-10s %-13s %-12s %-12s %s\n", "seed", "method",
              "guarantee", "precondition", "containment", "q_method",
              "q_oracle");
  for (const cpl::SeedRun& run : report.runs) {
    if (!run.audit) {
      throw cpl::OracleError("audit requires hidden ground truths");
    }
    nlohmann::ordered_json rj;
    rj["seed"] = run.seed;
    rj["mean_condition_satisfied"] = run.audit->mean_condition.all_satisfied;
    rj["mean_condition_count"] = run.audit->mean_condition.num_satisfied;
    rj["all_condition_satisfied"] = run.audit->all_condition.all_satisfied;
    rj["all_condition_epsilon_bound"] = run.audit->all_condition.epsilon_bound;
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const cpl::MethodAudit& a : run.audit->methods) {
      nlohmann::ordered_json mj;
      mj["method"] = a.method.name();
      mj["has_guarantee"] = a.has_guarantee;
      mj["preconditions_held"] = a.preconditions_held;
      mj["containment_held"] = a.containment_held;
      mj["q_method"] = a.q_method;
      mj["q_oracle"] = a.q_oracle;
      mj["hard_failure"] = a.hard_failure;
      methods.push_back(std::move(mj));
      any_hard_failure = any_hard_failure || a.hard_failure;

      std::printf("%-6llu %-10s %-10s %-13s %-12s %-12.6g %.6g\n",
                  static_cast<unsigned long long>(run.seed),
                  a.method.name().c_str(), a.has_guarantee ? "yes" : "no",
                  a.preconditions_held ? "held" : "not-held",
                  a.containment_held ? "held" : "VIOLATED", a.q_method,
                  a.q_oracle);
    }
    rj["methods"] = std::move(methods);
    runs.push_back(std::move(rj));
  }
  out["runs"] = std::move(runs);
  out["any_hard_failure"] = any_hard_failure;

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw cpl::IoError(cfg.output_dir + ": cannot create directory");
  const std::filesystem::path path =
      std::filesystem::path(cfg.output_dir) / "audit.json";
  {
    std::string text = out.dump(2) + "\n";
    FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw cpl::IoError(path.string() + ": cannot open for writing");
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  std::printf("audit: %s\n", path.string().c_str());

  if (any_hard_failure) {
    throw cpl::InvariantError("audit found violated guarantees");
  }
  return 0;
}

int cmd_lemma_test(std::size_t trials, std::uint64_t seed, bool explore) {
  cpl::LemmaTrialSummary enforced = cpl::run_lemma_trials(trials, seed, true);
  std::printf("enforced trials: %zu holds: %zu failures: %zu\n",
              enforced.trials, enforced.holds, enforced.failures);
  if (explore) {
    cpl::LemmaTrialSummary loose = cpl::run_lemma_trials(trials, seed + 1, false);
    std::printf("exploratory trials: %zu holds: %zu failures: %zu\n",
                loose.trials, loose.holds, loose.failures);
  }
  if (enforced.failures > 0) {
    throw cpl::InvariantError("rank-shift lemma violated inside guarantee range");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal prediction with partially labeled data"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  CLI::App* gen = app.add_subcommand("generate", "materialize a dataset");
  add_common(gen, &gen_flags, true);

  CommonFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "run the full experiment");
  add_common(run, &run_flags, true);

  CommonFlags audit_flags;
  CLI::App* audit = app.add_subcommand("audit", "check validity mechanisms");
  add_common(audit, &audit_flags, true);

  std::size_t trials = 2000;
  std::uint64_t lemma_seed = 1;
  bool explore = false;
  CLI::App* lemma = app.add_subcommand("lemma-test", "rank-shift lemma trials");
  lemma->add_option("--trials", trials, "number of randomized trials");
  lemma->add_option("--seed", lemma_seed, "trial seed");
  lemma->add_flag("--explore", explore,
                  "also sample outside the guarantee range");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    emit_error_record("config", e.what());
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_flags);
    if (run->parsed()) return cmd_run(run_flags);
    if (audit->parsed()) return cmd_audit(audit_flags);
    if (lemma->parsed()) return cmd_lemma_test(trials, lemma_seed, explore);
  } catch (const cpl::ConfigError& e) {
    emit_error_record("config", e.what());
    return 2;
  } catch (const cpl::InvariantError& e) {
    emit_error_record("invariant", e.what());
    return 3;
  } catch (const cpl::DivergenceError& e) {
    emit_error_record("divergence", e.what());
    return 3;
  } catch (const cpl::IoError& e) {
    emit_error_record("io", e.what());
    return 4;
  }
  return 0;
}
