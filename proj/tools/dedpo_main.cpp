#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dedpo/config.hpp"
#include "dedpo/io.hpp"
#include "dedpo/sweep.hpp"
#include "dedpo/verification.hpp"

namespace fs = std::filesystem;
using namespace dedpo;

namespace {

// Calibration pairs live in their own id range so they can never collide
// with training pair ids.
constexpr std::int64_t kCalibIdBase = 1'000'000'000;

std::uint64_t derive(std::uint64_t root, std::uint64_t lane) {
  return RngStream::root(root).split(lane).next_u64();
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Options {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  int jobs = 0;
  std::vector<std::string> checks;
};

std::shared_ptr<Annotator> build_annotator(const ExperimentConfig& cfg,
                                           const WorldSpec& w,
                                           const NoiseSchedule& sched,
                                           const ToyDenoiser& ref,
                                           std::uint64_t seed) {
  switch (cfg.annotator.kind) {
    case AnnotatorKind::oracle:
      return make_oracle_annotator(w);
    case AnnotatorKind::flip:
      return make_flip_annotator(w, cfg.annotator.flip_prob, seed);
    case AnnotatorKind::biased: {
      const Dataset calib =
          generate(w, cfg.annotator.calib_pairs, 1.0, seed, kCalibIdBase);
      return calibrate_biased_annotator(w, cfg.annotator.accuracy,
                                        cfg.annotator.bias_scale,
                                        calib.labeled)
          .annotator;
    }
    case AnnotatorKind::fixed: {
      if (cfg.annotator.table.empty())
        throw ConfigError("config: [annotator] table path required for kind = fixed");
      return make_fixed_annotator(read_fixed_table(cfg.annotator.table));
    }
    case AnnotatorKind::self_training:
      return std::make_shared<SelfTrainingAnnotator>(
          ref, sched, cfg.train.beta, cfg.annotator.tau, cfg.annotator.augment,
          seed);
  }
  throw std::logic_error("unreachable");
}

int run_generate(const Options& opt) {
  const ExperimentConfig cfg = parse_config_file(opt.config);
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset d = generate(w, cfg.dataset.n_pairs,
                             cfg.dataset.labeled_fraction, derive(opt.seed, 2));
  const fs::path path = fs::path(opt.out) / "dataset.csv";
  write_dataset_csv(path.string(), d);
  std::cout << "wrote " << path.string() << " (" << d.n_l() << " labeled, "
            << d.n_u() << " unlabeled)\n";
  return 0;
}

int run_train(const Options& opt) {
  const ExperimentConfig cfg = parse_config_file(opt.config);
  const WorldSpec w = WorldSpec::four_modes();
  const NoiseSchedule sched = make_schedule(cfg.schedule.T, cfg.schedule.kind);
  DenoiserSpec spec;
  spec.data_dim = w.data_dim();
  spec.vocab = w.n_conditions;

  const fs::path data_path = fs::path(opt.out) / "dataset.csv";
  Dataset data;
  if (fs::exists(data_path)) {
    data = read_dataset_csv(data_path.string());
  } else {
    data = generate(w, cfg.dataset.n_pairs, cfg.dataset.labeled_fraction,
                    derive(opt.seed, 2));
    write_dataset_csv(data_path.string(), data);
  }

  const ToyDenoiser ref =
      pretrain(w, sched, spec, cfg.pretrain, derive(opt.seed, 1));

  std::shared_ptr<Annotator> annot;
  if (cfg.train.estimator == EstimatorKind::OutcomeRegression ||
      cfg.train.estimator == EstimatorKind::DeDPO)
    annot = build_annotator(cfg, w, sched, ref, derive(opt.seed, 3));

  TrainConfig tc;
  tc.estimator = cfg.train.estimator;
  tc.beta = cfg.train.beta;
  tc.steps = cfg.train.steps;
  tc.batch_size = cfg.train.batch_size;
  tc.adam.lr = cfg.train.lr;
  tc.adam.warmup = cfg.train.warmup;
  tc.seed = derive(opt.seed, 4);
  tc.snapshot_every = cfg.train.snapshot_every;
  tc.eval_samples = cfg.train.eval_samples;
  tc.eval_guidance = cfg.train.eval_guidance;

  ToyDenoiser policy = ref;
  const RunReport rep = train(policy, ref, data, annot, w, sched, tc);

  save_params((fs::path(opt.out) / "params.bin").string(), policy, sched.T);
  write_json((fs::path(opt.out) / "report.json").string(),
             run_report_json(rep));
  write_trace_csv((fs::path(opt.out) / "trace.csv").string(), rep.loss_trace);
  std::cout << rep.estimator << ": final_loss=" << format_double(rep.final_loss)
            << " win_rate=" << format_double(rep.win_rate) << '\n';
  return 0;
}

int run_verify(const Options& opt) {
  std::vector<std::string> names = opt.checks;
  if (names.empty() && !opt.config.empty())
    names = parse_config_file(opt.config).verify.checks;

  const std::vector<VerificationResult> results = run_checks(names, opt.seed);
  for (const VerificationResult& r : results)
    write_json((fs::path(opt.out) / ("check_" + r.check + ".json")).string(),
               verification_json(r));
  write_check_summary_csv((fs::path(opt.out) / "verify_summary.csv").string(),
                          results);

  bool all_passed = true;
  for (const VerificationResult& r : results) {
    all_passed = all_passed && r.passed;
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.check
              << " statistic=" << format_g(r.statistic)
              << " tolerance=" << format_g(r.tolerance) << '\n';
  }
  std::cout << "assumed only (not testable here):";
  for (const std::string& c : assumed_only_conditions()) std::cout << ' ' << c;
  std::cout << '\n';
  return all_passed ? 0 : 1;
}

int run_sweep_cmd(const Options& opt) {
  const ExperimentConfig cfg = parse_config_file(opt.config);
  SweepConfig sc;
  sc.estimators = cfg.sweep.estimators;
  sc.accuracies = cfg.sweep.accuracies;
  sc.n_l_list = cfg.sweep.n_l;
  sc.n_u_factor = cfg.sweep.n_u_factor;
  sc.seeds = cfg.sweep.seeds;
  sc.T = cfg.schedule.T;
  sc.schedule = cfg.schedule.kind;
  sc.pretrain = cfg.pretrain;
  sc.beta = cfg.train.beta;
  sc.train_steps = cfg.train.steps;
  sc.batch_size = cfg.train.batch_size;
  sc.lr = cfg.train.lr;
  sc.warmup = cfg.train.warmup;
  sc.eval_samples = cfg.train.eval_samples;
  sc.eval_guidance = cfg.train.eval_guidance;
  sc.calib_pairs = cfg.annotator.calib_pairs;
  sc.bias_scale = cfg.annotator.bias_scale;
  sc.with_rate = cfg.sweep.rate;
  sc.rate = cfg.rate;

  const SweepResult res = run_sweep(sc, opt.seed, opt.jobs);
  write_sweep_csv((fs::path(opt.out) / "sweep.csv").string(), res.rows);
  for (double acc : sc.accuracies) {
    const auto series = sweep_series_for_accuracy(res.rows, acc);
    write_line_svg(
        (fs::path(opt.out) / ("sweep_acc_" + format_g(acc) + ".svg")).string(),
        "win rate vs unlabeled pool (annotator accuracy " + format_g(acc) + ")",
        "n_u", "win rate", series);
  }
  if (res.rate) {
    std::string csv = "n,mean_error\n";
    Json jr;
    jr["slope"] = res.rate->slope;
    jr["grid_n"] = sc.rate.grid_n;
    jr["mean_error"] = res.rate->mean_error;
    for (std::size_t i = 0; i < sc.rate.grid_n.size(); ++i)
      csv += std::to_string(sc.rate.grid_n[i]) + ',' +
             format_double(res.rate->mean_error[i]) + '\n';
    std::ofstream f((fs::path(opt.out) / "rate.csv").string());
    f << csv;
    write_json((fs::path(opt.out) / "rate.json").string(), jr);
  }
  std::cout << res.rows.size() << " cells -> "
            << (fs::path(opt.out) / "sweep.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised preference optimization lab"};
  app.require_subcommand(1);

  Options opt;
  if (const char* env = std::getenv("DEDPO_OUT_DIR"); env && *env)
    opt.out = env;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config, "experiment config file");
    if (config_required) c->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "root seed");
  };

  CLI::App* gen = app.add_subcommand("generate", "write a pair dataset");
  add_common(gen, true);
  CLI::App* tr = app.add_subcommand("train", "run preference optimization");
  add_common(tr, true);
  CLI::App* ver = app.add_subcommand("verify", "run statistical checks");
  add_common(ver, false);
  ver->add_option("--check", opt.checks, "check name (repeatable)");
  CLI::App* sw = app.add_subcommand("sweep", "run the estimator grid");
  add_common(sw, true);
  sw->add_option("--jobs", opt.jobs, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(opt.out);
    if (gen->parsed()) return run_generate(opt);
    if (tr->parsed()) return run_train(opt);
    if (ver->parsed()) return run_verify(opt);
    return run_sweep_cmd(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
