#include "dedpo/sweep.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace dedpo {

namespace {

std::uint64_t derive(std::uint64_t root, std::uint64_t a, std::uint64_t b,
                     std::uint64_t c = 0, std::uint64_t d = 0) {
  return RngStream::root(root).split(a).split(b).split(c).split(d).next_u64();
}

constexpr std::int64_t kCalibIdBase = 1'000'000'000;

}  // namespace

ToyDenoiser make_reference(const SweepConfig& cfg, const WorldSpec& w,
                           const NoiseSchedule& sched, std::uint64_t root_seed,
                           int seed_index) {
  DenoiserSpec spec;
  spec.data_dim = w.data_dim();
  spec.vocab = w.n_conditions;
  return pretrain(w, sched, spec, cfg.pretrain,
                  derive(root_seed, 30, seed_index));
}

SweepRow run_cell(const SweepConfig& cfg, const WorldSpec& w,
                  const NoiseSchedule& sched, const ToyDenoiser& ref,
                  const CellSpec& cell, std::uint64_t root_seed) {
  const int n = cell.n_l + cell.n_u;
  const std::uint64_t data_seed =
      derive(root_seed, 40, cell.seed_index, cell.n_l, cell.n_u);
  const bool full = cell.estimator == EstimatorKind::FullLabelDPO;
  const double fraction =
      full ? 1.0 : static_cast<double>(cell.n_l) / static_cast<double>(n);
  const Dataset data = generate(w, n, fraction, data_seed);

  TrainConfig tc;
  tc.estimator = cell.estimator;
  tc.beta = cfg.beta;
  tc.steps = cfg.train_steps;
  tc.batch_size = cfg.batch_size;
  tc.adam.lr = cfg.lr;
  tc.adam.warmup = cfg.warmup;
  tc.eval_samples = cfg.eval_samples;
  tc.eval_guidance = cfg.eval_guidance;
  tc.seed = derive(root_seed, 42, cell.seed_index, cell.n_l, cell.n_u);

  SweepRow row;
  row.estimator = estimator_name(cell.estimator);
  row.annotator = "none";
  row.accuracy = cell.accuracy;
  row.n_l = cell.n_l;
  row.n_u = cell.n_u;
  row.seed = cell.seed_index;

  // Any per-cell failure must land in the status column, never escape the
  // worker, so the rest of the grid still completes.
  try {
    std::shared_ptr<Annotator> annot;
    if (cell.estimator == EstimatorKind::OutcomeRegression ||
        cell.estimator == EstimatorKind::DeDPO) {
      const Dataset calib = generate(w, cfg.calib_pairs, 1.0,
                                     derive(root_seed, 41, cell.seed_index),
                                     kCalibIdBase);
      // Chance-level agreement is the zero-signal end of the biased family;
      // it cannot be reached by calibration.
      if (cell.accuracy == 0.5) {
        annot = make_biased_annotator(w, 0.0, cfg.bias_scale);
      } else {
        annot = calibrate_biased_annotator(w, cell.accuracy, cfg.bias_scale,
                                           calib.labeled)
                    .annotator;
      }
      row.annotator = annot->name();
    }

    ToyDenoiser policy = ref;
    const RunReport rep = train(policy, ref, data, annot, w, sched, tc);
    row.win_rate = rep.win_rate;
    row.status = "ok";
  } catch (const TrainingDiverged&) {
    row.win_rate = std::nan("");
    row.status = "diverged";
  } catch (const std::exception&) {
    row.win_rate = std::nan("");
    row.status = "failed";
  }
  return row;
}

SweepResult run_sweep(const SweepConfig& cfg, std::uint64_t root_seed,
                      int jobs) {
  const WorldSpec w = WorldSpec::four_modes();
  const NoiseSchedule sched = make_schedule(cfg.T, cfg.schedule);

  std::vector<CellSpec> cells;
  for (EstimatorKind est : cfg.estimators) {
    for (double acc : cfg.accuracies) {
      for (int n_l : cfg.n_l_list) {
        for (int s = 0; s < cfg.seeds; ++s) {
          cells.push_back({est, acc, n_l, cfg.n_u_factor * n_l, s});
        }
      }
    }
  }

  // References depend only on the seed index; build them once up front.
  std::vector<ToyDenoiser> refs;
  refs.reserve(cfg.seeds);
  for (int s = 0; s < cfg.seeds; ++s)
    refs.push_back(make_reference(cfg, w, sched, root_seed, s));

  SweepResult out;
  out.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size();
         i = next.fetch_add(1)) {
      out.rows[i] = run_cell(cfg, w, sched, refs[cells[i].seed_index],
                             cells[i], root_seed);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  if (cfg.with_rate) {
    out.rate = run_rate_study(cfg.rate, EstimatorKind::DeDPO,
                              derive(root_seed, 50, 0));
  }
  return out;
}

std::vector<SvgSeries> sweep_series_for_accuracy(
    const std::vector<SweepRow>& rows, double accuracy) {
  // estimator -> n_u -> win rates
  std::map<std::string, std::map<int, std::vector<double>>> grouped;
  for (const SweepRow& r : rows) {
    if (r.accuracy == accuracy && r.status == "ok")
      grouped[r.estimator][r.n_u].push_back(r.win_rate);
  }
  std::vector<SvgSeries> series;
  for (const auto& [est, by_nu] : grouped) {
    SvgSeries s;
    s.label = est;
    for (const auto& [n_u, wins] : by_nu) {
      double mean = 0;
      for (double v : wins) mean += v;
      s.points.emplace_back(n_u, mean / wins.size());
    }
    series.push_back(std::move(s));
  }
  return series;
}

}  // namespace dedpo
