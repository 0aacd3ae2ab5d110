#include "jldict/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

namespace jldict::pipeline {

namespace {

void set_stage(std::string* stage, const char* name) {
  if (stage != nullptr) *stage = name;
  log_info(std::string("stage: ") + name);
}

// Median pairwise distance over a seeded subsample, the default Gaussian
// bandwidth when none is supplied.
double median_pairwise_distance(const MatrixXd& Y, std::uint64_t seed) {
  Eigen::Index n = Y.cols();
  if (n < 2) throw std::invalid_argument("bandwidth heuristic needs at least 2 samples");
  constexpr Eigen::Index kMaxSample = 1000;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (n > kMaxSample) {
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(kMaxSample);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      dists.push_back((Y.col(idx[a]) - Y.col(idx[b])).norm());
    }
  }
  std::sort(dists.begin(), dists.end());
  std::size_t m = dists.size();
  double median = (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  if (!(median > 0.0)) {
    throw NumericalFailure("all sampled pairwise distances are zero; cannot pick a bandwidth");
  }
  return median;
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  double sum = 0.0;
  for (double x : v) sum += (x - mean) * (x - mean);
  return std::sqrt(sum / static_cast<double>(v.size()));
}

}  // namespace

FitResult fit(const data::LabeledDataset& raw, const PipelineConfig& config, std::string* stage) {
  int pinned = (config.epsilon > 0.0 ? 1 : 0) + (config.auto_eps ? 1 : 0) +
               (config.p_override > 0 ? 1 : 0);
  if (pinned != 1) {
    throw std::invalid_argument(
        "exactly one of epsilon, auto-epsilon, or a p override must determine the dimension");
  }
  if (raw.n() < 2) throw std::invalid_argument("training needs at least 2 samples");
  for (int count : data::class_counts(raw)) {
    if (count == 0) throw std::invalid_argument("training requires non-empty classes");
  }

  auto t0 = std::chrono::steady_clock::now();

  set_stage(stage, "standardize");
  data::LabeledDataset ds = raw.standardized ? raw : data::standardize(raw);

  if (config.augment_to > 0) {
    set_stage(stage, "augment");
    ds = data::augment_minority(ds, config.augment_to, config.augment_noise, config.seed);
  }

  set_stage(stage, "dimension selection");
  FitResult result;
  if (config.p_override > 0) {
    result.p = config.p_override;
    result.epsilon_used = 0.0;
  } else {
    double eps = config.auto_eps ? dimsel::select_epsilon(ds.n()).value() : config.epsilon;
    result.p = static_cast<int>(dimsel::jl_min_dimension(ds.n(), eps));
    result.epsilon_used = eps;
    log_info("dimension rule: N=" + std::to_string(ds.n()) + " eps=" + format_float(eps) +
             " -> p=" + std::to_string(result.p));
  }
  result.kernel_mode = result.p > ds.d();

  embed::LabelKernelFactors labels = embed::one_hot_labels(ds.labels, ds.n_classes);

  set_stage(stage, result.kernel_mode ? "kernel projection fit" : "linear projection fit");
  embed::ProjectionModel proj;
  if (result.kernel_mode) {
    double bandwidth = config.kernel_bandwidth > 0.0
                           ? config.kernel_bandwidth
                           : median_pairwise_distance(ds.Y, config.seed);
    if (config.kernel_bandwidth <= 0.0) {
      log_info("kernel bandwidth (median heuristic): " + format_float(bandwidth));
    }
    proj = embed::fit_mkspca(ds.Y, labels, result.p, bandwidth, config.kernel_ridge,
                             embed::KernelType::gaussian, result.epsilon_used);
  } else {
    proj = embed::fit_mspca(ds.Y, labels, result.p, result.epsilon_used);
  }

  set_stage(stage, "projection transform");
  MatrixXd Z = embed::transform(proj, ds.Y);

  set_stage(stage, "dictionary training");
  // The pipeline-level sigma2 is relative to the projected signals: the coder
  // receives sigma2 times the mean per-coordinate energy of Z. On standardized
  // full-rank data that reference is ~1, so the flag behaves as an absolute
  // variance there; kernel whitening shrinks signal scale by orders of
  // magnitude and the noise model must follow or it swallows every contrast.
  double signal_scale = Z.size() > 0 ? Z.squaredNorm() / static_cast<double>(Z.size()) : 0.0;
  if (signal_scale <= 0.0) signal_scale = 1.0;
  dict::TrainConfig tc;
  tc.atoms_per_class = config.atoms_per_class;
  tc.tol = config.train_tol;
  tc.max_outer = config.max_outer;
  tc.seed = config.seed;
  tc.coder.sigma2 = config.sigma2 * signal_scale;
  tc.coder.max_iters = config.coder_max_iters;
  tc.coder.prune_threshold = config.coder_prune_threshold;
  tc.coder.tol = config.coder_tol;
  dict::TrainOutcome trained = dict::train(Z, ds.labels, tc);
  result.report = trained.report;

  set_stage(stage, "medoid computation");
  classify::ClassMedoids medoids = classify::compute_medoids(trained.X, ds.labels);

  result.bundle.classifier.projection = std::move(proj);
  result.bundle.classifier.dictionary = std::move(trained.dictionary);
  result.bundle.classifier.medoids = std::move(medoids);
  result.bundle.classifier.tau = config.tau;
  result.bundle.classifier.coder = tc.coder;
  result.bundle.feature_mean = ds.feature_mean;
  result.bundle.feature_std = ds.feature_std;
  result.bundle.n_classes = ds.n_classes;
  result.bundle.label_values = ds.label_values;

  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

classify::EvalMetrics evaluate_bundle(const io::ModelBundle& bundle,
                                      const data::LabeledDataset& test_raw) {
  MatrixXd Yt =
      data::apply_standardization(test_raw.Y, bundle.feature_mean, bundle.feature_std);
  return classify::evaluate(bundle.classifier, Yt, test_raw.labels);
}

CrossValResult cross_validate(const data::LabeledDataset& raw, const PipelineConfig& config,
                              int folds, int jobs) {
  std::vector<data::FoldSplit> splits = data::stratified_kfold(raw, folds, config.seed);

  auto run_fold = [&](int f) {
    data::LabeledDataset train_ds = data::subset(raw, splits[static_cast<std::size_t>(f)].train);
    data::LabeledDataset test_ds = data::subset(raw, splits[static_cast<std::size_t>(f)].test);
    FitResult fitted = fit(train_ds, config);
    FoldOutcome outcome;
    outcome.metrics = evaluate_bundle(fitted.bundle, test_ds);
    outcome.train_seconds = fitted.train_seconds;
    outcome.p = fitted.p;
    outcome.kernel_mode = fitted.kernel_mode;
    return outcome;
  };

  CrossValResult result;
  result.folds.resize(static_cast<std::size_t>(folds));
  if (jobs > 1) {
    std::vector<std::future<FoldOutcome>> futures;
    futures.reserve(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
      futures.push_back(std::async(std::launch::async, run_fold, f));
    }
    for (int f = 0; f < folds; ++f) result.folds[static_cast<std::size_t>(f)] = futures[static_cast<std::size_t>(f)].get();
  } else {
    for (int f = 0; f < folds; ++f) result.folds[static_cast<std::size_t>(f)] = run_fold(f);
  }

  std::vector<double> accs, f1s, trains, tests;
  for (const FoldOutcome& fold : result.folds) {
    accs.push_back(fold.metrics.accuracy);
    f1s.push_back(fold.metrics.macro_f1);
    trains.push_back(fold.train_seconds);
    tests.push_back(fold.metrics.mean_ms_per_sample);
  }
  result.mean_accuracy = mean_of(accs);
  result.std_accuracy = std_of(accs, result.mean_accuracy);
  result.mean_f1 = mean_of(f1s);
  result.std_f1 = std_of(f1s, result.mean_f1);
  result.mean_train_seconds = mean_of(trains);
  result.mean_test_ms = mean_of(tests);
  return result;
}

std::vector<SweepCell> sweep(const data::LabeledDataset& raw, const PipelineConfig& config,
                             const SweepGrids& grids, int folds, int jobs) {
  std::vector<double> sigma2s = grids.sigma2.empty() ? std::vector<double>{config.sigma2}
                                                     : grids.sigma2;
  std::vector<double> taus = grids.tau.empty() ? std::vector<double>{config.tau} : grids.tau;
  std::vector<int> ps = grids.p.empty() ? std::vector<int>{0} : grids.p;
  std::vector<int> apcs = grids.atoms_per_class.empty()
                              ? std::vector<int>{config.atoms_per_class}
                              : grids.atoms_per_class;

  std::vector<SweepCell> cells;
  for (double s2 : sigma2s) {
    for (double tau : taus) {
      for (int p : ps) {
        for (int apc : apcs) {
          SweepCell cell;
          cell.sigma2 = s2;
          cell.tau = tau;
          cell.p_override = p;
          cell.atoms_per_class = apc;
          cells.push_back(cell);
        }
      }
    }
  }

  auto run_cell = [&](SweepCell cell) {
    PipelineConfig cfg = config;
    cfg.sigma2 = cell.sigma2;
    cfg.tau = cell.tau;
    cfg.atoms_per_class = cell.atoms_per_class;
    if (cell.p_override > 0) {
      cfg.p_override = cell.p_override;
      cfg.epsilon = 0.0;
      cfg.auto_eps = false;
    }
    cell.result = cross_validate(raw, cfg, folds, 1);
    return cell;
  };

  if (jobs > 1) {
    std::vector<std::future<SweepCell>> futures;
    futures.reserve(cells.size());
    for (const SweepCell& cell : cells) {
      futures.push_back(std::async(std::launch::async, run_cell, cell));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = futures[i].get();
  } else {
    for (SweepCell& cell : cells) cell = run_cell(cell);
  }
  return cells;
}

}  // namespace jldict::pipeline
