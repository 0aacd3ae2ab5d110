#pragma once

#include "jldict/data.hpp"
#include "jldict/dimsel.hpp"
#include "jldict/model_io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jldict::pipeline {

// Exactly one of {epsilon, auto_eps, p_override} must pin the projection
// dimension: epsilon > 0 derives p from the distortion bound, auto_eps selects
// epsilon first, p_override bypasses both.
struct PipelineConfig {
  double epsilon = 0.0;
  bool auto_eps = false;
  int p_override = 0;

  int atoms_per_class = 10;
  double sigma2 = 0.03;
  double tau = 0.35;
  double kernel_bandwidth = 0.0;  // 0 = median pairwise-distance heuristic
  double kernel_ridge = -1.0;     // <0 = library default
  std::uint64_t seed = 0;
  int max_outer = 30;
  double train_tol = 0.0;
  int coder_max_iters = 200;
  double coder_prune_threshold = 1e-6;
  double coder_tol = 1e-4;

  int augment_to = 0;  // 0 = no minority augmentation
  double augment_noise = 0.05;
};

struct FitResult {
  io::ModelBundle bundle;
  dict::TrainReport report;
  int p = 0;
  double epsilon_used = 0.0;  // 0 when p was overridden
  bool kernel_mode = false;
  double train_seconds = 0.0;
};

// Full training pass on a raw (unstandardized) dataset: standardize ->
// optional minority augmentation -> p from the dimension rule -> linear or
// kernel projection (kernel iff p > d) -> transform -> dictionary learning ->
// coefficient medoids. `stage` (optional) is updated as phases start so
// callers can attribute failures.
FitResult fit(const data::LabeledDataset& raw, const PipelineConfig& config,
              std::string* stage = nullptr);

// Standardizes the raw test set with the bundle's training statistics and
// scores it.
classify::EvalMetrics evaluate_bundle(const io::ModelBundle& bundle,
                                      const data::LabeledDataset& test_raw);

struct FoldOutcome {
  classify::EvalMetrics metrics;
  double train_seconds = 0.0;
  int p = 0;
  bool kernel_mode = false;
};

struct CrossValResult {
  std::vector<FoldOutcome> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population convention over folds
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_train_seconds = 0.0;
  double mean_test_ms = 0.0;
};

// Stratified k-fold cross-validation; the dimension rule runs per fold on that
// fold's training size. jobs > 1 trains folds concurrently; results are
// collected in fold order, so output is independent of scheduling.
CrossValResult cross_validate(const data::LabeledDataset& raw, const PipelineConfig& config,
                              int folds, int jobs = 1);

struct SweepGrids {
  std::vector<double> sigma2;       // empty = {config.sigma2}
  std::vector<double> tau;          // empty = {config.tau}
  std::vector<int> p;               // empty = {config's dimension rule}, entries are overrides
  std::vector<int> atoms_per_class; // empty = {config.atoms_per_class}
};

struct SweepCell {
  double sigma2 = 0.0;
  double tau = 0.0;
  int p_override = 0;  // 0 = dimension rule
  int atoms_per_class = 0;
  CrossValResult result;
};

// Cartesian product evaluation; cells ordered lexicographically by
// (sigma2, tau, p, atoms_per_class) in the order the grids were given. Every
// cell reuses the same seed and fold split.
std::vector<SweepCell> sweep(const data::LabeledDataset& raw, const PipelineConfig& config,
                             const SweepGrids& grids, int folds, int jobs = 1);

}  // namespace jldict::pipeline
