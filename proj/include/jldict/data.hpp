#pragma once

#include "jldict/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jldict::data {

// Column-major sample container: Y is d x N with one sample per column.
struct LabeledDataset {
  MatrixXd Y;
  std::vector<int> labels;       // size N, values in [0, n_classes)
  int n_classes = 0;
  bool standardized = false;
  VectorXd feature_mean;         // retained once standardize() has run
  VectorXd feature_std;
  std::vector<long long> label_values;  // original label per class id

  Eigen::Index d() const { return Y.rows(); }
  Eigen::Index n() const { return Y.cols(); }
};

// IDX image/label pair (big-endian magic 0x00000803 / 0x00000801). Each image
// flattens to one column; pixel bytes are scaled to [0, 1]. Malformed input
// raises ParseError carrying the offending byte offset.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_idx: quantizes features back to bytes (round(v*255), clamped)
// and writes images as N x d x 1. Data already on the k/255 grid round-trips
// bit-identically.
void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Rectangular numeric CSV with a header row; `label_column` names the column
// holding integer class labels, every other column is a feature. Labels are
// re-indexed densely to [0, C) in first-seen order; the original values are
// kept in label_values. ParseError carries the 1-based line number.
LabeledDataset load_csv(const std::string& path, const std::string& label_column);

// Writes features + label column (header f0..f{d-1},label), floats at 17
// significant digits, LF endings.
void save_csv(const LabeledDataset& ds, const std::string& path);

// Feature matrix alone from an IDX image file, for prediction inputs that
// carry no labels. A valid file with an image count of zero yields d x 0.
MatrixXd load_idx_images(const std::string& images_path);

// All-numeric CSV as a feature matrix. When `drop_column` names a header
// column that is present, that column is parsed and discarded, so files
// written by save_csv feed straight back into prediction. A header-only file
// yields d x 0; a completely empty file yields 0 x 0.
MatrixXd load_csv_matrix(const std::string& path, const std::string& drop_column = "");

// Per-feature zero mean / unit variance (population convention, divide by N).
// Constant features map to an all-zero row with std recorded as 1, so applying
// the retained statistics never divides by zero.
LabeledDataset standardize(const LabeledDataset& ds);

// Applies training-time statistics to held-out data.
MatrixXd apply_standardization(const MatrixXd& Y, const VectorXd& mean, const VectorXd& std);

struct FoldSplit {
  std::vector<int> train;
  std::vector<int> test;
};

// Per-class shuffled round-robin assignment into k folds. Deterministic per
// seed; throws std::invalid_argument naming the first class smaller than k.
std::vector<FoldSplit> stratified_kfold(const LabeledDataset& ds, int k, std::uint64_t seed);

// Column subset (e.g. one side of a fold split). Keeps class metadata and any
// retained standardization statistics.
LabeledDataset subset(const LabeledDataset& ds, const std::vector<int>& indices);

// Gaussian blobs around class means placed at (separation/sqrt(2)) * e_c, so
// every pair of means is exactly `separation` apart. Requires n_classes <= d
// (the means live on distinct coordinate axes). Samples are mean + N(0, I).
LabeledDataset synth_clusters(int d, int n_classes, int per_class, double separation,
                              std::uint64_t seed);

// For each class with fewer than target_count members, appends noisy copies of
// randomly chosen members (Gaussian noise, given std) until the class reaches
// target_count. Original columns keep their positions; appended columns go at
// the end in generation order.
LabeledDataset augment_minority(const LabeledDataset& ds, int target_count, double noise_std,
                                std::uint64_t seed);

std::vector<int> class_counts(const LabeledDataset& ds);

}  // namespace jldict::data
