#pragma once

#include "jldict/common.hpp"

#include <cstdint>
#include <vector>

namespace jldict::embed {

// One-hot factorization of the label assignment. The N x N label kernel
// L = H^T H is never materialized; everything downstream works from class
// membership and d x C class-sum factors (L has rank C, so the scatter is a
// sum of C outer products).
class LabelKernelFactors {
public:
  LabelKernelFactors(std::vector<int> labels, int n_classes);

  int n_classes() const { return n_classes_; }
  Eigen::Index n_samples() const { return static_cast<Eigen::Index>(labels_.size()); }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& class_counts() const { return class_counts_; }

  // C x N one-hot matrix H, for small-scale checks and tests.
  MatrixXd one_hot() const;

  // Y H^T: column c is the sum of Y's columns belonging to class c.
  MatrixXd class_sums(const MatrixXd& Y) const;

private:
  std::vector<int> labels_;
  std::vector<int> class_counts_;
  int n_classes_ = 0;
};

LabelKernelFactors one_hot_labels(const std::vector<int>& labels, int n_classes);

enum class ProjectionMode { linear, kernel };

// linear_dot exists as an internal test path: with k(x,y) = x^T y the kernel
// fit must reproduce the primal fit's subspace.
enum class KernelType { gaussian, linear_dot };

struct ProjectionModel {
  ProjectionMode mode = ProjectionMode::linear;
  int p = 0;
  double epsilon = 0.0;    // distortion budget the dimension came from; 0 = unset
  bool scale_jl = false;   // transform divides by sqrt(p) when set
  MatrixXd U;              // linear mode: d x p, orthonormal columns
  MatrixXd V;              // kernel mode: N x p with V^T K1 V = I
  KernelType kernel = KernelType::gaussian;
  double bandwidth = 0.0;
  MatrixXd train_features;  // kernel mode: retained d x N training matrix

  Eigen::Index input_dim() const {
    return mode == ProjectionMode::linear ? U.rows() : train_features.rows();
  }
};

// S = (Y H^T)(Y H^T)^T, the label-aligned scatter. Symmetric PSD with rank at
// most min(d, C).
MatrixXd scatter_matrix(const MatrixXd& Y, const LabelKernelFactors& labels);

// Top-p unit eigenvectors of the label-aligned scatter, eigenvalues
// descending. When fewer than p eigenvalues clear the rank tolerance
// (1e-10 * trace), trailing columns are filled with leading eigenvectors of
// the label-deflated plain data scatter, re-orthonormalized. Expects
// standardized input (see data module).
ProjectionModel fit_mspca(const MatrixXd& Y, const LabelKernelFactors& labels, int p,
                          double epsilon = 0.0);

// Kernel variant for p > d: solves (K1 L K1) v = lambda (K1 + ridge I) v for
// the top p eigenpairs with columns normalized so V^T K1 V = I. Implemented by
// whitening with the eigendecomposition of K1 and reducing the label term to a
// C x C problem through its rank-C factor. Trailing columns beyond the label
// rank are kernel-PCA directions deflated against the chosen ones. ridge < 0
// selects the default 1e-8 * trace(K1)/N.
ProjectionModel fit_mkspca(const MatrixXd& Y, const LabelKernelFactors& labels, int p,
                           double bandwidth, double ridge = -1.0,
                           KernelType kernel = KernelType::gaussian, double epsilon = 0.0);

// Linear mode: U^T Yq (divided by sqrt(p) iff scale_jl). Kernel mode:
// V^T kappa(train_features, Yq).
MatrixXd transform(const ProjectionModel& model, const MatrixXd& Yq);

// Gram block k(a_i, b_j) for columns of A and B.
MatrixXd kernel_gram(const MatrixXd& A, const MatrixXd& B, KernelType kernel, double bandwidth);

struct DistortionReport {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double fraction_outside = 0.0;  // ratios outside (1 - eps, 1 + eps)
  double epsilon = 0.0;
  std::size_t n_pairs = 0;        // pairs actually measured (zero-distance pairs dropped)
  std::vector<double> bin_edges;  // 21 edges
  std::vector<std::size_t> bin_counts;  // 20 bins
};

// Samples n_pairs distinct column pairs with the given seed and reports the
// squared-distance ratios ||f(x_i)-f(x_j)||^2 / ||x_i-x_j||^2 under the
// model's transform (whether that includes the 1/sqrt(p) scaling follows
// model.scale_jl). Pairs with zero source distance are skipped.
DistortionReport distortion_report(const ProjectionModel& model, const MatrixXd& Y,
                                   std::size_t n_pairs, std::uint64_t seed);

}  // namespace jldict::embed
