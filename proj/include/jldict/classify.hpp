#pragma once

#include "jldict/common.hpp"
#include "jldict/dict.hpp"
#include "jldict/embed.hpp"
#include "jldict/sparse.hpp"

#include <vector>

namespace jldict::classify {

// Per-class medoids of coefficient vectors. Every member's summed distance to
// its classmates is cached so online insertion costs one distance per existing
// member instead of a full O(n^2) recomputation.
class ClassMedoids {
public:
  ClassMedoids() = default;

  int n_classes() const { return static_cast<int>(members_.size()); }
  const VectorXd& medoid(int c) const;
  int medoid_member_index(int c) const;
  const std::vector<VectorXd>& members(int c) const;
  const std::vector<double>& distance_sums(int c) const;
  bool has_members() const { return has_members_; }

  // K x C matrix, column c = m_c.
  MatrixXd medoid_matrix() const;

  // Reconstructs a medoid-only view (no member sets), as loaded from a model
  // container. Online updates are rejected on such a view.
  static ClassMedoids from_medoid_matrix(const MatrixXd& medoids);

  friend ClassMedoids compute_medoids(const MatrixXd& X, const std::vector<int>& labels);
  friend void update_medoid_online(ClassMedoids& medoids, const VectorXd& x_new, int cls);

private:
  void recompute_medoid(int c);

  std::vector<std::vector<VectorXd>> members_;
  std::vector<std::vector<double>> sums_;
  std::vector<int> medoid_index_;
  bool has_members_ = true;
};

// Offline medoids: per class, the member minimizing the summed Euclidean
// distance to all other members; ties go to the lowest column index.
ClassMedoids compute_medoids(const MatrixXd& X, const std::vector<int>& labels);

// Appends x_new to its class, updates every cached sum by one distance, and
// re-selects the medoid (ties keep the earlier member). Bitwise-identical to
// recomputing offline in insertion order.
void update_medoid_online(ClassMedoids& medoids, const VectorXd& x_new, int cls);

struct ClassifierModel {
  embed::ProjectionModel projection;
  dict::Dictionary dictionary;
  ClassMedoids medoids;
  double tau = 0.35;
  sparse::SparseCoderConfig coder;
};

struct Classification {
  int label = -1;
  VectorXd scores;  // one per class
};

// Scores each class as ||z_q - D x_q||^2 + tau * ||x_q - m_c||^2 where z_q is
// the projected query and x_q its sparse code, then returns the argmin (ties
// to the lowest class id). The reconstruction term does not depend on c, so
// the decision coincides with nearest-medoid in coefficient space and is
// invariant to tau > 0; the scores themselves do depend on tau.
Classification classify(const ClassifierModel& model, const VectorXd& q);

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  VectorXd precision;        // per class; 0 when the class was never predicted
  VectorXd recall;           // per class; 0 when the class has no test samples
  Eigen::MatrixXi confusion; // rows = true class, cols = predicted class
  double mean_ms_per_sample = 0.0;
  Eigen::Index n_samples = 0;
};

// Classifies every column of Yt (already in the model's feature space, i.e.
// standardized with the training statistics) and aggregates metrics. Macro-F1
// averages per-class F1 over all classes, counting empty ones as 0.
EvalMetrics evaluate(const ClassifierModel& model, const MatrixXd& Yt,
                     const std::vector<int>& labels);

}  // namespace jldict::classify
