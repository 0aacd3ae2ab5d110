#include "jldict/classify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace jldict::classify {

namespace {

void check_class(const ClassMedoids& medoids, int c) {
  if (c < 0 || c >= medoids.n_classes()) {
    throw std::invalid_argument("class " + std::to_string(c) + " does not exist");
  }
}

}  // namespace

const VectorXd& ClassMedoids::medoid(int c) const {
  check_class(*this, c);
  return members_[static_cast<std::size_t>(c)]
                 [static_cast<std::size_t>(medoid_index_[static_cast<std::size_t>(c)])];
}

int ClassMedoids::medoid_member_index(int c) const {
  check_class(*this, c);
  return medoid_index_[static_cast<std::size_t>(c)];
}

const std::vector<VectorXd>& ClassMedoids::members(int c) const {
  check_class(*this, c);
  return members_[static_cast<std::size_t>(c)];
}

const std::vector<double>& ClassMedoids::distance_sums(int c) const {
  check_class(*this, c);
  return sums_[static_cast<std::size_t>(c)];
}

MatrixXd ClassMedoids::medoid_matrix() const {
  if (n_classes() == 0) return MatrixXd();
  MatrixXd M(medoid(0).size(), n_classes());
  for (int c = 0; c < n_classes(); ++c) M.col(c) = medoid(c);
  return M;
}

ClassMedoids ClassMedoids::from_medoid_matrix(const MatrixXd& medoids) {
  ClassMedoids out;
  out.has_members_ = false;
  out.members_.resize(static_cast<std::size_t>(medoids.cols()));
  out.sums_.resize(static_cast<std::size_t>(medoids.cols()));
  out.medoid_index_.assign(static_cast<std::size_t>(medoids.cols()), 0);
  for (Eigen::Index c = 0; c < medoids.cols(); ++c) {
    out.members_[static_cast<std::size_t>(c)].push_back(medoids.col(c));
    out.sums_[static_cast<std::size_t>(c)].push_back(0.0);
  }
  return out;
}

void ClassMedoids::recompute_medoid(int c) {
  const std::vector<double>& sums = sums_[static_cast<std::size_t>(c)];
  int best = 0;
  for (int i = 1; i < static_cast<int>(sums.size()); ++i) {
    if (sums[static_cast<std::size_t>(i)] < sums[static_cast<std::size_t>(best)]) best = i;
  }
  medoid_index_[static_cast<std::size_t>(c)] = best;
}

ClassMedoids compute_medoids(const MatrixXd& X, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != X.cols())
    throw DimensionMismatch("one label per coefficient column required");
  int n_classes = 0;
  for (int label : labels) {
    if (label < 0) throw std::invalid_argument("negative class label");
    n_classes = std::max(n_classes, label + 1);
  }

  ClassMedoids out;
  out.members_.resize(static_cast<std::size_t>(n_classes));
  out.sums_.resize(static_cast<std::size_t>(n_classes));
  out.medoid_index_.assign(static_cast<std::size_t>(n_classes), 0);
  for (Eigen::Index n = 0; n < X.cols(); ++n) {
    out.members_[static_cast<std::size_t>(labels[static_cast<std::size_t>(n)])].push_back(
        X.col(n));
  }
  for (int c = 0; c < n_classes; ++c) {
    const std::vector<VectorXd>& members = out.members_[static_cast<std::size_t>(c)];
    if (members.empty()) {
      throw std::invalid_argument("class " + std::to_string(c) + " has no members");
    }
    std::vector<double>& sums = out.sums_[static_cast<std::size_t>(c)];
    sums.assign(members.size(), 0.0);
    // Ascending-index accumulation; online insertion replays exactly this
    // order, which is what makes the online/offline equivalence bitwise.
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (j == i) continue;
        sums[i] += (members[i] - members[j]).norm();
      }
    }
    out.recompute_medoid(c);
  }
  return out;
}

void update_medoid_online(ClassMedoids& medoids, const VectorXd& x_new, int cls) {
  check_class(medoids, cls);
  if (!medoids.has_members()) {
    throw std::invalid_argument(
        "online medoid updates need the training-time member sets, which this "
        "model was loaded without");
  }
  std::vector<VectorXd>& members = medoids.members_[static_cast<std::size_t>(cls)];
  std::vector<double>& sums = medoids.sums_[static_cast<std::size_t>(cls)];
  if (!members.empty() && members.front().size() != x_new.size()) {
    throw DimensionMismatch("coefficient vector has dimension " + std::to_string(x_new.size()) +
                            " but the class stores " + std::to_string(members.front().size()));
  }
  double new_sum = 0.0;
  for (std::size_t j = 0; j < members.size(); ++j) {
    sums[j] += (members[j] - x_new).norm();
    new_sum += (x_new - members[j]).norm();
  }
  members.push_back(x_new);
  sums.push_back(new_sum);
  medoids.recompute_medoid(cls);
}

Classification classify(const ClassifierModel& model, const VectorXd& q) {
  if (!(model.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  int n_classes = model.medoids.n_classes();
  if (n_classes == 0) throw std::invalid_argument("classifier has no classes");

  MatrixXd z = embed::transform(model.projection, q);
  VectorXd x = sparse::code_single(model.dictionary.D, z.col(0), model.coder);
  double reconstruction = (z.col(0) - model.dictionary.D * x).squaredNorm();

  Classification result;
  result.scores.resize(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    result.scores(c) = reconstruction + model.tau * (x - model.medoids.medoid(c)).squaredNorm();
  }
  result.label = 0;
  for (int c = 1; c < n_classes; ++c) {
    if (result.scores(c) < result.scores(result.label)) result.label = c;
  }
  return result;
}

EvalMetrics evaluate(const ClassifierModel& model, const MatrixXd& Yt,
                     const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != Yt.cols())
    throw std::invalid_argument("one label per test column required");
  if (Yt.cols() < 1) throw std::invalid_argument("need at least one test sample");
  int n_classes = model.medoids.n_classes();
  for (int label : labels) {
    if (label < 0 || label >= n_classes)
      throw std::invalid_argument("test label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(n_classes) + ")");
  }

  EvalMetrics metrics;
  metrics.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  metrics.n_samples = Yt.cols();

  auto start = std::chrono::steady_clock::now();
  for (Eigen::Index m = 0; m < Yt.cols(); ++m) {
    Classification c = classify(model, Yt.col(m));
    ++metrics.confusion(labels[static_cast<std::size_t>(m)], c.label);
  }
  auto stop = std::chrono::steady_clock::now();
  metrics.mean_ms_per_sample =
      std::chrono::duration<double, std::milli>(stop - start).count() /
      static_cast<double>(Yt.cols());

  int correct = metrics.confusion.diagonal().sum();
  metrics.accuracy = static_cast<double>(correct) / static_cast<double>(Yt.cols());

  metrics.precision.resize(n_classes);
  metrics.recall.resize(n_classes);
  double f1_sum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    double tp = metrics.confusion(c, c);
    double predicted = metrics.confusion.col(c).sum();
    double actual = metrics.confusion.row(c).sum();
    metrics.precision(c) = predicted > 0 ? tp / predicted : 0.0;
    metrics.recall(c) = actual > 0 ? tp / actual : 0.0;
    double denom = metrics.precision(c) + metrics.recall(c);
    f1_sum += denom > 0 ? 2.0 * metrics.precision(c) * metrics.recall(c) / denom : 0.0;
  }
  metrics.macro_f1 = f1_sum / static_cast<double>(n_classes);
  return metrics;
}

}  // namespace jldict::classify
