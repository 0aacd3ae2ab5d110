#include "jldict/embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

namespace jldict::embed {

namespace {

// Modified Gram-Schmidt, two passes, of `v` against the first `k` columns of
// `basis`. Returns the residual norm; `v` comes back normalized when the
// residual is meaningful.
double orthogonalize_against(const MatrixXd& basis, Eigen::Index k, VectorXd& v) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < k; ++j) {
      v -= basis.col(j).dot(v) * basis.col(j);
    }
  }
  double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return norm;
}

}  // namespace

LabelKernelFactors::LabelKernelFactors(std::vector<int> labels, int n_classes)
    : labels_(std::move(labels)), n_classes_(n_classes) {
  if (n_classes_ < 1) throw std::invalid_argument("n_classes must be at least 1");
  class_counts_.assign(n_classes_, 0);
  for (int label : labels_) {
    if (label < 0 || label >= n_classes_) {
      throw std::invalid_argument("label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(n_classes_) + ")");
    }
    ++class_counts_[label];
  }
}

MatrixXd LabelKernelFactors::one_hot() const {
  MatrixXd H = MatrixXd::Zero(n_classes_, n_samples());
  for (Eigen::Index i = 0; i < n_samples(); ++i) H(labels_[i], i) = 1.0;
  return H;
}

MatrixXd LabelKernelFactors::class_sums(const MatrixXd& Y) const {
  if (Y.cols() != n_samples()) {
    throw DimensionMismatch("data has " + std::to_string(Y.cols()) + " columns but " +
                            std::to_string(n_samples()) + " labels were given");
  }
  MatrixXd A = MatrixXd::Zero(Y.rows(), n_classes_);
  for (Eigen::Index i = 0; i < n_samples(); ++i) A.col(labels_[i]) += Y.col(i);
  return A;
}

LabelKernelFactors one_hot_labels(const std::vector<int>& labels, int n_classes) {
  return LabelKernelFactors(labels, n_classes);
}

MatrixXd scatter_matrix(const MatrixXd& Y, const LabelKernelFactors& labels) {
  MatrixXd A = labels.class_sums(Y);  // d x C
  return A * A.transpose();
}

ProjectionModel fit_mspca(const MatrixXd& Y, const LabelKernelFactors& labels, int p,
                          double epsilon) {
  Eigen::Index d = Y.rows();
  if (p < 1) throw std::invalid_argument("projection dimension p must be at least 1");
  if (p > d) {
    throw std::invalid_argument("linear fit needs p <= d (" + std::to_string(p) + " > " +
                                std::to_string(d) + "); use the kernel fit");
  }

  MatrixXd S = scatter_matrix(Y, labels);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw NumericalFailure("scatter eigensolver did not converge");

  // Eigen sorts ascending; walk from the back for descending order.
  double rank_tol = 1e-10 * S.trace();
  Eigen::Index label_rank = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (es.eigenvalues()(i) > rank_tol) ++label_rank;
  }

  MatrixXd U(d, p);
  Eigen::Index chosen = std::min<Eigen::Index>(p, label_rank);
  for (Eigen::Index j = 0; j < chosen; ++j) U.col(j) = es.eigenvectors().col(d - 1 - j);

  if (chosen < p) {
    // Label signal exhausted (rank(S) <= C). Fill with directions of maximal
    // remaining data variance: eigenvectors of the deflated scatter
    // (I - UU^T) YY^T (I - UU^T), then plain basis completion if the data
    // runs out of rank too.
    log_debug("linear fit: label rank " + std::to_string(label_rank) + " < p = " +
              std::to_string(p) + ", filling with deflated data-variance directions");
    MatrixXd Yd = Y;
    for (Eigen::Index j = 0; j < chosen; ++j) {
      Yd -= U.col(j) * (U.col(j).transpose() * Yd);
    }
    MatrixXd T = Yd * Yd.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> esd(T);
    if (esd.info() != Eigen::Success)
      throw NumericalFailure("deflated scatter eigensolver did not converge");
    double data_tol = 1e-12 * std::max(1.0, T.trace());
    Eigen::Index next = chosen;
    for (Eigen::Index i = 0; i < d && next < p; ++i) {
      Eigen::Index idx = d - 1 - i;
      if (esd.eigenvalues()(idx) <= data_tol) break;
      VectorXd v = esd.eigenvectors().col(idx);
      if (orthogonalize_against(U, next, v) < 1e-6) continue;
      U.col(next++) = v;
    }
    for (Eigen::Index i = 0; i < d && next < p; ++i) {
      VectorXd v = VectorXd::Unit(d, i);
      if (orthogonalize_against(U, next, v) < 1e-6) continue;
      U.col(next++) = v;
    }
    if (next < p) throw NumericalFailure("could not complete an orthonormal basis");
  }

  orient_columns(U);

  ProjectionModel model;
  model.mode = ProjectionMode::linear;
  model.p = p;
  model.epsilon = epsilon;
  model.scale_jl = false;
  model.U = std::move(U);
  return model;
}

MatrixXd kernel_gram(const MatrixXd& A, const MatrixXd& B, KernelType kernel, double bandwidth) {
  if (A.rows() != B.rows()) {
    throw DimensionMismatch("kernel operands have different feature dimensions (" +
                            std::to_string(A.rows()) + " vs " + std::to_string(B.rows()) + ")");
  }
  MatrixXd dots = A.transpose() * B;
  if (kernel == KernelType::linear_dot) return dots;
  if (!(bandwidth > 0.0)) throw std::invalid_argument("gaussian kernel needs bandwidth > 0");
  VectorXd a2 = A.colwise().squaredNorm();
  VectorXd b2 = B.colwise().squaredNorm();
  double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  MatrixXd K(A.cols(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.cols(); ++i) {
      double sq = std::max(0.0, a2(i) + b2(j) - 2.0 * dots(i, j));
      K(i, j) = std::exp(-sq * inv);
    }
  }
  return K;
}

ProjectionModel fit_mkspca(const MatrixXd& Y, const LabelKernelFactors& labels, int p,
                           double bandwidth, double ridge, KernelType kernel, double epsilon) {
  Eigen::Index n = Y.cols();
  if (labels.n_samples() != n) {
    throw DimensionMismatch("data has " + std::to_string(n) + " columns but " +
                            std::to_string(labels.n_samples()) + " labels were given");
  }
  if (p < 1) throw std::invalid_argument("projection dimension p must be at least 1");
  if (p > n) {
    throw std::invalid_argument("kernel fit needs p <= N (" + std::to_string(p) + " > " +
                                std::to_string(n) + ")");
  }

  MatrixXd K1 = kernel_gram(Y, Y, kernel, bandwidth);
  if (ridge < 0.0) ridge = 1e-8 * K1.trace() / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K1);
  if (es.info() != Eigen::Success) throw NumericalFailure("kernel Gram eigensolver did not converge");
  const VectorXd& lam = es.eigenvalues();  // ascending
  double lam_max = std::max(lam(n - 1), 0.0);
  if (ridge == 0.0 && lam(0) <= lam_max * 1e-14) {
    throw NumericalFailure(
        "kernel Gram matrix is numerically singular; pass ridge > 0 to regularize");
  }

  // Whitened coordinates: the pencil (K1 L K1, K1 + ridge I) becomes an
  // ordinary symmetric problem after the change of basis W = Q (lambda +
  // ridge)^(-1/2). The label term has rank at most C, so its top eigenpairs
  // come out of the C x C Gram of the whitened class-sum factor.
  VectorXd w = lam.array() + ridge;
  // Components whose kernel mass is negligible cannot be K1-normalized and are
  // excluded from the usable spectrum.
  double usable_tol = lam_max * 1e-10;
  std::vector<Eigen::Index> usable;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam(i) > usable_tol && w(i) > 0.0) usable.push_back(i);
  }
  if (static_cast<Eigen::Index>(usable.size()) < p) {
    throw NumericalFailure("kernel Gram has usable rank " + std::to_string(usable.size()) +
                           " < p = " + std::to_string(p) +
                           "; lower p, widen the bandwidth, or add data");
  }

  MatrixXd G = labels.class_sums(K1);       // K1 H^T, N x C
  MatrixXd F = es.eigenvectors().transpose() * G;  // Q^T G
  for (Eigen::Index i = 0; i < n; ++i) F.row(i) /= std::sqrt(w(i));

  MatrixXd M = F.transpose() * F;  // C x C
  Eigen::SelfAdjointEigenSolver<MatrixXd> esm(M);
  if (esm.info() != Eigen::Success)
    throw NumericalFailure("label-factor eigensolver did not converge");
  double label_tol = 1e-10 * std::max(M.trace(), 0.0);

  int C = labels.n_classes();
  MatrixXd Uw(n, p);  // basis in whitened coordinates
  Eigen::Index chosen = 0;
  for (int j = 0; j < C && chosen < p; ++j) {
    double sigma = esm.eigenvalues()(C - 1 - j);
    if (sigma <= label_tol) break;
    VectorXd u = F * esm.eigenvectors().col(C - 1 - j) / std::sqrt(sigma);
    // Guard against repeated-eigenvalue drift before accepting.
    if (orthogonalize_against(Uw, chosen, u) < 1e-6) continue;
    Uw.col(chosen++) = u;
  }

  if (chosen < p) {
    // Fill with kernel-PCA directions (whitened coordinate axes) deflated
    // against the label-driven columns. Every deflated axis is K1-orthogonal
    // to the label block, so it scores exactly zero on the label objective and
    // any ordering is a valid tie-break. Take the axes with the smallest
    // kernel variance first: padding then injects as little non-discriminative
    // energy as possible into the projected signals handed to the coder.
    log_debug("kernel fit: label rank " + std::to_string(chosen) + " < p = " + std::to_string(p) +
              ", filling with deflated kernel-PCA directions");
    std::vector<Eigen::Index> order = usable;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      double sa = lam(a) * lam(a) / w(a);
      double sb = lam(b) * lam(b) / w(b);
      if (sa != sb) return sa < sb;
      return a < b;
    });
    for (Eigen::Index idx : order) {
      if (chosen >= p) break;
      VectorXd u = VectorXd::Unit(n, idx);
      if (orthogonalize_against(Uw, chosen, u) < 0.1) continue;
      Uw.col(chosen++) = u;
    }
    if (chosen < p) {
      throw NumericalFailure("kernel spectrum exhausted at " + std::to_string(chosen) +
                             " directions < p = " + std::to_string(p));
    }
  }

  // Back to sample coordinates: V = Q (lambda + ridge)^(-1/2) Uw.
  MatrixXd scaled = Uw;
  for (Eigen::Index i = 0; i < n; ++i) scaled.row(i) /= std::sqrt(w(i));
  MatrixXd V = es.eigenvectors() * scaled;

  // Symmetric polish in the K1 metric so V^T K1 V = I to machine precision
  // (the whitened basis only guarantees it up to ridge-sized slack).
  MatrixXd Cm = V.transpose() * (K1 * V).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> esc(Cm);
  if (esc.info() != Eigen::Success) throw NumericalFailure("normalization polish did not converge");
  if (esc.eigenvalues()(0) <= 0.0) {
    throw NumericalFailure("projection basis lost rank during kernel normalization");
  }
  MatrixXd half = esc.eigenvectors() *
                  esc.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                  esc.eigenvectors().transpose();
  V = V * half;
  orient_columns(V);

  ProjectionModel model;
  model.mode = ProjectionMode::kernel;
  model.p = p;
  model.epsilon = epsilon;
  model.scale_jl = false;
  model.V = std::move(V);
  model.kernel = kernel;
  model.bandwidth = bandwidth;
  model.train_features = Y;
  return model;
}

MatrixXd transform(const ProjectionModel& model, const MatrixXd& Yq) {
  if (Yq.rows() != model.input_dim()) {
    throw DimensionMismatch("query has " + std::to_string(Yq.rows()) +
                            " features but the projection expects " +
                            std::to_string(model.input_dim()));
  }
  MatrixXd Z;
  if (model.mode == ProjectionMode::linear) {
    Z = model.U.transpose() * Yq;
  } else {
    Z = model.V.transpose() * kernel_gram(model.train_features, Yq, model.kernel, model.bandwidth);
  }
  if (model.scale_jl) Z /= std::sqrt(static_cast<double>(model.p));
  return Z;
}

DistortionReport distortion_report(const ProjectionModel& model, const MatrixXd& Y,
                                   std::size_t n_pairs, std::uint64_t seed) {
  Eigen::Index n = Y.cols();
  if (n < 2) throw std::invalid_argument("distortion report needs at least 2 samples");
  if (n_pairs == 0) throw std::invalid_argument("n_pairs must be positive");
  if (!(model.epsilon > 0.0) || !(model.epsilon < 1.0)) {
    throw std::invalid_argument("model carries no perturbation budget in (0, 1)");
  }

  std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  if (n_pairs >= total) {
    pairs.reserve(total);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  } else {
    Rng rng(seed);
    std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
    while (seen.size() < n_pairs) {
      Eigen::Index i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      Eigen::Index j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      if (i == j) continue;
      seen.emplace(std::min(i, j), std::max(i, j));
    }
    pairs.assign(seen.begin(), seen.end());
  }

  MatrixXd Z = transform(model, Y);
  std::vector<double> ratios;
  ratios.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    double den = (Y.col(i) - Y.col(j)).squaredNorm();
    if (den == 0.0) continue;
    double num = (Z.col(i) - Z.col(j)).squaredNorm();
    ratios.push_back(num / den);
  }
  if (ratios.empty()) {
    throw std::invalid_argument("every sampled pair had zero distance; cannot measure distortion");
  }

  DistortionReport report;
  report.epsilon = model.epsilon;
  report.n_pairs = ratios.size();
  report.min_ratio = *std::min_element(ratios.begin(), ratios.end());
  report.max_ratio = *std::max_element(ratios.begin(), ratios.end());
  report.mean_ratio = std::accumulate(ratios.begin(), ratios.end(), 0.0) /
                      static_cast<double>(ratios.size());
  std::size_t outside = 0;
  for (double r : ratios) {
    if (r <= 1.0 - report.epsilon || r >= 1.0 + report.epsilon) ++outside;
  }
  report.fraction_outside = static_cast<double>(outside) / static_cast<double>(ratios.size());

  constexpr int kBins = 20;
  double lo = report.min_ratio;
  double width = (report.max_ratio - report.min_ratio) / kBins;
  report.bin_edges.resize(kBins + 1);
  for (int b = 0; b <= kBins; ++b) report.bin_edges[b] = lo + width * b;
  report.bin_counts.assign(kBins, 0);
  for (double r : ratios) {
    int b = width > 0.0 ? static_cast<int>((r - lo) / width) : 0;
    b = std::clamp(b, 0, kBins - 1);
    ++report.bin_counts[static_cast<std::size_t>(b)];
  }
  return report;
}

}  // namespace jldict::embed
