#include "jldict/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace jldict::sparse {

namespace {

void check_config(const SparseCoderConfig& config) {
  if (!(config.sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(config.prune_threshold > 0.0))
    throw std::invalid_argument("prune_threshold must be positive");
  if (!(config.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (config.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
}

void check_dictionary(const MatrixXd& D) {
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    if (std::abs(D.col(j).squaredNorm() - 1.0) > 1e-6) {
      throw std::invalid_argument("dictionary column " + std::to_string(j) +
                                  " is not unit-norm");
    }
  }
}

// Row energy accumulated over sorted squares. Summation order is then a
// function of the value multiset only, so permuting snapshots cannot perturb
// gamma even in the last ulp.
double sorted_row_energy(const MatrixXd& Mu, Eigen::Index row, std::vector<double>& scratch) {
  scratch.clear();
  for (Eigen::Index m = 0; m < Mu.cols(); ++m) {
    double v = Mu(row, m);
    scratch.push_back(v * v);
  }
  std::sort(scratch.begin(), scratch.end());
  double sum = 0.0;
  for (double v : scratch) sum += v;
  return sum;
}

struct Posterior {
  MatrixXd mu;          // |A| x M posterior mean over active rows
  VectorXd sigma_diag;  // |A| posterior variances
};

// Posterior over the active rows. Two algebraically identical routes: the
// direct |A| x |A| precision solve when the active set is small, and the
// p x p Woodbury form Sigma_z = sigma2 I + D Gamma D^T when it is not.
// G = D^T D and B = D^T Z are constant across EM iterations, so the caller
// computes them once and the active blocks are sliced instead of re-multiplied.
Posterior active_posterior(const MatrixXd& D, const MatrixXd& Z, const MatrixXd& G,
                           const MatrixXd& B, const VectorXd& gammas,
                           const std::vector<Eigen::Index>& active, double sigma2,
                           bool want_mu) {
  Eigen::Index p = D.rows();
  Eigen::Index a = static_cast<Eigen::Index>(active.size());
  VectorXd ga = gammas(active);

  Posterior post;
  if (a <= p) {
    MatrixXd precision = G(active, active) / sigma2;
    precision.diagonal() += ga.cwiseInverse();
    Eigen::LDLT<MatrixXd> ldlt(precision);
    if (ldlt.info() != Eigen::Success)
      throw NumericalFailure("posterior precision factorization failed");
    MatrixXd Sigma = ldlt.solve(MatrixXd::Identity(a, a));
    post.sigma_diag = Sigma.diagonal();
    if (want_mu) post.mu = ldlt.solve(B(active, Eigen::all)) / sigma2;
  } else {
    MatrixXd Da = D(Eigen::all, active);
    MatrixXd Sz = Da * ga.asDiagonal() * Da.transpose();
    Sz.diagonal().array() += sigma2;
    Eigen::LDLT<MatrixXd> ldlt(Sz);
    if (ldlt.info() != Eigen::Success)
      throw NumericalFailure("snapshot covariance factorization failed");
    MatrixXd R = ldlt.solve(Da);  // Sz^-1 Da, p x a
    post.sigma_diag.resize(a);
    for (Eigen::Index k = 0; k < a; ++k) {
      double q = Da.col(k).dot(R.col(k));
      post.sigma_diag(k) = ga(k) - ga(k) * ga(k) * q;
    }
    if (want_mu) post.mu = ga.asDiagonal() * (Da.transpose() * ldlt.solve(Z));
  }
  if (!post.sigma_diag.allFinite() || (want_mu && !post.mu.allFinite())) {
    throw NumericalFailure("non-finite values in the sparse coder posterior");
  }
  // Round-off guard: posterior variances are positive in exact arithmetic.
  post.sigma_diag = post.sigma_diag.cwiseMax(0.0);
  return post;
}

}  // namespace

CodingResult msbl_code(const MatrixXd& D, const MatrixXd& Z, const SparseCoderConfig& config) {
  check_config(config);
  check_dictionary(D);
  if (Z.rows() != D.rows()) {
    throw DimensionMismatch("signals have " + std::to_string(Z.rows()) +
                            " rows but the dictionary has " + std::to_string(D.rows()));
  }
  if (Z.cols() < 1) throw std::invalid_argument("need at least one snapshot column");

  Eigen::Index K = D.cols();
  Eigen::Index M = Z.cols();

  CodingResult result;
  result.X = MatrixXd::Zero(K, M);
  result.gammas = VectorXd::Ones(K);

  // Zero data: the posterior mean is zero for every gamma and the EM limit of
  // every gamma is zero; return the limit directly instead of tracing the
  // harmonically slow decay.
  if (Z.squaredNorm() == 0.0) {
    result.gammas.setZero();
    result.converged = true;
    return result;
  }

  std::vector<Eigen::Index> active(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < K; ++i) active[static_cast<std::size_t>(i)] = i;
  std::vector<double> scratch;

  MatrixXd G = D.transpose() * D;
  MatrixXd B = D.transpose() * Z;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    if (active.empty()) {
      result.converged = true;
      break;
    }
    Posterior post =
        active_posterior(D, Z, G, B, result.gammas, active, config.sigma2, true);

    double max_rel_change = 0.0;
    std::vector<Eigen::Index> survivors;
    survivors.reserve(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      Eigen::Index i = active[k];
      double old_gamma = result.gammas(i);
      double energy = sorted_row_energy(post.mu, static_cast<Eigen::Index>(k), scratch);
      double new_gamma = energy / static_cast<double>(M) + post.sigma_diag(static_cast<Eigen::Index>(k));
      if (!std::isfinite(new_gamma)) throw NumericalFailure("non-finite gamma update");
      max_rel_change = std::max(max_rel_change,
                                std::abs(new_gamma - old_gamma) / std::max(old_gamma, 1e-300));
      if (new_gamma < config.prune_threshold) {
        result.gammas(i) = 0.0;  // permanent prune
      } else {
        result.gammas(i) = new_gamma;
        survivors.push_back(i);
      }
    }
    active = std::move(survivors);
    result.iterations = iter + 1;
    if (max_rel_change < config.tol) {
      result.converged = true;
      break;
    }
  }
  if (active.empty()) result.converged = true;

  // Final posterior mean under the final gammas keeps X consistent with the
  // reported hyperparameters; pruned rows stay exactly zero.
  if (!active.empty()) {
    Posterior post =
        active_posterior(D, Z, G, B, result.gammas, active, config.sigma2, true);
    for (std::size_t k = 0; k < active.size(); ++k) {
      result.X.row(active[k]) = post.mu.row(static_cast<Eigen::Index>(k));
    }
  }
  return result;
}

VectorXd code_single(const MatrixXd& D, const VectorXd& z, const SparseCoderConfig& config) {
  return msbl_code(D, z, config).X.col(0);
}

MatrixXd greedy_code(const MatrixXd& D, const MatrixXd& Z, int sparsity) {
  if (Z.rows() != D.rows()) {
    throw DimensionMismatch("signals have " + std::to_string(Z.rows()) +
                            " rows but the dictionary has " + std::to_string(D.rows()));
  }
  if (sparsity < 1 || sparsity > D.rows()) {
    throw std::invalid_argument("sparsity must lie in [1, p]");
  }

  Eigen::Index K = D.cols();
  MatrixXd X = MatrixXd::Zero(K, Z.cols());
  for (Eigen::Index m = 0; m < Z.cols(); ++m) {
    VectorXd residual = Z.col(m);
    std::vector<Eigen::Index> support;
    for (int t = 0; t < sparsity; ++t) {
      VectorXd corr = D.transpose() * residual;
      Eigen::Index best = 0;
      double best_abs = -1.0;
      for (Eigen::Index i = 0; i < K; ++i) {
        double a = std::abs(corr(i));
        if (a > best_abs) {
          best_abs = a;
          best = i;
        }
      }
      if (best_abs <= 0.0) break;  // residual already orthogonal to every atom
      if (std::find(support.begin(), support.end(), best) == support.end())
        support.push_back(best);
      MatrixXd Ds(D.rows(), static_cast<Eigen::Index>(support.size()));
      for (std::size_t k = 0; k < support.size(); ++k) Ds.col(static_cast<Eigen::Index>(k)) = D.col(support[k]);
      VectorXd coef = Ds.colPivHouseholderQr().solve(Z.col(m));
      residual = Z.col(m) - Ds * coef;
      X.col(m).setZero();
      for (std::size_t k = 0; k < support.size(); ++k)
        X(support[k], m) = coef(static_cast<Eigen::Index>(k));
    }
  }
  return X;
}

double residual_error(const MatrixXd& Z, const MatrixXd& D, const MatrixXd& X) {
  if (D.rows() != Z.rows() || D.cols() != X.rows() || X.cols() != Z.cols()) {
    throw DimensionMismatch("residual_error operands do not conform: Z " +
                            std::to_string(Z.rows()) + "x" + std::to_string(Z.cols()) + ", D " +
                            std::to_string(D.rows()) + "x" + std::to_string(D.cols()) + ", X " +
                            std::to_string(X.rows()) + "x" + std::to_string(X.cols()));
  }
  return (Z - D * X).squaredNorm();
}

double marginal_objective(const MatrixXd& D, const MatrixXd& Z, const VectorXd& gammas,
                          double sigma2) {
  if (gammas.size() != D.cols()) throw DimensionMismatch("one gamma per atom required");
  MatrixXd Sz = D * gammas.asDiagonal() * D.transpose();
  Sz.diagonal().array() += sigma2;
  Eigen::LDLT<MatrixXd> ldlt(Sz);
  if (ldlt.info() != Eigen::Success)
    throw NumericalFailure("snapshot covariance factorization failed");
  double logdet = ldlt.vectorD().array().log().sum();
  double quad = (Z.array() * ldlt.solve(Z).array()).sum() / static_cast<double>(Z.cols());
  return logdet + quad;
}

}  // namespace jldict::sparse
