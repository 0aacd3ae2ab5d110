#pragma once

#include "jldict/common.hpp"

namespace jldict::sparse {

struct SparseCoderConfig {
  double sigma2 = 0.03;           // noise variance of the coding model
  int max_iters = 200;
  double prune_threshold = 1e-6;  // gamma below this is clamped to zero for good
  double tol = 1e-4;              // max relative gamma change at convergence
};

struct CodingResult {
  MatrixXd X;        // K x M posterior mean; rows with gamma == 0 are exactly zero
  VectorXd gammas;   // K row-variance hyperparameters, >= 0
  int iterations = 0;
  bool converged = false;
};

// Multi-snapshot sparse Bayesian learning by expectation-maximization. All M
// columns of Z share one row-variance hyperparameter vector gamma (init 1).
// Each iteration forms the posterior over the active rows,
//   Sigma = (Gamma^-1 + D^T D / sigma2)^-1,   Mu = Sigma D^T Z / sigma2,
// updates gamma_i <- ||row_i(Mu)||^2 / M + Sigma_ii, and permanently prunes
// rows whose gamma falls below prune_threshold. Stops when the largest
// relative gamma change drops below tol (converged) or at max_iters. The
// returned X is the posterior mean under the final gammas.
CodingResult msbl_code(const MatrixXd& D, const MatrixXd& Z, const SparseCoderConfig& config);

// msbl_code with a single snapshot; returns the lone coefficient column.
VectorXd code_single(const MatrixXd& D, const VectorXd& z, const SparseCoderConfig& config);

// Greedy pursuit oracle used to cross-validate the Bayesian coder: per column,
// repeatedly select the atom of maximal absolute residual correlation and
// least-squares refit on the selected set. At most `sparsity` nonzeros per
// column.
MatrixXd greedy_code(const MatrixXd& D, const MatrixXd& Z, int sparsity);

// ||Z - D X||_F^2.
double residual_error(const MatrixXd& Z, const MatrixXd& D, const MatrixXd& X);

// Negated SBL log marginal likelihood log|Sigma_z| + tr(Sigma_z^-1 Z Z^T)/M
// with Sigma_z = sigma2 I + D Gamma D^T. Exposed for convergence diagnostics
// and tests; EM iterations never increase it.
double marginal_objective(const MatrixXd& D, const MatrixXd& Z, const VectorXd& gammas,
                          double sigma2);

}  // namespace jldict::sparse
