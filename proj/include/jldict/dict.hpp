#pragma once

#include "jldict/common.hpp"
#include "jldict/sparse.hpp"

#include <cstdint>
#include <vector>

namespace jldict::dict {

// Dictionary with unit-norm columns (atoms) of dimension p, the projected
// signal length. Plain aggregate: construction helpers enforce their own
// preconditions (init_dictionary insists on K >= p; the training loop accepts
// undercomplete sizes with a warning, see train()).
struct Dictionary {
  MatrixXd D;  // p x K

  Eigen::Index atom_dim() const { return D.rows(); }
  Eigen::Index atom_count() const { return D.cols(); }
};

struct TrainConfig {
  int atoms_per_class = 10;
  double tol = 0.0;     // absolute Frobenius-loss stop; 0 disables
  int max_outer = 30;
  std::uint64_t seed = 0;
  sparse::SparseCoderConfig coder;
};

struct TrainReport {
  std::vector<double> loss_trajectory;  // one entry per outer iteration
  int outer_iterations = 0;
  bool converged = false;
  int replaced_atoms = 0;
};

// Atom-count heuristic: samples kept per class times number of classes.
std::int64_t dictionary_size(std::int64_t samples_per_class, std::int64_t n_classes);

// Seeded iid standard-normal entries, columns normalized. Demands the
// overcomplete shape K >= p.
Dictionary init_dictionary(int p, int K, std::uint64_t seed);

struct SweepOutcome {
  Dictionary dictionary;
  MatrixXd X;
  int replaced = 0;  // unused atoms replaced this sweep
};

// One K-SVD pass in atom index order: for each atom, the restricted error
// over the columns that use it is refit by its best rank-1 approximation
// (alternating least squares warm-started from the incumbent pair, which
// keeps ||Z - D X||_F^2 non-increasing even before convergence). Atoms used
// by no column are replaced by the worst-reconstructed training column.
SweepOutcome ksvd_sweep(const Dictionary& dict, const MatrixXd& Z, const MatrixXd& X);

struct TrainOutcome {
  Dictionary dictionary;
  MatrixXd X;
  TrainReport report;
};

// Alternates per-class-batched Bayesian coding (sparse module) with K-SVD
// sweeps from a seeded random start. A coded block is accepted only when it
// does not increase that block's residual, which makes the recorded loss
// trajectory non-increasing. Stops at loss <= tol, relative improvement
// below 1e-4, or max_outer.
TrainOutcome train(const MatrixXd& Z, const std::vector<int>& labels, const TrainConfig& config);

}  // namespace jldict::dict
