#include "jldict/dict.hpp"

#include <algorithm>
#include <cmath>

namespace jldict::dict {

namespace {

Dictionary random_unit_dictionary(int p, int K, std::uint64_t seed) {
  Rng rng(seed);
  Dictionary dict;
  dict.D = gaussian_matrix(p, K, rng);
  for (Eigen::Index j = 0; j < K; ++j) {
    double norm = dict.D.col(j).norm();
    if (norm == 0.0) {
      // Vanishing draws are possible only in theory; keep the contract anyway.
      dict.D(0, j) = 1.0;
      continue;
    }
    dict.D.col(j) /= norm;
  }
  return dict;
}

// Flips (u, v) so that u's largest-magnitude entry is positive; the rank-1
// product is unchanged.
void orient_pair(VectorXd& u, VectorXd& v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double a = std::abs(u(i));
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (u(arg) < 0.0) {
    u = -u;
    v = -v;
  }
}

}  // namespace

std::int64_t dictionary_size(std::int64_t samples_per_class, std::int64_t n_classes) {
  if (samples_per_class < 1 || n_classes < 1)
    throw std::invalid_argument("dictionary_size needs positive inputs");
  return samples_per_class * n_classes;
}

Dictionary init_dictionary(int p, int K, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("atom dimension p must be at least 1");
  if (K < p) {
    throw std::invalid_argument("overcomplete dictionary needs K >= p (got K = " +
                                std::to_string(K) + ", p = " + std::to_string(p) + ")");
  }
  return random_unit_dictionary(p, K, seed);
}

SweepOutcome ksvd_sweep(const Dictionary& dict, const MatrixXd& Z, const MatrixXd& X) {
  Eigen::Index p = dict.atom_dim();
  Eigen::Index K = dict.atom_count();
  if (Z.rows() != p || X.rows() != K || X.cols() != Z.cols()) {
    throw DimensionMismatch("ksvd_sweep operands do not conform");
  }

  SweepOutcome out;
  out.dictionary = dict;
  out.X = X;
  MatrixXd& D = out.dictionary.D;
  MatrixXd& Xm = out.X;
  MatrixXd R = Z - D * Xm;  // running residual, kept in sync atom by atom

  for (Eigen::Index j = 0; j < K; ++j) {
    std::vector<Eigen::Index> omega;
    for (Eigen::Index n = 0; n < Xm.cols(); ++n) {
      if (Xm(j, n) != 0.0) omega.push_back(n);
    }

    if (omega.empty()) {
      // Unused atom: point it at the worst-reconstructed training column and
      // give it the 1-D least-squares coefficient, which can only lower the
      // loss.
      Eigen::Index worst = 0;
      double worst_err = -1.0;
      for (Eigen::Index n = 0; n < R.cols(); ++n) {
        double e = R.col(n).squaredNorm();
        if (e > worst_err) {
          worst_err = e;
          worst = n;
        }
      }
      double znorm = Z.col(worst).norm();
      if (znorm == 0.0) continue;  // nothing representable there
      VectorXd atom = Z.col(worst) / znorm;
      VectorXd dummy = VectorXd::Zero(1);
      orient_pair(atom, dummy);
      double coef = atom.dot(R.col(worst));
      D.col(j) = atom;
      Xm(j, worst) = coef;
      R.col(worst) -= coef * atom;
      ++out.replaced;
      continue;
    }

    Eigen::Index m = static_cast<Eigen::Index>(omega.size());
    MatrixXd E(p, m);
    VectorXd v(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      E.col(k) = R.col(omega[static_cast<std::size_t>(k)]) +
                 D.col(j) * Xm(j, omega[static_cast<std::size_t>(k)]);
      v(k) = Xm(j, omega[static_cast<std::size_t>(k)]);
    }

    // Rank-1 refit by alternating least squares from the incumbent pair. Each
    // half-step solves one factor exactly, so the restricted error never
    // rises; warm-starting preserves monotonicity even if we stop early.
    VectorXd u = D.col(j);
    bool degenerate = false;
    for (int it = 0; it < 200; ++it) {
      VectorXd u_new = E * v;
      double norm = u_new.norm();
      if (norm == 0.0) {
        degenerate = true;  // E annihilates v: no rank-1 energy left to capture
        break;
      }
      u_new /= norm;
      v = E.transpose() * u_new;
      double delta = std::min((u_new - u).norm(), (u_new + u).norm());
      u = u_new;
      if (delta < 1e-13) break;
    }
    if (!u.allFinite() || !v.allFinite()) {
      throw NumericalFailure("rank-1 refit produced non-finite values at atom " +
                             std::to_string(j));
    }
    if (degenerate) {
      // Keep the old direction; the coefficients collapse to the exact 1-D
      // least-squares values (E^T u), which cannot increase the error either.
      v = E.transpose() * u;
    }
    orient_pair(u, v);
    D.col(j) = u;
    for (Eigen::Index k = 0; k < m; ++k) Xm(j, omega[static_cast<std::size_t>(k)]) = v(k);
    for (Eigen::Index k = 0; k < m; ++k) {
      R.col(omega[static_cast<std::size_t>(k)]) = E.col(k) - u * v(k);
    }
  }
  return out;
}

TrainOutcome train(const MatrixXd& Z, const std::vector<int>& labels, const TrainConfig& config) {
  Eigen::Index p = Z.rows();
  Eigen::Index N = Z.cols();
  if (static_cast<Eigen::Index>(labels.size()) != N)
    throw DimensionMismatch("one label per signal column required");
  if (config.atoms_per_class < 1) throw std::invalid_argument("atoms_per_class must be positive");
  if (config.max_outer < 1) throw std::invalid_argument("max_outer must be at least 1");

  int n_classes = 0;
  for (int label : labels) {
    if (label < 0) throw std::invalid_argument("negative class label");
    n_classes = std::max(n_classes, label + 1);
  }
  if (n_classes == 0) throw std::invalid_argument("no training signals");

  Eigen::Index K = static_cast<Eigen::Index>(
      dictionary_size(config.atoms_per_class, n_classes));
  if (K < p) {
    log_info("dictionary is undercomplete (K = " + std::to_string(K) + " < p = " +
             std::to_string(p) + "); representation error will not reach zero");
  }
  if (N < K) {
    log_info("fewer training signals than atoms (N = " + std::to_string(N) + " < K = " +
             std::to_string(K) + "); expect many unused-atom replacements");
  }

  std::vector<std::vector<Eigen::Index>> class_cols(static_cast<std::size_t>(n_classes));
  for (Eigen::Index n = 0; n < N; ++n) class_cols[static_cast<std::size_t>(labels[n])].push_back(n);

  TrainOutcome out;
  out.dictionary = random_unit_dictionary(static_cast<int>(p), static_cast<int>(K), config.seed);
  out.X = MatrixXd::Zero(K, N);

  double prev_loss = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < config.max_outer; ++outer) {
    // Coding phase, one shared-support batch per class. A block is accepted
    // only if it does not increase its residual, which keeps the recorded
    // trajectory non-increasing (the Bayesian posterior mean is shrunk toward
    // zero and near a fixed point could otherwise wiggle the loss upward).
    for (int c = 0; c < n_classes; ++c) {
      const std::vector<Eigen::Index>& cols = class_cols[static_cast<std::size_t>(c)];
      if (cols.empty()) continue;
      MatrixXd Zc(p, static_cast<Eigen::Index>(cols.size()));
      MatrixXd Xc_old(K, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) {
        Zc.col(static_cast<Eigen::Index>(k)) = Z.col(cols[k]);
        Xc_old.col(static_cast<Eigen::Index>(k)) = out.X.col(cols[k]);
      }
      sparse::CodingResult coded = sparse::msbl_code(out.dictionary.D, Zc, config.coder);
      double err_new = (Zc - out.dictionary.D * coded.X).squaredNorm();
      double err_old = (Zc - out.dictionary.D * Xc_old).squaredNorm();
      if (err_new <= err_old) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
          out.X.col(cols[k]) = coded.X.col(static_cast<Eigen::Index>(k));
        }
      } else {
        log_debug("class " + std::to_string(c) + " recode rejected (residual " +
                  format_float(err_new) + " > " + format_float(err_old) + ")");
      }
    }

    SweepOutcome swept = ksvd_sweep(out.dictionary, Z, out.X);
    out.dictionary = std::move(swept.dictionary);
    out.X = std::move(swept.X);
    out.report.replaced_atoms += swept.replaced;

    double loss = sparse::residual_error(Z, out.dictionary.D, out.X);
    out.report.loss_trajectory.push_back(loss);
    out.report.outer_iterations = outer + 1;
    log_debug("outer " + std::to_string(outer + 1) + ": loss " + format_float(loss));

    if (loss <= config.tol) {
      out.report.converged = true;
      break;
    }
    if (std::isfinite(prev_loss) &&
        (prev_loss - loss) < 1e-4 * std::max(prev_loss, 1e-300)) {
      out.report.converged = true;
      break;
    }
    prev_loss = loss;
  }
  return out;
}

}  // namespace jldict::dict
