#include <doctest.h>

#include "jldict/embed.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numeric>
#include <vector>

using namespace jldict;

namespace {

// Random semi-orthogonal d x p competitor via QR of a Gaussian draw.
MatrixXd random_orthonormal(Eigen::Index d, Eigen::Index p, Rng& rng) {
  MatrixXd g = gaussian_matrix(d, p, rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(d, p);
  return q;
}

}  // namespace

TEST_CASE("one-hot factors match the hand example") {
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 1, 0}, 2);
  MatrixXd H = f.one_hot();
  REQUIRE(H.rows() == 2);
  REQUIRE(H.cols() == 3);
  MatrixXd expect(2, 3);
  expect << 1, 0, 1,
            0, 1, 0;
  CHECK(H == expect);
  CHECK(f.class_counts() == std::vector<int>{2, 1});
}

TEST_CASE("single-class one-hot is a row of ones and L is all-ones") {
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 0, 0, 0}, 1);
  MatrixXd H = f.one_hot();
  CHECK(H == MatrixXd::Ones(1, 4));
  MatrixXd L = H.transpose() * H;
  CHECK(L == MatrixXd::Ones(4, 4));
}

TEST_CASE("label kernel has ones exactly at equal-label pairs") {
  std::vector<int> labels = {2, 0, 1, 2, 1, 0, 0};
  embed::LabelKernelFactors f = embed::one_hot_labels(labels, 3);
  MatrixXd H = f.one_hot();
  MatrixXd L = H.transpose() * H;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      double expect = labels[i] == labels[j] ? 1.0 : 0.0;
      CHECK(L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == expect);
    }
  }
}

TEST_CASE("one-hot rejects out-of-range labels") {
  CHECK_THROWS_AS(embed::one_hot_labels({0, 2}, 2), std::invalid_argument);
  CHECK_THROWS_AS(embed::one_hot_labels({-1}, 2), std::invalid_argument);
}

TEST_CASE("scatter with one sample per class is the plain data scatter") {
  Rng rng(1);
  MatrixXd Y = gaussian_matrix(4, 3, rng);
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 1, 2}, 3);
  MatrixXd S = embed::scatter_matrix(Y, f);
  CHECK((S - Y * Y.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scatter equals the explicit Y L Y^T evaluation") {
  MatrixXd Y(2, 3);
  Y << 1, 2, 3,
       4, 5, 6;
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 1, 0}, 2);
  MatrixXd S = embed::scatter_matrix(Y, f);
  MatrixXd H = f.one_hot();
  MatrixXd direct = Y * (H.transpose() * H) * Y.transpose();
  CHECK((S - direct).cwiseAbs().maxCoeff() <= 1e-10);
  // And against the sum of class-sum outer products.
  VectorXd s0 = Y.col(0) + Y.col(2);
  VectorXd s1 = Y.col(1);
  MatrixXd outer = s0 * s0.transpose() + s1 * s1.transpose();
  CHECK((S - outer).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("scatter rank never exceeds min(d, C)") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    int d = 3 + static_cast<int>(rng.below(10));
    int C = 2 + static_cast<int>(rng.below(4));
    int n = C * (2 + static_cast<int>(rng.below(5)));
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(i % C);
    MatrixXd Y = gaussian_matrix(d, n, rng);
    MatrixXd S = embed::scatter_matrix(Y, embed::one_hot_labels(labels, C));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    double tol = 1e-10 * S.trace();
    int above = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      above += (es.eigenvalues()(i) > tol);
    CHECK(above <= std::min(d, C));
  }
}

TEST_CASE("scatter rejects mismatched operands") {
  MatrixXd Y = MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(embed::scatter_matrix(Y, embed::one_hot_labels({0, 1}, 2)),
                  std::invalid_argument);
}

TEST_CASE("two orthogonal class directions are recovered by the 2x2 fit") {
  // Class sums land on (2, 0) and (0, 2): eigenvectors are the coordinate axes.
  MatrixXd Y(2, 4);
  Y << 1, 1, 0, 0,
       0, 0, 1, 1;
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 0, 1, 1}, 2);
  embed::ProjectionModel m = embed::fit_mspca(Y, f, 2);
  REQUIRE(m.mode == embed::ProjectionMode::linear);
  // Columns align with +/- e0, e1; sign convention makes the big entry positive.
  CHECK(std::abs(m.U.col(0).cwiseAbs().maxCoeff() - 1.0) <= 1e-12);
  CHECK(std::abs(m.U(0, 0) * m.U(1, 0)) <= 1e-12);
  CHECK((m.U * m.U.transpose() - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("linear fit satisfies orthonormality, residual, trace optimality") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    int d = 6 + static_cast<int>(rng.below(10));
    int C = 2 + static_cast<int>(rng.below(4));
    int n = 40;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(i % C);
    MatrixXd Y = gaussian_matrix(d, n, rng);
    for (int i = 0; i < n; ++i) Y.col(i)(labels[static_cast<std::size_t>(i)]) += 3.0;
    embed::LabelKernelFactors f = embed::one_hot_labels(labels, C);
    MatrixXd S = embed::scatter_matrix(Y, f);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    double rank_tol = 1e-10 * S.trace();
    int rank = 0;
    for (Eigen::Index i = 0; i < d; ++i) rank += (es.eigenvalues()(i) > rank_tol);
    int p = std::min(rank, C);

    embed::ProjectionModel m = embed::fit_mspca(Y, f, p);
    CHECK((m.U.transpose() * m.U - MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-8);

    // Eigen residuals for retained pairs.
    double snorm = S.norm();
    for (int j = 0; j < p; ++j) {
      VectorXd u = m.U.col(j);
      double lam = u.dot(S * u);
      CHECK((S * u - lam * u).norm() <= 1e-6 * snorm);
    }

    // Trace within 1e-9 of the top-p eigenvalue sum...
    double got = (m.U.transpose() * S * m.U).trace();
    double top = 0.0;
    for (int j = 0; j < p; ++j) top += es.eigenvalues()(d - 1 - j);
    CHECK(std::abs(got - top) <= 1e-9 * std::max(1.0, std::abs(top)));

    // ...and no random semi-orthogonal competitor beats it.
    for (int w = 0; w < 100; ++w) {
      MatrixXd W = random_orthonormal(d, p, rng);
      CHECK((W.transpose() * S * W).trace() <= got + 1e-9 * std::max(1.0, got));
    }
  }
}

TEST_CASE("rank-deficient fit fills trailing columns orthonormally") {
  Rng rng(4);
  int d = 10, C = 2, n = 30;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  embed::LabelKernelFactors f = embed::one_hot_labels(labels, C);
  int p = 7;  // > C = rank bound of the label scatter
  embed::ProjectionModel m = embed::fit_mspca(Y, f, p);
  CHECK((m.U.transpose() * m.U - MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-8);
  // Leading block still spans the label scatter's range.
  MatrixXd S = embed::scatter_matrix(Y, f);
  double got = (m.U.leftCols(C).transpose() * S * m.U.leftCols(C)).trace();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  double top = es.eigenvalues().tail(C).sum();
  CHECK(std::abs(got - top) <= 1e-9 * std::max(1.0, std::abs(top)));
}

TEST_CASE("linear fit rejects p > d") {
  MatrixXd Y = MatrixXd::Random(3, 6);
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 1, 0, 1, 0, 1}, 2);
  CHECK_THROWS_AS(embed::fit_mspca(Y, f, 4), std::invalid_argument);
}

TEST_CASE("kernel fit with the dot-product kernel reproduces the primal fit") {
  Rng rng(5);
  int d = 10, C = 4, n = 20, p = 3;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  for (int i = 0; i < n; ++i) Y.col(i)(labels[static_cast<std::size_t>(i)]) += 4.0;
  embed::LabelKernelFactors f = embed::one_hot_labels(labels, C);

  embed::ProjectionModel prim = embed::fit_mspca(Y, f, p);
  embed::ProjectionModel dual =
      embed::fit_mkspca(Y, f, p, /*bandwidth=*/1.0, /*ridge=*/1e-12,
                        embed::KernelType::linear_dot);

  MatrixXd Zp = embed::transform(prim, Y);
  MatrixXd Zd = embed::transform(dual, Y);
  // Projected Grams depend only on the chosen subspace, not the basis.
  MatrixXd Gp = Zp.transpose() * Zp;
  MatrixXd Gd = Zd.transpose() * Zd;
  CHECK((Gp - Gd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, Gp.cwiseAbs().maxCoeff()));
}

TEST_CASE("kernel fit enforces the Gram-metric normalization") {
  Rng rng(6);
  int d = 5, C = 3, n = 24;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  embed::LabelKernelFactors f = embed::one_hot_labels(labels, C);
  double bw = 3.0;
  int p = 8;  // > d: the regime the kernel path exists for
  embed::ProjectionModel m = embed::fit_mkspca(Y, f, p, bw);
  REQUIRE(m.mode == embed::ProjectionMode::kernel);
  MatrixXd K1 = embed::kernel_gram(Y, Y, embed::KernelType::gaussian, bw);
  MatrixXd VKV = m.V.transpose() * K1 * m.V;
  CHECK((VKV - MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-6);

  // Label-objective values of the chosen columns are non-increasing.
  MatrixXd H = f.one_hot();
  MatrixXd KL = K1 * H.transpose() * H * K1;
  double prev = 1e300;
  for (int j = 0; j < std::min(p, C); ++j) {
    double val = m.V.col(j).dot(KL * m.V.col(j));
    CHECK(val <= prev + 1e-6 * std::max(1.0, prev));
    prev = val;
  }
}

TEST_CASE("kernel fit rejects p > N and degenerate spectra politely") {
  MatrixXd Y = MatrixXd::Random(3, 8);
  embed::LabelKernelFactors f = embed::one_hot_labels({0, 1, 0, 1, 0, 1, 0, 1}, 2);
  CHECK_THROWS_AS(embed::fit_mkspca(Y, f, 9, 1.0), std::invalid_argument);
}

TEST_CASE("gaussian gram matches a direct evaluation") {
  Rng rng(7);
  MatrixXd A = gaussian_matrix(3, 4, rng);
  MatrixXd B = gaussian_matrix(3, 2, rng);
  double bw = 1.7;
  MatrixXd K = embed::kernel_gram(A, B, embed::KernelType::gaussian, bw);
  REQUIRE(K.rows() == 4);
  REQUIRE(K.cols() == 2);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      double r2 = (A.col(i) - B.col(j)).squaredNorm();
      CHECK(K(i, j) == doctest::Approx(std::exp(-r2 / (2.0 * bw * bw))).epsilon(1e-12));
    }
  }
  MatrixXd Kd = embed::kernel_gram(A, B, embed::KernelType::linear_dot, bw);
  CHECK((Kd - A.transpose() * B).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("transform is linear, contracting and shape-checked") {
  Rng rng(8);
  int d = 9, C = 3, n = 30, p = 3;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  embed::ProjectionModel m = embed::fit_mspca(Y, embed::one_hot_labels(labels, C), p);

  CHECK(embed::transform(m, VectorXd::Zero(d)).cwiseAbs().maxCoeff() == 0.0);

  for (int t = 0; t < 20; ++t) {
    VectorXd y1 = gaussian_matrix(d, 1, rng);
    VectorXd y2 = gaussian_matrix(d, 1, rng);
    CHECK(embed::transform(m, y1).norm() <= y1.norm() + 1e-12);
    double a = rng.normal(), b = rng.normal();
    VectorXd lhs = embed::transform(m, (a * y1 + b * y2).eval());
    VectorXd rhs = a * embed::transform(m, y1) + b * embed::transform(m, y2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }

  CHECK_THROWS_AS(embed::transform(m, MatrixXd::Zero(d + 1, 2)), std::invalid_argument);

  // scale_jl divides by sqrt(p), exactly.
  MatrixXd Z = embed::transform(m, Y);
  embed::ProjectionModel scaled = m;
  scaled.scale_jl = true;
  MatrixXd Zs = embed::transform(scaled, Y);
  CHECK((Zs * std::sqrt(static_cast<double>(p)) - Z).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("kernel transform matches a hand kernel evaluation") {
  Rng rng(9);
  int d = 4, C = 2, n = 12;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  double bw = 2.0;
  embed::ProjectionModel m =
      embed::fit_mkspca(Y, embed::one_hot_labels(labels, C), 5, bw);
  MatrixXd Q = gaussian_matrix(d, 3, rng);
  MatrixXd Z = embed::transform(m, Q);
  MatrixXd kappa = embed::kernel_gram(Y, Q, embed::KernelType::gaussian, bw);
  CHECK((Z - m.V.transpose() * kappa).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("distortion of a square orthogonal map is exactly one") {
  Rng rng(10);
  int d = 6, C = 3, n = 40;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  embed::ProjectionModel m =
      embed::fit_mspca(Y, embed::one_hot_labels(labels, C), d, /*epsilon=*/0.3);
  REQUIRE(m.U.cols() == d);  // square orthogonal after fill
  embed::DistortionReport rep = embed::distortion_report(m, Y, 200, 1);
  CHECK(rep.min_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.max_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.fraction_outside == 0.0);
}

TEST_CASE("distortion report fields are ordered and the histogram is complete") {
  Rng rng(11);
  int d = 20, C = 4, n = 60, p = 5;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % C);
  MatrixXd Y = gaussian_matrix(d, n, rng);
  embed::ProjectionModel m =
      embed::fit_mspca(Y, embed::one_hot_labels(labels, C), p, /*epsilon=*/0.3);
  m.scale_jl = true;  // JL-normalized diagnostic map
  embed::DistortionReport rep = embed::distortion_report(m, Y, 150, 3);
  CHECK(rep.min_ratio <= rep.mean_ratio);
  CHECK(rep.mean_ratio <= rep.max_ratio);
  CHECK(rep.n_pairs == 150);
  REQUIRE(rep.bin_counts.size() == 20);
  REQUIRE(rep.bin_edges.size() == 21);
  std::size_t total = std::accumulate(rep.bin_counts.begin(), rep.bin_counts.end(),
                                      static_cast<std::size_t>(0));
  CHECK(total == rep.n_pairs);
  CHECK(rep.fraction_outside >= 0.0);
  CHECK(rep.fraction_outside <= 1.0);

  // Deterministic per seed.
  embed::DistortionReport again = embed::distortion_report(m, Y, 150, 3);
  CHECK(again.mean_ratio == rep.mean_ratio);
  CHECK(again.bin_counts == rep.bin_counts);
}

TEST_CASE("distortion diagnostic tracks a JL-scaled gaussian projection") {
  // The same pair statistic computed for an independent random projection,
  // the construction the dimension bound actually speaks about. The fitted
  // map is compared loosely: both are p-dimensional linear maps of the same
  // data, so their mean ratios should live on the same scale.
  Rng rng(12);
  int d = 40, n = 50, p = 20;
  MatrixXd Y = gaussian_matrix(d, n, rng);

  MatrixXd R = gaussian_matrix(p, d, rng) / std::sqrt(static_cast<double>(p));
  double sum = 0.0;
  int cnt = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n && cnt < 400; ++j, ++cnt) {
      double base = (Y.col(i) - Y.col(j)).squaredNorm();
      double mapped = (R * (Y.col(i) - Y.col(j))).squaredNorm();
      sum += mapped / base;
    }
  }
  double gaussian_mean = sum / cnt;
  CHECK(gaussian_mean == doctest::Approx(1.0).epsilon(0.25));

  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 4);
  embed::ProjectionModel m =
      embed::fit_mspca(Y, embed::one_hot_labels(labels, 4), p, /*epsilon=*/0.3);
  m.scale_jl = true;
  embed::DistortionReport rep = embed::distortion_report(m, Y, 400, 5);
  // Scaled supervised map is a contraction times sqrt(d/p)-ish; same order.
  CHECK(rep.mean_ratio > 0.0);
  CHECK(rep.mean_ratio < 2.0 * gaussian_mean / 0.5);
}

TEST_CASE("distortion rejects degenerate inputs") {
  MatrixXd Y = MatrixXd::Ones(3, 5);  // all columns identical
  embed::ProjectionModel m;
  m.mode = embed::ProjectionMode::linear;
  m.p = 3;
  m.epsilon = 0.3;
  m.U = MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(embed::distortion_report(m, Y, 10, 0), std::invalid_argument);

  // Missing perturbation budget: the (1 +/- eps) band is undefined.
  embed::ProjectionModel no_eps = m;
  no_eps.epsilon = 0.0;
  MatrixXd Y2 = MatrixXd::Random(3, 5);
  CHECK_THROWS_AS(embed::distortion_report(no_eps, Y2, 10, 0), std::invalid_argument);
}
