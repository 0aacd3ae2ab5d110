#include <doctest.h>

#include "jldict/data.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace jldict;

namespace {

// 4 images of 2x2 pixels plus matching labels, the smallest interesting IDX pair.
void write_idx_fixture(const std::string& images, const std::string& labels) {
  std::vector<unsigned char> img;
  push_be32(img, 0x00000803);
  push_be32(img, 4);  // images
  push_be32(img, 2);  // rows
  push_be32(img, 2);  // cols
  for (int i = 0; i < 16; ++i) img.push_back(static_cast<unsigned char>(i * 16));
  write_bytes(images, img);

  std::vector<unsigned char> lab;
  push_be32(lab, 0x00000801);
  push_be32(lab, 4);
  for (unsigned char l : {0, 1, 1, 0}) lab.push_back(l);
  write_bytes(labels, lab);
}

}  // namespace

TEST_CASE("IDX fixture loads as four pixel columns scaled to [0,1]") {
  TempDir dir;
  write_idx_fixture(dir.file("img.idx"), dir.file("lab.idx"));
  data::LabeledDataset ds = data::load_idx(dir.file("img.idx"), dir.file("lab.idx"));
  CHECK(ds.d() == 4);
  CHECK(ds.n() == 4);
  CHECK(ds.n_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1, 1, 0});
  // First image bytes were 0,16,32,48 -> /255.
  CHECK(ds.Y(0, 0) == doctest::Approx(0.0));
  CHECK(ds.Y(1, 0) == doctest::Approx(16.0 / 255.0));
  CHECK(ds.Y(3, 3) == doctest::Approx(240.0 / 255.0));
  CHECK(ds.Y.minCoeff() >= 0.0);
  CHECK(ds.Y.maxCoeff() <= 1.0);
}

TEST_CASE("IDX loader rejects malformed files with located parse errors") {
  TempDir dir;
  write_idx_fixture(dir.file("img.idx"), dir.file("lab.idx"));

  SUBCASE("bad magic") {
    std::vector<unsigned char> img;
    push_be32(img, 0x00000805);
    push_be32(img, 1);
    push_be32(img, 1);
    push_be32(img, 1);
    img.push_back(0);
    write_bytes(dir.file("bad.idx"), img);
    CHECK_THROWS_AS(data::load_idx(dir.file("bad.idx"), dir.file("lab.idx")), ParseError);
  }
  SUBCASE("image/label count mismatch") {
    std::vector<unsigned char> lab;
    push_be32(lab, 0x00000801);
    push_be32(lab, 3);
    lab.insert(lab.end(), {0, 1, 0});
    write_bytes(dir.file("short.idx"), lab);
    CHECK_THROWS_AS(data::load_idx(dir.file("img.idx"), dir.file("short.idx")), ParseError);
  }
  SUBCASE("truncated pixel payload") {
    std::vector<unsigned char> bytes = read_bytes(dir.file("img.idx"));
    bytes.resize(bytes.size() - 5);
    write_bytes(dir.file("trunc.idx"), bytes);
    try {
      data::load_idx(dir.file("trunc.idx"), dir.file("lab.idx"));
      CHECK(false);
    } catch (const ParseError& e) {
      CHECK(e.location() > 0);  // byte offset reported
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(data::load_idx(dir.file("nope.idx"), dir.file("lab.idx")), ParseError);
  }
}

TEST_CASE("IDX round-trip is bit-identical") {
  TempDir dir;
  Rng rng(7);
  data::LabeledDataset ds;
  ds.Y = MatrixXd(6, 9);
  for (Eigen::Index j = 0; j < 9; ++j)
    for (Eigen::Index i = 0; i < 6; ++i)
      ds.Y(i, j) = static_cast<double>(rng.below(256)) / 255.0;  // on the byte grid
  ds.labels = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  ds.n_classes = 3;
  data::save_idx(ds, dir.file("a_img.idx"), dir.file("a_lab.idx"));
  data::LabeledDataset back = data::load_idx(dir.file("a_img.idx"), dir.file("a_lab.idx"));
  CHECK(back.Y == ds.Y);  // exact: both sides live on the k/255 grid
  CHECK(back.labels == ds.labels);
  data::save_idx(back, dir.file("b_img.idx"), dir.file("b_lab.idx"));
  CHECK(read_bytes(dir.file("a_img.idx")) == read_bytes(dir.file("b_img.idx")));
  CHECK(read_bytes(dir.file("a_lab.idx")) == read_bytes(dir.file("b_lab.idx")));
}

TEST_CASE("CSV loader shapes, label re-indexing and stability") {
  TempDir dir;
  write_text(dir.file("d.csv"),
             "f0,f1,label\n"
             "1.5,2.5,5\n"
             "3.0,4.0,9\n"
             "5.0,6.0,5\n");
  data::LabeledDataset ds = data::load_csv(dir.file("d.csv"), "label");
  CHECK(ds.d() == 2);
  CHECK(ds.n() == 3);
  // First-seen original label gets id 0.
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.label_values == std::vector<long long>{5, 9});
  CHECK(ds.Y(0, 0) == 1.5);
  CHECK(ds.Y(1, 2) == 6.0);

  // Label column position must not matter.
  write_text(dir.file("mid.csv"),
             "f0,label,f1\n"
             "1.5,5,2.5\n"
             "3.0,9,4.0\n");
  data::LabeledDataset mid = data::load_csv(dir.file("mid.csv"), "label");
  CHECK(mid.d() == 2);
  CHECK(mid.Y(1, 0) == 2.5);
  CHECK(mid.label_values == std::vector<long long>{5, 9});
}

TEST_CASE("CSV loader rejects malformed inputs with line numbers") {
  TempDir dir;
  SUBCASE("ragged row") {
    write_text(dir.file("r.csv"), "a,b,label\n1,2,0\n1,2\n");
    try {
      data::load_csv(dir.file("r.csv"), "label");
      CHECK(false);
    } catch (const ParseError& e) {
      CHECK(e.location() == 3);  // 1-based line number
    }
  }
  SUBCASE("non-numeric cell") {
    write_text(dir.file("n.csv"), "a,label\nx,0\n");
    CHECK_THROWS_AS(data::load_csv(dir.file("n.csv"), "label"), ParseError);
  }
  SUBCASE("missing label column") {
    write_text(dir.file("m.csv"), "a,b\n1,2\n");
    CHECK_THROWS_AS(data::load_csv(dir.file("m.csv"), "label"), ParseError);
  }
  SUBCASE("empty file") {
    write_text(dir.file("e.csv"), "");
    CHECK_THROWS_AS(data::load_csv(dir.file("e.csv"), "label"), ParseError);
  }
}

TEST_CASE("feature-only loaders cover prediction inputs") {
  TempDir dir;
  SUBCASE("csv with label column dropped if present") {
    write_text(dir.file("p.csv"), "f0,f1,label\n1,2,0\n3,4,1\n");
    MatrixXd with = data::load_csv_matrix(dir.file("p.csv"), "label");
    CHECK(with.rows() == 2);
    CHECK(with.cols() == 2);
    write_text(dir.file("q.csv"), "f0,f1\n1,2\n3,4\n");
    MatrixXd without = data::load_csv_matrix(dir.file("q.csv"), "label");
    CHECK(without == with);
  }
  SUBCASE("header-only csv gives d x 0, empty file 0 x 0") {
    write_text(dir.file("h.csv"), "f0,f1,f2\n");
    MatrixXd h = data::load_csv_matrix(dir.file("h.csv"), "");
    CHECK(h.rows() == 3);
    CHECK(h.cols() == 0);
    write_text(dir.file("e.csv"), "");
    MatrixXd e = data::load_csv_matrix(dir.file("e.csv"), "");
    CHECK(e.rows() == 0);
    CHECK(e.cols() == 0);
  }
  SUBCASE("idx images without labels") {
    TempDir d2;
    write_idx_fixture(d2.file("img.idx"), d2.file("lab.idx"));
    MatrixXd m = data::load_idx_images(d2.file("img.idx"));
    CHECK(m.rows() == 4);
    CHECK(m.cols() == 4);
  }
}

TEST_CASE("CSV save/load round-trip preserves features and labels") {
  TempDir dir;
  data::LabeledDataset ds;
  ds.Y = MatrixXd(3, 4);
  Rng rng(11);
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) ds.Y(i, j) = rng.normal();
  ds.labels = {1, 0, 1, 0};
  ds.n_classes = 2;
  ds.label_values = {7, 3};
  data::save_csv(ds, dir.file("rt.csv"));
  data::LabeledDataset back = data::load_csv(dir.file("rt.csv"), "label");
  CHECK(back.Y == ds.Y);  // 17 significant digits round-trip doubles exactly
  CHECK(back.n_classes == 2);
  // First row had internal label 1 = original value 3, re-indexed to 0.
  CHECK(back.label_values == std::vector<long long>{3, 7});
  CHECK(back.labels == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("standardization: centering, scaling, constant features, idempotence") {
  data::LabeledDataset ds;
  ds.Y = MatrixXd(3, 4);
  ds.Y << 1, 2, 3, 4,
          5, 5, 5, 5,   // constant feature
          0, 10, 20, 30;
  ds.labels = {0, 0, 1, 1};
  ds.n_classes = 2;

  data::LabeledDataset sd = data::standardize(ds);
  REQUIRE(sd.standardized);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(std::abs(sd.Y.row(i).mean()) <= 1e-8);
  }
  // Population variance convention: divide by N.
  double v0 = sd.Y.row(0).squaredNorm() / 4.0;
  CHECK(v0 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sd.Y.row(1).cwiseAbs().maxCoeff() == 0.0);  // constant -> zero row
  CHECK(sd.feature_std(1) == 1.0);                  // recorded std guards division
  CHECK(sd.feature_mean(0) == doctest::Approx(2.5));
  double expected_std0 = std::sqrt(((1 - 2.5) * (1 - 2.5) + (2 - 2.5) * (2 - 2.5) +
                                    (3 - 2.5) * (3 - 2.5) + (4 - 2.5) * (4 - 2.5)) / 4.0);
  CHECK(sd.feature_std(0) == doctest::Approx(expected_std0).epsilon(1e-12));

  data::LabeledDataset twice = data::standardize(sd);
  CHECK((twice.Y - sd.Y).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("held-out standardization uses the training statistics") {
  Rng rng(3);
  data::LabeledDataset ds;
  ds.Y = gaussian_matrix(5, 40, rng);
  ds.Y.array() *= 3.0;
  ds.Y.array() += 1.0;
  ds.labels.assign(40, 0);
  ds.n_classes = 1;
  data::LabeledDataset sd = data::standardize(ds);

  MatrixXd held = gaussian_matrix(5, 7, rng);
  MatrixXd applied = data::apply_standardization(held, sd.feature_mean, sd.feature_std);
  for (Eigen::Index j = 0; j < held.cols(); ++j) {
    for (Eigen::Index i = 0; i < held.rows(); ++i) {
      double expect = (held(i, j) - sd.feature_mean(i)) / sd.feature_std(i);
      CHECK(applied(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("stratified k-fold partitions with per-class balance") {
  data::LabeledDataset ds;
  ds.Y = MatrixXd::Zero(2, 10);
  ds.labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  ds.n_classes = 2;

  std::vector<data::FoldSplit> folds = data::stratified_kfold(ds, 5, 42);
  REQUIRE(folds.size() == 5);
  std::set<int> seen;
  for (const auto& f : folds) {
    REQUIRE(f.test.size() == 2);
    int c0 = 0, c1 = 0;
    for (int idx : f.test) {
      CHECK(seen.insert(idx).second);  // pairwise disjoint
      (ds.labels[static_cast<std::size_t>(idx)] == 0 ? c0 : c1)++;
    }
    CHECK(c0 == 1);  // exactly one per class per fold
    CHECK(c1 == 1);
    CHECK(f.train.size() == 8);
    // train/test partition the index set
    std::set<int> all(f.train.begin(), f.train.end());
    for (int idx : f.test) CHECK(all.insert(idx).second);
    CHECK(all.size() == 10);
  }
  CHECK(seen.size() == 10);  // union of test folds covers everything

  // Determinism.
  std::vector<data::FoldSplit> again = data::stratified_kfold(ds, 5, 42);
  for (std::size_t i = 0; i < folds.size(); ++i) {
    CHECK(folds[i].train == again[i].train);
    CHECK(folds[i].test == again[i].test);
  }

  // Class smaller than k names the class.
  data::LabeledDataset tiny = ds;
  tiny.labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  try {
    data::stratified_kfold(tiny, 5, 1);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("fold class proportions stay within one sample of global") {
  Rng rng(9);
  data::LabeledDataset ds;
  int n = 90;
  ds.Y = MatrixXd::Zero(3, n);
  ds.n_classes = 3;
  for (int i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(rng.below(3)));
  for (auto c : {0, 1, 2})
    if (std::count(ds.labels.begin(), ds.labels.end(), c) < 3) ds.labels[0] = c;

  std::vector<data::FoldSplit> folds = data::stratified_kfold(ds, 3, 17);
  std::vector<int> global(3, 0);
  for (int l : ds.labels) global[static_cast<std::size_t>(l)]++;
  for (const auto& f : folds) {
    std::vector<int> cnt(3, 0);
    for (int idx : f.test) cnt[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(idx)])]++;
    for (int c = 0; c < 3; ++c) {
      double expect = static_cast<double>(global[static_cast<std::size_t>(c)]) / 3.0;
      CHECK(std::abs(cnt[static_cast<std::size_t>(c)] - expect) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("synthetic clusters respect geometry and counts") {
  data::LabeledDataset ds = data::synth_clusters(16, 4, 25, 12.0, 5);
  CHECK(ds.d() == 16);
  CHECK(ds.n() == 100);
  CHECK(ds.n_classes == 4);
  std::vector<int> counts = data::class_counts(ds);
  for (int c : counts) CHECK(c == 25);

  // Class means pairwise `separation` apart (empirical means are noisy; check
  // the exact construction via very low-noise means of many samples instead).
  MatrixXd mean = MatrixXd::Zero(16, 4);
  for (Eigen::Index j = 0; j < ds.n(); ++j)
    mean.col(ds.labels[static_cast<std::size_t>(j)]) += ds.Y.col(j) / 25.0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      CHECK((mean.col(a) - mean.col(b)).norm() == doctest::Approx(12.0).epsilon(0.15));

  // Determinism and the n_classes <= d guard.
  data::LabeledDataset again = data::synth_clusters(16, 4, 25, 12.0, 5);
  CHECK(again.Y == ds.Y);
  CHECK_THROWS_AS(data::synth_clusters(3, 4, 5, 1.0, 0), std::invalid_argument);
}

TEST_CASE("synthetic clusters at separation zero collapse to one blob") {
  data::LabeledDataset ds = data::synth_clusters(8, 3, 50, 0.0, 2);
  MatrixXd mean = MatrixXd::Zero(8, 3);
  for (Eigen::Index j = 0; j < ds.n(); ++j)
    mean.col(ds.labels[static_cast<std::size_t>(j)]) += ds.Y.col(j) / 50.0;
  // All class means near the origin (pure standard normal noise).
  for (int c = 0; c < 3; ++c) CHECK(mean.col(c).norm() <= 1.0);
}

TEST_CASE("separable synthetic data admits a near-perfect nearest-mean oracle") {
  data::LabeledDataset ds = data::synth_clusters(64, 10, 100, 20.0, 42);
  MatrixXd mean = MatrixXd::Zero(64, 10);
  std::vector<int> counts = data::class_counts(ds);
  for (Eigen::Index j = 0; j < ds.n(); ++j) {
    int c = ds.labels[static_cast<std::size_t>(j)];
    mean.col(c) += ds.Y.col(j) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  int hits = 0;
  for (Eigen::Index j = 0; j < ds.n(); ++j) {
    Eigen::Index best;
    (mean.colwise() - ds.Y.col(j)).colwise().squaredNorm().minCoeff(&best);
    hits += (static_cast<int>(best) == ds.labels[static_cast<std::size_t>(j)]);
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(ds.n()) >= 0.999);
}

TEST_CASE("minority augmentation tops classes up to the target") {
  data::LabeledDataset ds = data::synth_clusters(6, 2, 20, 5.0, 3);
  SUBCASE("already at target leaves the dataset unchanged") {
    data::LabeledDataset same = data::augment_minority(ds, 20, 0.05, 1);
    CHECK(same.Y == ds.Y);
    CHECK(same.labels == ds.labels);
  }
  SUBCASE("class of 20 raised to 100 appends exactly 80 labeled samples") {
    data::LabeledDataset up = data::augment_minority(ds, 100, 0.05, 1);
    CHECK(up.n() == 200);
    std::vector<int> counts = data::class_counts(up);
    CHECK(counts[0] == 100);
    CHECK(counts[1] == 100);
    // Original columns keep their positions: prefix matches.
    CHECK(up.Y.leftCols(ds.n()) == ds.Y);
  }
  SUBCASE("appended samples hug their source class") {
    double noise = 0.05;
    data::LabeledDataset up = data::augment_minority(ds, 60, noise, 9);
    int ok = 0, total = 0;
    double bound = 6.0 * noise * std::sqrt(6.0);
    for (Eigen::Index j = ds.n(); j < up.n(); ++j) {
      int c = up.labels[static_cast<std::size_t>(j)];
      double best = 1e300;
      for (Eigen::Index i = 0; i < ds.n(); ++i) {
        if (ds.labels[static_cast<std::size_t>(i)] != c) continue;
        best = std::min(best, (up.Y.col(j) - ds.Y.col(i)).norm());
      }
      total++;
      ok += (best <= bound);
    }
    CHECK(total == 80);
    CHECK(static_cast<double>(ok) / total >= 0.99);
  }
  SUBCASE("empty class is rejected") {
    data::LabeledDataset holey = ds;
    holey.n_classes = 3;  // class 2 exists but has no members
    CHECK_THROWS_AS(data::augment_minority(holey, 30, 0.05, 1), std::invalid_argument);
  }
}
