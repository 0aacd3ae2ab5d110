#include "jldict/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace jldict::data {

namespace {

std::vector<unsigned char> read_all_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

// Big-endian reader that reports the byte offset of the first missing or
// offending byte.
class ByteReader {
public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::uint32_t read_u32be(const char* what) {
    require(4, what);
    std::uint32_t v = (std::uint32_t(bytes_[pos_]) << 24) | (std::uint32_t(bytes_[pos_ + 1]) << 16) |
                      (std::uint32_t(bytes_[pos_ + 2]) << 8) | std::uint32_t(bytes_[pos_ + 3]);
    pos_ += 4;
    return v;
  }

  const unsigned char* span(std::size_t n, const char* what) {
    require(n, what);
    const unsigned char* ptr = bytes_.data() + pos_;
    pos_ += n;
    return ptr;
  }

  std::size_t pos() const { return pos_; }

  void require(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(name_ + ": truncated while reading " + what + " at byte offset " +
                           std::to_string(pos_),
                       pos_);
    }
  }

private:
  const std::vector<unsigned char>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

void write_u32be(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

double parse_number(const std::string& field, std::size_t line_no, const std::string& path) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  // Tolerate surrounding blanks; the numeric text itself must consume fully.
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw ParseError(path + ": non-numeric cell '" + field + "' on line " + std::to_string(line_no),
                     line_no);
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<unsigned char> image_bytes = read_all_bytes(images_path);
  std::vector<unsigned char> label_bytes = read_all_bytes(labels_path);
  ByteReader images(image_bytes, images_path);
  ByteReader labels(label_bytes, labels_path);

  std::uint32_t magic = images.read_u32be("image magic");
  if (magic != kIdxImagesMagic) {
    throw ParseError(images_path + ": bad image magic " + std::to_string(magic) +
                         " (want 2051) at byte offset 0",
                     0);
  }
  std::uint32_t n_images = images.read_u32be("image count");
  std::uint32_t rows = images.read_u32be("row count");
  std::uint32_t cols = images.read_u32be("column count");

  std::uint32_t label_magic = labels.read_u32be("label magic");
  if (label_magic != kIdxLabelsMagic) {
    throw ParseError(labels_path + ": bad label magic " + std::to_string(label_magic) +
                         " (want 2049) at byte offset 0",
                     0);
  }
  std::uint32_t n_labels = labels.read_u32be("label count");
  if (n_labels != n_images) {
    throw ParseError(labels_path + ": label count " + std::to_string(n_labels) +
                         " does not match image count " + std::to_string(n_images) +
                         " at byte offset 4",
                     4);
  }

  std::size_t d = std::size_t(rows) * cols;
  if (d == 0) throw ParseError(images_path + ": zero-sized images at byte offset 8", 8);

  const unsigned char* pixels = images.span(d * n_images, "pixel data");
  const unsigned char* label_data = labels.span(n_labels, "label data");

  LabeledDataset ds;
  ds.Y.resize(static_cast<Eigen::Index>(d), n_images);
  ds.labels.resize(n_images);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_images; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.Y(static_cast<Eigen::Index>(j), i) = pixels[std::size_t(i) * d + j] / 255.0;
    }
    ds.labels[i] = label_data[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = max_label + 1;
  ds.label_values.resize(ds.n_classes);
  std::iota(ds.label_values.begin(), ds.label_values.end(), 0LL);
  return ds;
}

MatrixXd load_idx_images(const std::string& images_path) {
  std::vector<unsigned char> image_bytes = read_all_bytes(images_path);
  ByteReader images(image_bytes, images_path);

  std::uint32_t magic = images.read_u32be("image magic");
  if (magic != kIdxImagesMagic) {
    throw ParseError(images_path + ": bad image magic " + std::to_string(magic) +
                         " (want 2051) at byte offset 0",
                     0);
  }
  std::uint32_t n_images = images.read_u32be("image count");
  std::uint32_t rows = images.read_u32be("row count");
  std::uint32_t cols = images.read_u32be("column count");
  std::size_t d = std::size_t(rows) * cols;
  if (d == 0) throw ParseError(images_path + ": zero-sized images at byte offset 8", 8);

  const unsigned char* pixels = images.span(d * n_images, "pixel data");
  MatrixXd Y(static_cast<Eigen::Index>(d), n_images);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      Y(static_cast<Eigen::Index>(j), i) = pixels[std::size_t(i) * d + j] / 255.0;
    }
  }
  return Y;
}

MatrixXd load_csv_matrix(const std::string& path, const std::string& drop_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) return MatrixXd(0, 0);

  std::vector<std::string> header = split_csv_line(lines[0]);
  std::size_t n_fields = header.size();
  std::size_t drop_idx = n_fields;
  if (!drop_column.empty()) {
    for (std::size_t i = 0; i < n_fields; ++i) {
      if (header[i] == drop_column) {
        drop_idx = i;
        break;
      }
    }
  }
  std::size_t d = n_fields - (drop_idx < n_fields ? 1 : 0);
  if (d == 0) throw ParseError(path + ": no feature columns on line 1", 1);
  std::size_t n = lines.size() - 1;

  MatrixXd Y(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t line_no = r + 2;
    std::vector<std::string> fields = split_csv_line(lines[r + 1]);
    if (fields.size() != n_fields) {
      throw ParseError(path + ": ragged row (" + std::to_string(fields.size()) + " cells, want " +
                           std::to_string(n_fields) + ") on line " + std::to_string(line_no),
                       line_no);
    }
    std::size_t feature = 0;
    for (std::size_t c = 0; c < n_fields; ++c) {
      double value = parse_number(fields[c], line_no, path);
      if (c == drop_idx) continue;
      Y(static_cast<Eigen::Index>(feature++), static_cast<Eigen::Index>(r)) = value;
    }
  }
  return Y;
}

void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  std::ofstream images(images_path, std::ios::binary);
  if (!images) throw ParseError("cannot open '" + images_path + "' for writing", 0);
  write_u32be(images, kIdxImagesMagic);
  write_u32be(images, static_cast<std::uint32_t>(ds.n()));
  write_u32be(images, static_cast<std::uint32_t>(ds.d()));
  write_u32be(images, 1);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      double v = std::clamp(ds.Y(j, i), 0.0, 1.0);
      unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      images.write(reinterpret_cast<const char*>(&b), 1);
    }
  }

  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw ParseError("cannot open '" + labels_path + "' for writing", 0);
  write_u32be(labels, kIdxLabelsMagic);
  write_u32be(labels, static_cast<std::uint32_t>(ds.n()));
  for (int label : ds.labels) {
    unsigned char b = static_cast<unsigned char>(label);
    labels.write(reinterpret_cast<const char*>(&b), 1);
  }
}

LabeledDataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(path + ": empty file", 1);

  std::vector<std::string> header = split_csv_line(lines[0]);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_idx = i;
      break;
    }
  }
  if (label_idx == header.size()) {
    throw ParseError(path + ": header has no column named '" + label_column + "' on line 1", 1);
  }

  std::size_t n_fields = header.size();
  std::size_t d = n_fields - 1;
  std::size_t n = lines.size() - 1;
  if (d == 0) throw ParseError(path + ": no feature columns besides the label on line 1", 1);
  if (n == 0) throw ParseError(path + ": no data rows", 1);

  LabeledDataset ds;
  ds.Y.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  ds.labels.resize(n);

  std::vector<long long> seen_values;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t line_no = r + 2;
    std::vector<std::string> fields = split_csv_line(lines[r + 1]);
    if (fields.size() != n_fields) {
      throw ParseError(path + ": ragged row (" + std::to_string(fields.size()) + " cells, want " +
                           std::to_string(n_fields) + ") on line " + std::to_string(line_no),
                       line_no);
    }
    std::size_t feature = 0;
    for (std::size_t c = 0; c < n_fields; ++c) {
      double value = parse_number(fields[c], line_no, path);
      if (c == label_idx) {
        double rounded = std::nearbyint(value);
        if (rounded != value) {
          throw ParseError(path + ": label '" + fields[c] + "' is not an integer on line " +
                               std::to_string(line_no),
                           line_no);
        }
        long long raw = static_cast<long long>(rounded);
        auto it = std::find(seen_values.begin(), seen_values.end(), raw);
        if (it == seen_values.end()) {
          seen_values.push_back(raw);
          ds.labels[r] = static_cast<int>(seen_values.size()) - 1;
        } else {
          ds.labels[r] = static_cast<int>(it - seen_values.begin());
        }
      } else {
        ds.Y(static_cast<Eigen::Index>(feature++), static_cast<Eigen::Index>(r)) = value;
      }
    }
  }
  ds.n_classes = static_cast<int>(seen_values.size());
  ds.label_values = seen_values;
  {
    std::ostringstream msg;
    msg << "csv label mapping:";
    for (std::size_t c = 0; c < seen_values.size(); ++c) msg << ' ' << seen_values[c] << "->" << c;
    log_info(msg.str());
  }
  return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing", 0);
  for (Eigen::Index j = 0; j < ds.d(); ++j) out << 'f' << j << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) out << format_float(ds.Y(j, i)) << ',';
    long long value = ds.labels[i] < static_cast<int>(ds.label_values.size())
                          ? ds.label_values[ds.labels[i]]
                          : ds.labels[i];
    out << value << '\n';
  }
}

LabeledDataset standardize(const LabeledDataset& ds) {
  if (ds.n() < 2) throw std::invalid_argument("standardize needs at least 2 samples");
  LabeledDataset out = ds;
  Eigen::Index d = ds.d();
  double n = static_cast<double>(ds.n());
  out.feature_mean.resize(d);
  out.feature_std.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double mean = ds.Y.row(j).mean();
    double var = (ds.Y.row(j).array() - mean).square().sum() / n;  // population variance
    double sd = std::sqrt(var);
    out.feature_mean(j) = mean;
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      // Constant feature: zero row, unit std so later transforms stay finite.
      out.feature_std(j) = 1.0;
      out.Y.row(j).setZero();
    } else {
      out.feature_std(j) = sd;
      out.Y.row(j) = (ds.Y.row(j).array() - mean) / sd;
    }
  }
  out.standardized = true;
  return out;
}

MatrixXd apply_standardization(const MatrixXd& Y, const VectorXd& mean, const VectorXd& std) {
  if (Y.rows() != mean.size() || Y.rows() != std.size()) {
    throw DimensionMismatch("standardization statistics cover " + std::to_string(mean.size()) +
                            " features but data has " + std::to_string(Y.rows()));
  }
  return (Y.colwise() - mean).array().colwise() / std.array();
}

std::vector<int> class_counts(const LabeledDataset& ds) {
  std::vector<int> counts(std::max(ds.n_classes, 0), 0);
  for (int label : ds.labels) {
    if (label < 0 || label >= ds.n_classes)
      throw std::invalid_argument("label " + std::to_string(label) + " outside [0, n_classes)");
    ++counts[label];
  }
  return counts;
}

std::vector<FoldSplit> stratified_kfold(const LabeledDataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold split needs k >= 2");
  std::vector<int> counts = class_counts(ds);
  for (int c = 0; c < ds.n_classes; ++c) {
    if (counts[c] < k) {
      throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                  std::to_string(counts[c]) + " members, fewer than k=" +
                                  std::to_string(k));
    }
  }

  Rng rng(seed);
  std::vector<std::vector<int>> fold_members(k);
  for (int c = 0; c < ds.n_classes; ++c) {
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(ds.labels.size()); ++i) {
      if (ds.labels[i] == c) members.push_back(i);
    }
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold_members[i % k].push_back(members[i]);
    }
  }

  std::vector<FoldSplit> splits(k);
  for (int f = 0; f < k; ++f) {
    std::sort(fold_members[f].begin(), fold_members[f].end());
    splits[f].test = fold_members[f];
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      splits[f].train.insert(splits[f].train.end(), fold_members[g].begin(), fold_members[g].end());
    }
    std::sort(splits[f].train.begin(), splits[f].train.end());
  }
  return splits;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<int>& indices) {
  LabeledDataset out;
  out.Y.resize(ds.d(), static_cast<Eigen::Index>(indices.size()));
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int idx = indices[i];
    if (idx < 0 || idx >= ds.n()) throw std::invalid_argument("subset index out of range");
    out.Y.col(static_cast<Eigen::Index>(i)) = ds.Y.col(idx);
    out.labels[i] = ds.labels[idx];
  }
  out.n_classes = ds.n_classes;
  out.standardized = ds.standardized;
  out.feature_mean = ds.feature_mean;
  out.feature_std = ds.feature_std;
  out.label_values = ds.label_values;
  return out;
}

LabeledDataset synth_clusters(int d, int n_classes, int per_class, double separation,
                              std::uint64_t seed) {
  if (d < 1 || n_classes < 1 || per_class < 1)
    throw std::invalid_argument("synth_clusters needs positive d, n_classes, per_class");
  if (!(separation >= 0.0)) throw std::invalid_argument("separation must be non-negative");
  if (n_classes > d) {
    throw std::invalid_argument(
        "synth_clusters places class means on distinct axes and needs n_classes <= d");
  }

  double scale = separation / std::sqrt(2.0);
  Rng rng(seed);
  LabeledDataset ds;
  ds.n_classes = n_classes;
  ds.Y.resize(d, static_cast<Eigen::Index>(n_classes) * per_class);
  ds.labels.resize(static_cast<std::size_t>(n_classes) * per_class);
  Eigen::Index col = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i, ++col) {
      for (int j = 0; j < d; ++j) ds.Y(j, col) = rng.normal();
      ds.Y(c, col) += scale;
      ds.labels[static_cast<std::size_t>(col)] = c;
    }
  }
  ds.label_values.resize(n_classes);
  std::iota(ds.label_values.begin(), ds.label_values.end(), 0LL);
  return ds;
}

LabeledDataset augment_minority(const LabeledDataset& ds, int target_count, double noise_std,
                                std::uint64_t seed) {
  if (!(noise_std > 0.0)) throw std::invalid_argument("noise_std must be positive");
  std::vector<int> counts = class_counts(ds);
  if (target_count <= 0) return ds;

  Rng rng(seed);
  std::vector<VectorXd> appended;
  std::vector<int> appended_labels;
  for (int c = 0; c < ds.n_classes; ++c) {
    if (counts[c] >= target_count) continue;
    if (counts[c] == 0) {
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " is empty; nothing to augment from");
    }
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(ds.labels.size()); ++i) {
      if (ds.labels[i] == c) members.push_back(i);
    }
    for (int need = target_count - counts[c]; need > 0; --need) {
      int src = members[static_cast<std::size_t>(rng.below(members.size()))];
      VectorXd sample = ds.Y.col(src);
      for (Eigen::Index j = 0; j < sample.size(); ++j) sample(j) += noise_std * rng.normal();
      appended.push_back(std::move(sample));
      appended_labels.push_back(c);
    }
  }

  if (appended.empty()) return ds;
  LabeledDataset out = ds;
  out.Y.conservativeResize(Eigen::NoChange, ds.n() + static_cast<Eigen::Index>(appended.size()));
  for (std::size_t i = 0; i < appended.size(); ++i) {
    out.Y.col(ds.n() + static_cast<Eigen::Index>(i)) = appended[i];
    out.labels.push_back(appended_labels[i]);
  }
  return out;
}

}  // namespace jldict::data
