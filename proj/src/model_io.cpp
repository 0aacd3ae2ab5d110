#include "jldict/model_io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace jldict::io {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void append_u64le(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_matrix(std::string& buf, const MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::uint64_t bits;
      double v = m(i, j);
      std::memcpy(&bits, &v, 8);
      append_u64le(buf, bits);
    }
  }
}

struct BlockSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

class HeaderParser {
public:
  HeaderParser(const std::string& bytes, std::size_t limit) {
    std::size_t pos = 0;
    bool ended = false;
    while (pos < limit) {
      std::size_t eol = bytes.find('\n', pos);
      if (eol == std::string::npos || eol >= limit) break;
      std::string line = bytes.substr(pos, eol - pos);
      pos = eol + 1;
      if (line == "end") {
        ended = true;
        break;
      }
      lines_.push_back(std::move(line));
    }
    if (!ended) throw CorruptModel("model header has no end marker");
    body_offset_ = pos;

    if (lines_.empty() || lines_[0] != "jldict-model 1") {
      throw CorruptModel("not a jldict model file (bad magic line)");
    }
    for (std::size_t i = 1; i < lines_.size(); ++i) {
      const std::string& line = lines_[i];
      std::size_t colon = line.find(": ");
      if (colon == std::string::npos) throw CorruptModel("malformed header line '" + line + "'");
      std::string key = line.substr(0, colon);
      std::string value = line.substr(colon + 2);
      if (key == "block") {
        std::istringstream iss(value);
        BlockSpec spec;
        if (!(iss >> spec.name >> spec.rows >> spec.cols) || spec.rows < 0 || spec.cols < 0) {
          throw CorruptModel("malformed block declaration '" + line + "'");
        }
        blocks_.push_back(spec);
      } else {
        fields_[key] = value;
      }
    }
  }

  std::string text(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) throw CorruptModel("model header missing field '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const std::string v = text(key);
    try {
      std::size_t used = 0;
      double parsed = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return parsed;
    } catch (const std::exception&) {
      throw CorruptModel("model header field '" + key + "' is not a number: '" + v + "'");
    }
  }

  long long integer(const std::string& key) const {
    double v = number(key);
    long long i = static_cast<long long>(v);
    if (static_cast<double>(i) != v)
      throw CorruptModel("model header field '" + key + "' is not an integer");
    return i;
  }

  const std::vector<BlockSpec>& blocks() const { return blocks_; }
  std::size_t body_offset() const { return body_offset_; }

private:
  std::vector<std::string> lines_;
  std::map<std::string, std::string> fields_;
  std::vector<BlockSpec> blocks_;
  std::size_t body_offset_ = 0;
};

MatrixXd read_matrix(const std::string& bytes, std::size_t& pos, Eigen::Index rows,
                     Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
      }
      pos += 8;
      double v;
      std::memcpy(&v, &bits, 8);
      m(i, j) = v;
    }
  }
  return m;
}

}  // namespace

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
  std::uint64_t h = kFnvOffset;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= kFnvPrime;
  }
  return h;
}

void save_model(const std::string& path, const ModelBundle& bundle) {
  const classify::ClassifierModel& cm = bundle.classifier;
  const embed::ProjectionModel& proj = cm.projection;
  bool kernel = proj.mode == embed::ProjectionMode::kernel;
  MatrixXd medoids = cm.medoids.medoid_matrix();

  std::ostringstream header;
  header << "jldict-model " << kFormatVersion << "\n";
  header << "mode: " << (kernel ? "kernel" : "linear") << "\n";
  header << "d: " << proj.input_dim() << "\n";
  header << "p: " << proj.p << "\n";
  header << "epsilon: " << format_float(proj.epsilon) << "\n";
  header << "scale_jl: " << (proj.scale_jl ? 1 : 0) << "\n";
  if (kernel) {
    header << "kernel: "
           << (proj.kernel == embed::KernelType::gaussian ? "gaussian" : "linear") << "\n";
    header << "bandwidth: " << format_float(proj.bandwidth) << "\n";
    header << "n_train: " << proj.train_features.cols() << "\n";
  }
  header << "n_classes: " << bundle.n_classes << "\n";
  header << "tau: " << format_float(cm.tau) << "\n";
  header << "sigma2: " << format_float(cm.coder.sigma2) << "\n";
  header << "coder_max_iters: " << cm.coder.max_iters << "\n";
  header << "coder_prune_threshold: " << format_float(cm.coder.prune_threshold) << "\n";
  header << "coder_tol: " << format_float(cm.coder.tol) << "\n";
  header << "atoms: " << cm.dictionary.atom_count() << "\n";
  std::vector<long long> label_values = bundle.label_values;
  if (static_cast<int>(label_values.size()) != bundle.n_classes) {
    label_values.resize(static_cast<std::size_t>(bundle.n_classes));
    for (int c = 0; c < bundle.n_classes; ++c) label_values[static_cast<std::size_t>(c)] = c;
  }
  header << "label_values:";
  for (long long v : label_values) header << ' ' << v;
  header << "\n";

  std::vector<std::pair<std::string, const MatrixXd*>> blocks;
  MatrixXd mean = bundle.feature_mean;
  MatrixXd stddev = bundle.feature_std;
  blocks.emplace_back("feature_mean", &mean);
  blocks.emplace_back("feature_std", &stddev);
  if (kernel) {
    blocks.emplace_back("V", &proj.V);
    blocks.emplace_back("train_features", &proj.train_features);
  } else {
    blocks.emplace_back("U", &proj.U);
  }
  blocks.emplace_back("D", &cm.dictionary.D);
  blocks.emplace_back("medoids", &medoids);
  for (const auto& [name, m] : blocks) {
    header << "block: " << name << ' ' << m->rows() << ' ' << m->cols() << "\n";
  }
  header << "end\n";

  std::string buf = header.str();
  for (const auto& [name, m] : blocks) append_matrix(buf, *m);
  append_u64le(buf, fnv1a64(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("failed writing model to '" + path + "'");
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptModel("cannot open model file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw CorruptModel("model file shorter than its checksum");

  std::uint64_t stored = 0;
  for (int b = 0; b < 8; ++b) {
    stored |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(bytes[bytes.size() - 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
  }
  std::uint64_t computed =
      fnv1a64(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size() - 8);
  if (stored != computed) throw CorruptModel("model checksum mismatch");

  HeaderParser header(bytes, bytes.size() - 8);

  ModelBundle bundle;
  classify::ClassifierModel& cm = bundle.classifier;
  embed::ProjectionModel& proj = cm.projection;

  std::string mode = header.text("mode");
  if (mode != "linear" && mode != "kernel") throw CorruptModel("unknown mode '" + mode + "'");
  bool kernel = mode == "kernel";
  proj.mode = kernel ? embed::ProjectionMode::kernel : embed::ProjectionMode::linear;
  long long d = header.integer("d");
  proj.p = static_cast<int>(header.integer("p"));
  proj.epsilon = header.number("epsilon");
  proj.scale_jl = header.integer("scale_jl") != 0;
  long long n_train = 0;
  if (kernel) {
    std::string ktype = header.text("kernel");
    if (ktype == "gaussian") {
      proj.kernel = embed::KernelType::gaussian;
    } else if (ktype == "linear") {
      proj.kernel = embed::KernelType::linear_dot;
    } else {
      throw CorruptModel("unknown kernel '" + ktype + "'");
    }
    proj.bandwidth = header.number("bandwidth");
    n_train = header.integer("n_train");
  }
  bundle.n_classes = static_cast<int>(header.integer("n_classes"));
  cm.tau = header.number("tau");
  cm.coder.sigma2 = header.number("sigma2");
  cm.coder.max_iters = static_cast<int>(header.integer("coder_max_iters"));
  cm.coder.prune_threshold = header.number("coder_prune_threshold");
  cm.coder.tol = header.number("coder_tol");
  long long atoms = header.integer("atoms");

  {
    std::istringstream iss(header.text("label_values"));
    long long v;
    while (iss >> v) bundle.label_values.push_back(v);
  }

  if (d < 1 || proj.p < 1 || bundle.n_classes < 1 || atoms < 1 || !(cm.tau > 0.0) ||
      !(cm.coder.sigma2 > 0.0)) {
    throw CorruptModel("model header fields out of range");
  }
  if (static_cast<int>(bundle.label_values.size()) != bundle.n_classes) {
    throw CorruptModel("label_values count does not match n_classes");
  }

  // Expected block roster, in order.
  std::vector<BlockSpec> expected;
  expected.push_back({"feature_mean", d, 1});
  expected.push_back({"feature_std", d, 1});
  if (kernel) {
    expected.push_back({"V", n_train, proj.p});
    expected.push_back({"train_features", d, n_train});
  } else {
    expected.push_back({"U", d, proj.p});
  }
  expected.push_back({"D", proj.p, atoms});
  expected.push_back({"medoids", atoms, bundle.n_classes});

  const std::vector<BlockSpec>& declared = header.blocks();
  if (declared.size() != expected.size()) throw CorruptModel("unexpected block roster");
  std::size_t total_values = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (declared[i].name != expected[i].name || declared[i].rows != expected[i].rows ||
        declared[i].cols != expected[i].cols) {
      throw CorruptModel("block '" + declared[i].name + "' does not match the declared shapes");
    }
    total_values += static_cast<std::size_t>(declared[i].rows) *
                    static_cast<std::size_t>(declared[i].cols);
  }
  if (header.body_offset() + total_values * 8 + 8 != bytes.size()) {
    throw CorruptModel("model file size does not match the declared blocks");
  }

  std::size_t pos = header.body_offset();
  MatrixXd mean = read_matrix(bytes, pos, d, 1);
  MatrixXd stddev = read_matrix(bytes, pos, d, 1);
  bundle.feature_mean = mean.col(0);
  bundle.feature_std = stddev.col(0);
  if (kernel) {
    proj.V = read_matrix(bytes, pos, n_train, proj.p);
    proj.train_features = read_matrix(bytes, pos, d, n_train);
  } else {
    proj.U = read_matrix(bytes, pos, d, proj.p);
  }
  cm.dictionary.D = read_matrix(bytes, pos, proj.p, atoms);
  MatrixXd medoids = read_matrix(bytes, pos, atoms, bundle.n_classes);
  cm.medoids = classify::ClassMedoids::from_medoid_matrix(medoids);
  return bundle;
}

}  // namespace jldict::io
