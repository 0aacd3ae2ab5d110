#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace jldict {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// --------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto process exit codes; library users
// catch whatever subset they care about.
// --------------------------------------------------------------------------

// Malformed input bytes. `location` is a byte offset for binary formats and a
// 1-based line number for text formats; the message says which.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::uint64_t location)
      : std::runtime_error(what), location_(location) {}
  std::uint64_t location() const { return location_; }

private:
  std::uint64_t location_;
};

// Operands that cannot be combined, e.g. a 784-feature query against a
// 64-feature model.
class DimensionMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine left its domain of validity (factorization breakdown,
// non-finite intermediates, rank shortfall).
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Model container failed validation (bad magic, checksum, truncation).
class CorruptModel : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Deterministic randomness. std::mt19937_64 gives a portable bit stream, but
// the distribution adapters in <random> do not, so uniforms, normals and
// shuffles are derived here by hand. Same seed, same doubles, any platform.
// --------------------------------------------------------------------------
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the paired value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Shift into (0, 1] so the log never sees zero.
    double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

  std::uint64_t raw() { return gen_(); }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fills a matrix with iid standard normals in column-major order.
inline MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

// Deterministic sign convention shared by eigenvector bases and dictionary
// atoms: each column is flipped so its largest-magnitude entry is positive,
// ties to the lowest index. Keeps serialized models reproducible.
inline void orient_columns(MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double a = std::abs(m(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (m(arg, j) < 0.0) m.col(j) = -m.col(j);
  }
}

// --------------------------------------------------------------------------
// Logging. Level comes from the JLDICT_LOG environment variable
// (error | info | debug); unset or unknown means error only.
// --------------------------------------------------------------------------
enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// Shortest fixed convention that round-trips every finite double: 17
// significant decimal digits. Used for all float output (CSV, model header).
std::string format_float(double v);

}  // namespace jldict
