#pragma once

#include "jldict/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace jldict::dimsel {

// Pair-distance distortion budget of the random-projection bound. Valid
// budgets live strictly inside (0, 1).
class PerturbationBudget {
public:
  explicit PerturbationBudget(double eps);
  double value() const { return eps_; }

private:
  double eps_;
};

struct DimensionSelection {
  std::int64_t n_samples = 0;
  double epsilon = 0.0;
  std::int64_t p = 0;        // rounded minimal dimension
  double derivative = 0.0;   // dp/deps at epsilon, always negative on (0, 1)
};

// Logarithm base of the dimension bound. Base 10 is the library convention;
// with natural logs the same formula would prescribe ~2.3x larger dimensions.
inline constexpr double kLogBase = 10.0;

// Un-rounded lower bound 12*log10(n) / (eps^2 * (1.5 - eps)). Algebraically
// the same as the familiar 24*log(n) / (3*eps^2 - 2*eps^3) form of the
// Johnson-Lindenstrauss dimension.
double jl_dimension_real(std::int64_t n, double eps);

// The bound rounded to the nearest integer. Throws std::invalid_argument for
// n < 2 or eps outside (0, 1).
std::int64_t jl_min_dimension(std::int64_t n, double eps);

// Closed-form d/deps of jl_dimension_real:
//   36*log10(n) * (eps - 1) / (eps^3 * (1.5 - eps)^2)
double jl_dimension_derivative(std::int64_t n, double eps);

// Scans eps over [0.05, 0.95] in steps of `step` and picks the smallest grid
// value where |dp/deps| has flattened to below flatness_tol times its value
// at eps = 0.05, then clamps into [0.3, 0.4]. The ratio does not depend on n
// (the log factor cancels), so the selection is driven purely by curve shape.
PerturbationBudget select_epsilon(std::int64_t n, double flatness_tol = 0.01,
                                  double step = 0.005);

DimensionSelection select_dimension(std::int64_t n, double eps);

struct CurveRow {
  double epsilon = 0.0;
  std::int64_t p = 0;
  double dp_deps = 0.0;
};

// One row per grid point, ascending in epsilon.
std::vector<CurveRow> dimension_curve(std::int64_t n, const std::vector<double>& grid);

// Default scan grid 0.05, 0.055, ..., 0.95.
std::vector<double> default_epsilon_grid(double step = 0.005);

// CSV with header "epsilon,p,dp_deps"; floats carry 17 significant digits,
// rows end with plain LF.
void write_curve_csv(std::ostream& os, const std::vector<CurveRow>& rows);

}  // namespace jldict::dimsel
