#include "jldict/dimsel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace jldict::dimsel {

namespace {

void check_inputs(std::int64_t n, double eps) {
  if (n < 2) throw std::invalid_argument("dimension bound needs n >= 2 samples");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("perturbation budget must lie strictly inside (0, 1)");
}

}  // namespace

PerturbationBudget::PerturbationBudget(double eps) : eps_(eps) {
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("perturbation budget must lie strictly inside (0, 1)");
}

double jl_dimension_real(std::int64_t n, double eps) {
  check_inputs(n, eps);
  return 12.0 * std::log10(static_cast<double>(n)) / (eps * eps * (1.5 - eps));
}

std::int64_t jl_min_dimension(std::int64_t n, double eps) {
  return std::llround(jl_dimension_real(n, eps));
}

double jl_dimension_derivative(std::int64_t n, double eps) {
  check_inputs(n, eps);
  double denom = eps * eps * eps * (1.5 - eps) * (1.5 - eps);
  return 36.0 * std::log10(static_cast<double>(n)) * (eps - 1.0) / denom;
}

PerturbationBudget select_epsilon(std::int64_t n, double flatness_tol, double step) {
  if (!(flatness_tol > 0.0)) throw std::invalid_argument("flatness tolerance must be positive");
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  double reference = std::abs(jl_dimension_derivative(n, 0.05));
  double chosen = 0.95;  // fall through to the upper clamp if nothing flattens
  for (double eps = 0.05; eps <= 0.95 + 1e-12; eps += step) {
    if (std::abs(jl_dimension_derivative(n, eps)) < flatness_tol * reference) {
      chosen = eps;
      break;
    }
  }
  return PerturbationBudget(std::clamp(chosen, 0.3, 0.4));
}

DimensionSelection select_dimension(std::int64_t n, double eps) {
  DimensionSelection sel;
  sel.n_samples = n;
  sel.epsilon = eps;
  sel.p = jl_min_dimension(n, eps);
  sel.derivative = jl_dimension_derivative(n, eps);
  return sel;
}

std::vector<double> default_epsilon_grid(double step) {
  std::vector<double> grid;
  for (double eps = 0.05; eps <= 0.95 + 1e-12; eps += step) grid.push_back(eps);
  return grid;
}

std::vector<CurveRow> dimension_curve(std::int64_t n, const std::vector<double>& grid) {
  std::vector<CurveRow> rows;
  rows.reserve(grid.size());
  for (double eps : grid) {
    CurveRow row;
    row.epsilon = eps;
    row.p = jl_min_dimension(n, eps);
    row.dp_deps = jl_dimension_derivative(n, eps);
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(),
            [](const CurveRow& a, const CurveRow& b) { return a.epsilon < b.epsilon; });
  return rows;
}

void write_curve_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << "epsilon,p,dp_deps\n";
  for (const CurveRow& row : rows) {
    os << format_float(row.epsilon) << ',' << row.p << ',' << format_float(row.dp_deps)
       << '\n';
  }
}

}  // namespace jldict::dimsel
