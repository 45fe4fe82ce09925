#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cwqed/core.hpp"

namespace cwqed {

// Real observable sampled on a product grid, row-major [i][j] over (x1[i], x2[j]).
struct CorrelationGrid {
  std::vector<double> x1, x2;
  std::vector<double> values;
  std::string observable;

  CorrelationGrid() = default;
  CorrelationGrid(std::vector<double> a, std::vector<double> b, std::string name = {})
      : x1(std::move(a)), x2(std::move(b)), values(x1.size() * x2.size(), 0.0), observable(std::move(name)) {}

  double& at(std::size_t i, std::size_t j) { return values[i * x2.size() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * x2.size() + j]; }
};

// ||A - B||_F / ||A||_F
inline double frobenius_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw precondition_violation("grid shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  if (den == 0.0) throw degenerate_normalization("reference grid is identically zero");
  return std::sqrt(num / den);
}

inline double frobenius_relative_error(const CorrelationGrid& a, const CorrelationGrid& b) {
  if (a.x1.size() != b.x1.size() || a.x2.size() != b.x2.size()) throw precondition_violation("grid shape mismatch");
  return frobenius_relative_error(a.values, b.values);
}

}  // namespace cwqed
