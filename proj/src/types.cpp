#include "deci/types.hpp"

#include <cmath>

namespace deci {

RealVector column(const RealMatrix& m, std::size_t c) {
  if (c >= m.cols) {
    throw DimensionError("column: index " + std::to_string(c) +
                         " out of range for matrix with " +
                         std::to_string(m.cols) + " columns");
  }
  RealVector out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    out[r] = m.at(r, c);
  }
  return out;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("max_abs_diff: spans have lengths " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace deci
