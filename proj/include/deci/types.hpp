#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deci {

// Error taxonomy. The CLI maps the ValidationError family to exit code 1
// (bad input, bad config, bad shapes) and the runtime family to exit code 2
// (numeric failure, I/O failure mid-run).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class LoadError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RealVector {
  std::vector<double> data;

  RealVector() = default;
  explicit RealVector(std::size_t len, double fill = 0.0) : data(len, fill) {}
  RealVector(std::initializer_list<double> init) : data(init) {}
  explicit RealVector(std::span<const double> values)
      : data(values.begin(), values.end()) {}

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  std::span<const double> span() const { return {data.data(), data.size()}; }
  auto begin() { return data.begin(); }
  auto end() { return data.end(); }
  auto begin() const { return data.begin(); }
  auto end() const { return data.end(); }
};

// Dense row-major matrix.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
};

RealVector column(const RealMatrix& m, std::size_t c);

bool all_finite(std::span<const double> values);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

enum class Mode { train, eval };

}  // namespace deci
