#pragma once

#include <span>
#include <vector>

#include "deci/types.hpp"

namespace deci {

struct FCResult {
  RealMatrix fc;  // n_channels x n_channels, symmetric, unit diagonal
  std::vector<std::size_t> degenerate_cols;
};

// Pearson correlation between every pair of channels (population
// covariance). Zero-variance channels get 0 off-diagonal and 1 on the
// diagonal and are reported as degenerate. Requires at least 3 timepoints.
FCResult pearson_fc(const RealMatrix& x);

// Applies one temporal permutation to every channel of a series, so
// within-series correlations are preserved exactly while temporal order is
// destroyed. perm must be a permutation of [0, rows).
RealMatrix shuffle_bold(const RealMatrix& x, std::span<const std::size_t> perm);

// Strict upper triangle of a square symmetric matrix, row-major:
// (0,1), (0,2), ..., (0,C-1), (1,2), ... -> C*(C-1)/2 features.
RealVector fc_features(const RealMatrix& fc);

// Multinomial logistic regression trained by full-batch gradient descent on
// the softmax cross-entropy plus an L2 penalty on the weights (biases are
// not penalized). Convex, so zero init makes the fit deterministic.
struct LogisticModel {
  RealMatrix w;  // n_features x n_classes
  RealVector b;  // n_classes

  RealVector scores(std::span<const double> features) const;  // softmax probs
};

struct LogisticConfig {
  double l2 = 1e-3;
  double lr = 0.1;
  int epochs = 500;

  void validate() const;
};

LogisticModel logistic_fit(const std::vector<RealVector>& features,
                           const std::vector<int>& labels, int n_classes,
                           const LogisticConfig& cfg);

}  // namespace deci
