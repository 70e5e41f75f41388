#include "deci/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace deci {

namespace {

RealVector softmax_probs(std::span<const double> z) {
  RealVector p(z.size());
  double zmax = z[0];
  for (double v : z) zmax = std::max(zmax, v);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    total += p[i];
  }
  for (std::size_t i = 0; i < z.size(); ++i) p[i] /= total;
  return p;
}

}  // namespace

FCResult pearson_fc(const RealMatrix& x) {
  if (x.rows < 3) {
    throw DimensionError("pearson_fc: need at least 3 timepoints, got " +
                         std::to_string(x.rows));
  }
  if (x.cols < 2) {
    throw DimensionError("pearson_fc: need at least 2 channels, got " +
                         std::to_string(x.cols));
  }
  const std::size_t c_len = x.cols;
  const double n = static_cast<double>(x.rows);
  std::vector<double> mean(c_len, 0.0);
  std::vector<double> sd(c_len, 0.0);
  std::vector<bool> degenerate(c_len, false);
  FCResult out;
  for (std::size_t c = 0; c < c_len; ++c) {
    for (std::size_t r = 0; r < x.rows; ++r) mean[c] += x.at(r, c);
    mean[c] /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double d = x.at(r, c) - mean[c];
      var += d * d;
    }
    sd[c] = std::sqrt(var / n);
    if (sd[c] <= 1e-12 * std::max(1.0, std::fabs(mean[c]))) {
      degenerate[c] = true;
      out.degenerate_cols.push_back(c);
    }
  }
  out.fc = RealMatrix(c_len, c_len);
  for (std::size_t i = 0; i < c_len; ++i) out.fc.at(i, i) = 1.0;
  for (std::size_t i = 0; i < c_len; ++i) {
    for (std::size_t j = i + 1; j < c_len; ++j) {
      double r = 0.0;
      if (!degenerate[i] && !degenerate[j]) {
        double cov = 0.0;
        for (std::size_t t = 0; t < x.rows; ++t) {
          cov += (x.at(t, i) - mean[i]) * (x.at(t, j) - mean[j]);
        }
        cov /= n;
        r = cov / (sd[i] * sd[j]);
        r = std::clamp(r, -1.0, 1.0);
      }
      out.fc.at(i, j) = r;
      out.fc.at(j, i) = r;
    }
  }
  return out;
}

RealMatrix shuffle_bold(const RealMatrix& x,
                        std::span<const std::size_t> perm) {
  if (perm.size() != x.rows) {
    throw DimensionError("shuffle_bold: permutation has " +
                         std::to_string(perm.size()) + " entries but the "
                         "series has " + std::to_string(x.rows) + " rows");
  }
  std::vector<bool> seen(x.rows, false);
  for (std::size_t p : perm) {
    if (p >= x.rows || seen[p]) {
      throw ValidationError(
          "shuffle_bold: perm is not a permutation of [0, rows)");
    }
    seen[p] = true;
  }
  RealMatrix out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      out.at(t, c) = x.at(perm[t], c);
    }
  }
  return out;
}

RealVector fc_features(const RealMatrix& fc) {
  if (fc.rows != fc.cols) {
    throw DimensionError("fc_features: matrix is " + std::to_string(fc.rows) +
                         "x" + std::to_string(fc.cols) + ", expected square");
  }
  if (fc.rows < 2) {
    throw DimensionError("fc_features: need at least a 2x2 matrix");
  }
  const std::size_t c_len = fc.rows;
  RealVector out(c_len * (c_len - 1) / 2);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < c_len; ++i) {
    for (std::size_t j = i + 1; j < c_len; ++j) {
      out[idx++] = fc.at(i, j);
    }
  }
  return out;
}

void LogisticConfig::validate() const {
  if (!(l2 >= 0.0)) throw ConfigError("logistic: l2 must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("logistic: lr must be positive");
  if (epochs < 1) throw ConfigError("logistic: epochs must be at least 1");
}

RealVector LogisticModel::scores(std::span<const double> features) const {
  if (features.size() != w.rows) {
    throw DimensionError("logistic scores: got " +
                         std::to_string(features.size()) +
                         " features, model expects " + std::to_string(w.rows));
  }
  RealVector z(w.cols);
  for (std::size_t v = 0; v < w.cols; ++v) z[v] = b[v];
  for (std::size_t f = 0; f < w.rows; ++f) {
    const double xf = features[f];
    for (std::size_t v = 0; v < w.cols; ++v) z[v] += xf * w.at(f, v);
  }
  return softmax_probs(z.span());
}

LogisticModel logistic_fit(const std::vector<RealVector>& features,
                           const std::vector<int>& labels, int n_classes,
                           const LogisticConfig& cfg) {
  cfg.validate();
  if (n_classes < 2) {
    throw ConfigError("logistic_fit: n_classes must be at least 2");
  }
  if (features.empty() || features.size() != labels.size()) {
    throw DimensionError("logistic_fit: " + std::to_string(features.size()) +
                         " feature rows vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const std::size_t f_len = features.front().size();
  for (std::size_t m = 0; m < features.size(); ++m) {
    if (features[m].size() != f_len) {
      throw DimensionError("logistic_fit: sample " + std::to_string(m) +
                           " has " + std::to_string(features[m].size()) +
                           " features, expected " + std::to_string(f_len));
    }
    if (labels[m] < 0 || labels[m] >= n_classes) {
      throw ValidationError("logistic_fit: label " +
                            std::to_string(labels[m]) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
  }
  const std::size_t v_len = static_cast<std::size_t>(n_classes);
  LogisticModel model;
  model.w = RealMatrix(f_len, v_len);
  model.b = RealVector(v_len);
  const double inv_m = 1.0 / static_cast<double>(features.size());
  RealMatrix gw(f_len, v_len);
  RealVector gb(v_len);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(gw.data.begin(), gw.data.end(), 0.0);
    std::fill(gb.data.begin(), gb.data.end(), 0.0);
    for (std::size_t m = 0; m < features.size(); ++m) {
      const RealVector probs = model.scores(features[m].span());
      for (std::size_t v = 0; v < v_len; ++v) {
        const double delta =
            (probs[v] - (static_cast<int>(v) == labels[m] ? 1.0 : 0.0)) *
            inv_m;
        gb[v] += delta;
        for (std::size_t f = 0; f < f_len; ++f) {
          gw.at(f, v) += features[m][f] * delta;
        }
      }
    }
    for (std::size_t i = 0; i < gw.data.size(); ++i) {
      gw.data[i] += cfg.l2 * model.w.data[i];
      model.w.data[i] -= cfg.lr * gw.data[i];
    }
    for (std::size_t v = 0; v < v_len; ++v) {
      model.b[v] -= cfg.lr * gb[v];
    }
    if (!all_finite(model.w.data) || !all_finite(model.b.data)) {
      throw NumericError("logistic_fit: diverged at epoch " +
                         std::to_string(epoch));
    }
  }
  return model;
}

}  // namespace deci
