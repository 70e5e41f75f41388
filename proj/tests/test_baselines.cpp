#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deci/baselines.hpp"
#include "deci/rng.hpp"
#include "deci/types.hpp"

using namespace deci;

namespace {

RealMatrix random_series(std::size_t rows, std::size_t cols,
                         std::uint64_t seed) {
  Rng rng(seed);
  RealMatrix x(rows, cols);
  for (double& v : x.data) v = rng.normal();
  return x;
}

// Independent correlation oracle: z-score both columns, then average the
// products. Same quantity as pearson_fc via a different arithmetic path.
double corr_oracle(const RealMatrix& x, std::size_t a, std::size_t b) {
  const std::size_t n = x.rows;
  auto zcol = [&](std::size_t c) {
    std::vector<double> z(n);
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += x.at(t, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      var += (x.at(t, c) - mean) * (x.at(t, c) - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t t = 0; t < n; ++t) z[t] = (x.at(t, c) - mean) / sd;
    return z;
  };
  const auto za = zcol(a);
  const auto zb = zcol(b);
  double r = 0.0;
  for (std::size_t t = 0; t < n; ++t) r += za[t] * zb[t];
  return r / static_cast<double>(n);
}

}  // namespace

TEST_CASE("pearson_fc: hand cases hit +1 / -1 and a clean diagonal") {
  RealMatrix x(3, 2);
  x.at(0, 0) = 1.0;
  x.at(1, 0) = 2.0;
  x.at(2, 0) = 3.0;
  x.at(0, 1) = 2.0;
  x.at(1, 1) = 4.0;
  x.at(2, 1) = 6.0;
  const FCResult r = pearson_fc(x);
  CHECK(r.fc.at(0, 0) == 1.0);
  CHECK(r.fc.at(1, 1) == 1.0);
  CHECK(r.fc.at(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.degenerate_cols.empty());

  x.at(0, 1) = -1.0;
  x.at(1, 1) = -2.0;
  x.at(2, 1) = -3.0;
  const FCResult neg = pearson_fc(x);
  CHECK(neg.fc.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("pearson_fc: agrees with the z-score oracle on random data") {
  const RealMatrix x = random_series(50, 4, 7);
  const FCResult r = pearson_fc(x);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      CHECK(std::fabs(r.fc.at(a, b) - corr_oracle(x, a, b)) < 1e-12);
      CHECK(r.fc.at(a, b) == r.fc.at(b, a));  // exactly symmetric
    }
  }
}

TEST_CASE("pearson_fc: zero-variance channels are flagged and neutral") {
  RealMatrix x = random_series(20, 3, 9);
  for (std::size_t t = 0; t < x.rows; ++t) x.at(t, 1) = 4.2;
  const FCResult r = pearson_fc(x);
  REQUIRE(r.degenerate_cols.size() == 1);
  CHECK(r.degenerate_cols[0] == 1);
  CHECK(r.fc.at(1, 1) == 1.0);
  CHECK(r.fc.at(0, 1) == 0.0);
  CHECK(r.fc.at(1, 2) == 0.0);
}

TEST_CASE("pearson_fc: needs at least three timepoints") {
  const RealMatrix x = random_series(2, 3, 5);
  CHECK_THROWS_AS(pearson_fc(x), DimensionError);
}

TEST_CASE("shuffle_bold: one permutation moves every channel together") {
  RealMatrix x(4, 3);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      x.at(t, c) = static_cast<double>(100 * c + t);
    }
  }
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const RealMatrix y = shuffle_bold(x, perm);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(y.at(t, c) == static_cast<double>(100 * c + perm[t]));
    }
  }
}

TEST_CASE("shuffle_bold: preserves functional connectivity to 1e-12") {
  const RealMatrix x = random_series(64, 5, 11);
  Rng rng(13);
  const auto perm = rng.permutation(64);
  const RealMatrix y = shuffle_bold(x, perm);
  const FCResult a = pearson_fc(x);
  const FCResult b = pearson_fc(y);
  CHECK(max_abs_diff({a.fc.data.data(), a.fc.data.size()},
                     {b.fc.data.data(), b.fc.data.size()}) < 1e-12);
}

TEST_CASE("shuffle_bold: rejects non-permutations") {
  const RealMatrix x = random_series(4, 2, 3);
  const std::vector<std::size_t> dup{0, 0, 1, 2};
  CHECK_THROWS_AS(shuffle_bold(x, dup), ValidationError);
  const std::vector<std::size_t> short_perm{0, 1};
  CHECK_THROWS_AS(shuffle_bold(x, short_perm), DimensionError);
  const std::vector<std::size_t> oob{0, 1, 2, 9};
  CHECK_THROWS_AS(shuffle_bold(x, oob), ValidationError);
}

TEST_CASE("fc_features: strict upper triangle in row-major order") {
  RealMatrix fc(3, 3);
  fc.at(0, 1) = 0.1;
  fc.at(0, 2) = 0.2;
  fc.at(1, 2) = 0.3;
  const RealVector f = fc_features(fc);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == 0.1);
  CHECK(f[1] == 0.2);
  CHECK(f[2] == 0.3);
  RealMatrix bad(2, 3);
  CHECK_THROWS_AS(fc_features(bad), DimensionError);
}

TEST_CASE("logistic_fit: separates clean blobs perfectly") {
  Rng rng(17);
  std::vector<RealVector> feats;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    RealVector f(3);
    const int label = i % 2;
    const double center = label == 0 ? 2.0 : -2.0;
    for (std::size_t j = 0; j < 3; ++j) f[j] = center + rng.normal(0.0, 0.1);
    feats.push_back(f);
    labels.push_back(label);
  }
  LogisticConfig cfg;
  cfg.l2 = 1e-4;
  cfg.lr = 0.5;
  cfg.epochs = 300;
  const LogisticModel model = logistic_fit(feats, labels, 2, cfg);
  int correct = 0;
  for (std::size_t m = 0; m < feats.size(); ++m) {
    const RealVector p = model.scores(feats[m].span());
    const int pred = p[0] >= p[1] ? 0 : 1;
    correct += (pred == labels[m]);
  }
  CHECK(correct == 30);
}

TEST_CASE("logistic_fit: strong L2 pushes predictions to class priors") {
  Rng rng(19);
  std::vector<RealVector> feats;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    RealVector f(4);
    for (std::size_t j = 0; j < 4; ++j) f[j] = rng.normal();
    feats.push_back(f);
    labels.push_back(i < 40 ? 0 : 1);  // 2:1 priors
  }
  LogisticConfig cfg;
  cfg.l2 = 10.0;
  cfg.lr = 0.05;
  cfg.epochs = 800;
  const LogisticModel model = logistic_fit(feats, labels, 2, cfg);
  for (double w : model.w.data) CHECK(std::fabs(w) < 0.05);
  double mean_p0 = 0.0;
  for (const RealVector& f : feats) mean_p0 += model.scores(f.span())[0];
  mean_p0 /= static_cast<double>(feats.size());
  CHECK(mean_p0 == doctest::Approx(2.0 / 3.0).epsilon(0.05));
}

TEST_CASE("logistic_fit: deterministic and validated") {
  Rng rng(23);
  std::vector<RealVector> feats;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    RealVector f(2);
    f[0] = rng.normal();
    f[1] = rng.normal();
    feats.push_back(f);
    labels.push_back(i % 3);
  }
  LogisticConfig cfg;
  cfg.epochs = 50;
  const LogisticModel a = logistic_fit(feats, labels, 3, cfg);
  const LogisticModel b = logistic_fit(feats, labels, 3, cfg);
  CHECK(a.w.data == b.w.data);  // bitwise
  CHECK(a.b.data == b.b.data);

  std::vector<int> bad_labels = labels;
  bad_labels[0] = 3;
  CHECK_THROWS_AS(logistic_fit(feats, bad_labels, 3, cfg), ValidationError);
  std::vector<RealVector> ragged = feats;
  ragged[1] = RealVector(5);
  CHECK_THROWS_AS(logistic_fit(ragged, labels, 3, cfg), DimensionError);
  LogisticConfig bad_cfg;
  bad_cfg.lr = 0.0;
  CHECK_THROWS_AS(logistic_fit(feats, labels, 3, bad_cfg), ConfigError);
}
