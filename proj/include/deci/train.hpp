#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deci/baselines.hpp"
#include "deci/data.hpp"
#include "deci/model.hpp"
#include "deci/types.hpp"

namespace deci {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; skips biases and LayerNorm affine
  int patience = 30;          // 0 disables early stopping
  std::uint64_t seed = 0;

  void validate() const;
};

RealVector softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  RealVector grad;  // softmax(logits) - onehot(label); sums to ~0
};

// Max-subtracted softmax cross-entropy for one sample.
CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label);

struct AdamState {
  ModelParams m;
  ModelParams v;
  long step = 0;

  explicit AdamState(const ModelParams& shape)
      : m(zeros_like(shape)), v(zeros_like(shape)), step(0) {}
};

// Bias-corrected Adam with decoupled weight decay. Throws NumericError,
// naming the tensor, if any gradient entry is non-finite.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  bool has_val = false;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // epoch whose weights were kept (last if no val)
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Mini-batch training with a seeded shuffle per epoch. Early stopping (when
// patience > 0 and val_idx is non-empty) tracks validation accuracy and
// restores the best weights. The model config's data-dependent dims
// (n_classes, series_len, n_channels) are taken from the dataset.
TrainResult train_model(const Dataset& data,
                        std::span<const std::size_t> train_idx,
                        std::span<const std::size_t> val_idx,
                        const ModelConfig& mcfg, const TrainConfig& tcfg);

struct FoldMetrics {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  double auroc_macro = 0.0;

  double by_name(const std::string& name) const;
};

inline const char* const kMetricNames[5] = {
    "accuracy", "precision_macro", "recall_macro", "f1_macro", "auroc_macro"};

// Exact rank-free AUROC: counts concordant and tied positive/negative pairs
// with integer arithmetic, ties worth one half. Returns 0.5 and sets
// *degenerate when either class is empty.
double auroc_binary(std::span<const double> scores,
                    std::span<const std::uint8_t> is_positive,
                    bool* degenerate = nullptr);

// Macro metrics from per-sample class scores. Predictions take the argmax
// (lowest index on ties); per-class precision/recall/F1 define 0/0 as 0 and
// average over all classes. AUROC is one-vs-rest per class, averaged, with
// degenerate classes contributing 0.5 plus a warning.
FoldMetrics compute_metrics(const std::vector<int>& y_true,
                            const std::vector<RealVector>& scores,
                            int n_classes,
                            std::vector<std::string>* warnings = nullptr);

// Eval-mode metrics of a trained model on the given subjects.
FoldMetrics evaluate(const ModelParams& params, const Dataset& data,
                     std::span<const std::size_t> idx,
                     std::vector<std::string>* warnings = nullptr);

// Trains on train_idx and returns one score vector (length n_classes) per
// test subject, in test_idx order. The seed pins every random choice.
using ModelRunner = std::function<std::vector<RealVector>(
    const Dataset& data, std::span<const std::size_t> train_idx,
    std::span<const std::size_t> test_idx, std::uint64_t seed)>;

ModelRunner make_deci_runner(ModelConfig mcfg, TrainConfig tcfg);
ModelRunner make_fc_logistic_runner(LogisticConfig lcfg);

struct MetricsRow {
  std::size_t run = 0;
  std::size_t fold = 0;
  FoldMetrics metrics;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;  // run-major, fold-minor
  FoldMetrics mean;
  FoldMetrics stddev;  // population std across rows
  std::vector<std::string> warnings;
};

MetricsReport summarize_rows(std::vector<MetricsRow> rows,
                             std::vector<std::string> warnings);

struct CvConfig {
  std::size_t k = 5;
  std::size_t runs = 5;
  std::uint64_t base_seed = 0;  // run r uses fold seed base_seed + r
  std::size_t jobs = 1;

  void validate() const;
};

// Repeated stratified k-fold: run r draws folds with seed base_seed + r and
// trains each fold with a seed derived from (run seed, fold). Row order is
// fixed run-major regardless of --jobs.
MetricsReport cross_validate(const Dataset& data, const ModelRunner& runner,
                             const CvConfig& cfg);

struct AblationRow {
  std::string label;
  MetricsReport report;
};

// Branch ablations (none, cycle, drift, both) followed by a kernel-size
// sweep at branches=both. Every row reuses the same CV protocol.
std::vector<AblationRow> ablation_suite(const Dataset& data,
                                        const ModelConfig& base_mcfg,
                                        const TrainConfig& tcfg,
                                        const CvConfig& cv,
                                        std::span<const std::size_t> kernels);

// Rebuilds a dataset with every subject's rows permuted by its own seeded
// permutation (shared across channels), preserving within-subject
// correlations while destroying temporal order.
Dataset shuffle_bold_dataset(const Dataset& data, std::uint64_t seed);

// Fixed-width text table of the per-metric mean +/- std.
std::string metrics_table(const MetricsReport& report);

}  // namespace deci
