#include "deci/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace deci {

namespace {

struct TensorRef {
  std::string name;
  std::vector<double>* data = nullptr;
  bool decayable = false;
};

std::vector<TensorRef> collect_tensors(ModelParams& p) {
  std::vector<TensorRef> out;
  for_each_tensor(p, [&](const std::string& name, std::vector<double>& flat,
                         std::size_t, std::size_t, bool decayable) {
    out.push_back({name, &flat, decayable});
  });
  return out;
}

std::vector<const std::vector<double>*> collect_tensors_const(
    const ModelParams& p) {
  std::vector<const std::vector<double>*> out;
  for_each_tensor(p, [&](const std::string&, const std::vector<double>& flat,
                         std::size_t, std::size_t, bool) {
    out.push_back(&flat);
  });
  return out;
}

double subset_accuracy(const ModelParams& params, const Dataset& data,
                       std::span<const std::size_t> idx) {
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    const RealVector logits = predict_logits(data.subjects[i].x, params);
    std::size_t best = 0;
    for (std::size_t v = 1; v < logits.size(); ++v) {
      if (logits[v] > logits[best]) best = v;
    }
    if (static_cast<int>(best) == data.subjects[i].label) ++correct;
  }
  return idx.empty() ? 0.0
                     : static_cast<double>(correct) /
                           static_cast<double>(idx.size());
}

void check_subject_indices(const Dataset& data,
                           std::span<const std::size_t> idx,
                           const char* what) {
  for (std::size_t i : idx) {
    if (i >= data.subjects.size()) {
      throw ValidationError(std::string(what) + ": subject index " +
                            std::to_string(i) + " out of range (" +
                            std::to_string(data.subjects.size()) +
                            " subjects)");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) {
    throw ConfigError("train: beta1 must be in [0, 1)");
  }
  if (!(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: beta2 must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("train: weight_decay must be non-negative");
  }
  if (patience < 0) throw ConfigError("train: patience must be non-negative");
}

void CvConfig::validate() const {
  if (k < 2) throw ConfigError("cv: need at least 2 folds");
  if (runs < 1) throw ConfigError("cv: need at least 1 run");
  if (jobs < 1) throw ConfigError("cv: jobs must be at least 1");
}

RealVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  RealVector p(logits.size());
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - zmax);
    total += p[i];
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] /= total;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label) {
  if (logits.size() < 2) {
    throw DimensionError("softmax_cross_entropy: need at least 2 logits");
  }
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw ValidationError("softmax_cross_entropy: label " +
                          std::to_string(label) + " outside [0, " +
                          std::to_string(logits.size()) + ")");
  }
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double total = 0.0;
  CrossEntropy ce;
  ce.grad = RealVector(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    ce.grad[i] = std::exp(logits[i] - zmax);
    total += ce.grad[i];
  }
  ce.loss = std::log(total) + zmax - logits[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < logits.size(); ++i) {
    ce.grad[i] /= total;
  }
  ce.grad[static_cast<std::size_t>(label)] -= 1.0;
  return ce;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
  cfg.validate();
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto p_refs = collect_tensors(params);
  const auto g_refs = collect_tensors_const(grads);
  const auto m_refs = collect_tensors(state.m);
  const auto v_refs = collect_tensors(state.v);
  if (g_refs.size() != p_refs.size() || m_refs.size() != p_refs.size() ||
      v_refs.size() != p_refs.size()) {
    throw DimensionError("adam_step: parameter/gradient/state tensor counts "
                         "disagree");
  }
  for (std::size_t t = 0; t < p_refs.size(); ++t) {
    std::vector<double>& p = *p_refs[t].data;
    const std::vector<double>& g = *g_refs[t];
    std::vector<double>& m = *m_refs[t].data;
    std::vector<double>& v = *v_refs[t].data;
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
      throw DimensionError("adam_step: tensor '" + p_refs[t].name +
                           "' has mismatched parameter/gradient/state sizes");
    }
    const bool decay = p_refs[t].decayable && cfg.weight_decay != 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) {
        throw NumericError("adam_step: non-finite gradient in '" +
                           p_refs[t].name + "' at index " + std::to_string(i));
      }
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double update = mhat / (std::sqrt(vhat) + cfg.adam_eps);
      if (decay) update += cfg.weight_decay * p[i];
      p[i] -= cfg.lr * update;
    }
  }
}

TrainResult train_model(const Dataset& data,
                        std::span<const std::size_t> train_idx,
                        std::span<const std::size_t> val_idx,
                        const ModelConfig& mcfg_in, const TrainConfig& tcfg) {
  tcfg.validate();
  data.validate();
  if (train_idx.empty()) {
    throw ConfigError("train_model: training index list is empty");
  }
  check_subject_indices(data, train_idx, "train_model(train)");
  check_subject_indices(data, val_idx, "train_model(val)");

  ModelConfig mcfg = mcfg_in;
  mcfg.n_classes = static_cast<std::size_t>(data.n_classes);
  mcfg.series_len = data.series_len;
  mcfg.n_channels = data.n_channels;
  mcfg.validate();

  Rng init_rng(mix_seed(tcfg.seed, 11));
  ModelParams params = init_params(mcfg, init_rng);
  AdamState adam(params);
  Rng drop_rng(mix_seed(tcfg.seed, 12));
  GradTape tape;

  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  const bool early = tcfg.patience > 0 && !val_idx.empty();
  ModelParams best_params = params;
  double best_acc = -1.0;
  int best_epoch = -1;

  TrainResult result;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(tcfg.seed, 13, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t batch_n =
          std::min(order.size() - start,
                   static_cast<std::size_t>(tcfg.batch_size));
      ModelParams grads = zeros_like(params);
      for (std::size_t b = 0; b < batch_n; ++b) {
        const SubjectSeries& subj = data.subjects[order[start + b]];
        tape.reset();
        const BoundParams bound = bind_params(tape, params);
        const ForwardResult fr = model_forward(tape, subj.x, params, bound,
                                               Mode::train, drop_rng, nullptr);
        const CrossEntropy ce =
            softmax_cross_entropy(tape.value(fr.y_hat), subj.label);
        if (!std::isfinite(ce.loss)) {
          throw NumericError("train_model: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(start /
                                            static_cast<std::size_t>(
                                                tcfg.batch_size)) +
                             ", subject '" + subj.subject_id + "'");
        }
        tape.backward(fr.y_hat, ce.grad.span());
        accumulate_grads(tape, bound, grads,
                         1.0 / static_cast<double>(batch_n));
        loss_sum += ce.loss;
      }
      adam_step(params, grads, adam, tcfg);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (!val_idx.empty()) {
      rec.has_val = true;
      rec.val_accuracy = subset_accuracy(params, data, val_idx);
      if (rec.val_accuracy > best_acc) {
        best_acc = rec.val_accuracy;
        best_epoch = epoch;
        if (early) best_params = params;
      }
    }
    result.history.epochs.push_back(rec);
    if (early && epoch - best_epoch >= tcfg.patience) break;
  }
  if (early && best_epoch >= 0) {
    result.params = std::move(best_params);
    result.history.best_epoch = best_epoch;
  } else {
    result.params = std::move(params);
    result.history.best_epoch =
        static_cast<int>(result.history.epochs.size()) - 1;
  }
  return result;
}

double FoldMetrics::by_name(const std::string& name) const {
  if (name == "accuracy") return accuracy;
  if (name == "precision_macro") return precision_macro;
  if (name == "recall_macro") return recall_macro;
  if (name == "f1_macro") return f1_macro;
  if (name == "auroc_macro") return auroc_macro;
  throw ValidationError("FoldMetrics: unknown metric '" + name + "'");
}

double auroc_binary(std::span<const double> scores,
                    std::span<const std::uint8_t> is_positive,
                    bool* degenerate) {
  if (scores.size() != is_positive.size()) {
    throw DimensionError("auroc_binary: " + std::to_string(scores.size()) +
                         " scores vs " + std::to_string(is_positive.size()) +
                         " flags");
  }
  if (degenerate) *degenerate = false;
  std::uint64_t pos = 0;
  for (std::uint8_t f : is_positive) pos += (f != 0);
  const std::uint64_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    if (degenerate) *degenerate = true;
    return 0.5;
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Two concordance units per positive>negative pair, one unit per tie.
  std::uint64_t units = 0;
  std::uint64_t neg_below = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    std::uint64_t group_pos = 0;
    std::uint64_t group_neg = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (is_positive[idx[j]]) {
        ++group_pos;
      } else {
        ++group_neg;
      }
      ++j;
    }
    units += 2 * group_pos * neg_below + group_pos * group_neg;
    neg_below += group_neg;
    i = j;
  }
  return static_cast<double>(units) / (2.0 * static_cast<double>(pos) *
                                       static_cast<double>(neg));
}

FoldMetrics compute_metrics(const std::vector<int>& y_true,
                            const std::vector<RealVector>& scores,
                            int n_classes,
                            std::vector<std::string>* warnings) {
  if (n_classes < 2) {
    throw ConfigError("compute_metrics: n_classes must be at least 2");
  }
  if (y_true.empty() || y_true.size() != scores.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(y_true.size()) +
                         " labels vs " + std::to_string(scores.size()) +
                         " score rows");
  }
  const std::size_t v_len = static_cast<std::size_t>(n_classes);
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (scores[m].size() != v_len) {
      throw DimensionError("compute_metrics: sample " + std::to_string(m) +
                           " has " + std::to_string(scores[m].size()) +
                           " scores, expected " + std::to_string(v_len));
    }
    if (y_true[m] < 0 || y_true[m] >= n_classes) {
      throw ValidationError("compute_metrics: label " +
                            std::to_string(y_true[m]) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
  }
  std::vector<std::size_t> tp(v_len, 0), fp(v_len, 0), fn(v_len, 0);
  std::size_t correct = 0;
  for (std::size_t m = 0; m < scores.size(); ++m) {
    std::size_t pred = 0;
    for (std::size_t v = 1; v < v_len; ++v) {
      if (scores[m][v] > scores[m][pred]) pred = v;
    }
    const auto truth = static_cast<std::size_t>(y_true[m]);
    if (pred == truth) {
      ++correct;
      ++tp[truth];
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }
  FoldMetrics out;
  out.accuracy =
      static_cast<double>(correct) / static_cast<double>(y_true.size());
  double prec_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0;
  for (std::size_t v = 0; v < v_len; ++v) {
    const double denom_p = static_cast<double>(tp[v] + fp[v]);
    const double denom_r = static_cast<double>(tp[v] + fn[v]);
    const double prec =
        denom_p > 0.0 ? static_cast<double>(tp[v]) / denom_p : 0.0;
    const double rec =
        denom_r > 0.0 ? static_cast<double>(tp[v]) / denom_r : 0.0;
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec)
                                         : 0.0;
    prec_sum += prec;
    rec_sum += rec;
    f1_sum += f1;
  }
  out.precision_macro = prec_sum / static_cast<double>(v_len);
  out.recall_macro = rec_sum / static_cast<double>(v_len);
  out.f1_macro = f1_sum / static_cast<double>(v_len);

  double auc_sum = 0.0;
  std::vector<double> class_scores(y_true.size());
  std::vector<std::uint8_t> flags(y_true.size());
  for (std::size_t v = 0; v < v_len; ++v) {
    for (std::size_t m = 0; m < y_true.size(); ++m) {
      class_scores[m] = scores[m][v];
      flags[m] = static_cast<std::uint8_t>(
          static_cast<std::size_t>(y_true[m]) == v);
    }
    bool degenerate = false;
    auc_sum += auroc_binary(class_scores, flags, &degenerate);
    if (degenerate && warnings) {
      warnings->push_back("auroc: class " + std::to_string(v) +
                          " has no positives or no negatives; counted as 0.5");
    }
  }
  out.auroc_macro = auc_sum / static_cast<double>(v_len);
  return out;
}

FoldMetrics evaluate(const ModelParams& params, const Dataset& data,
                     std::span<const std::size_t> idx,
                     std::vector<std::string>* warnings) {
  if (idx.empty()) {
    throw ConfigError("evaluate: subject index list is empty");
  }
  check_subject_indices(data, idx, "evaluate");
  std::vector<int> y_true;
  std::vector<RealVector> scores;
  y_true.reserve(idx.size());
  scores.reserve(idx.size());
  for (std::size_t i : idx) {
    y_true.push_back(data.subjects[i].label);
    const RealVector logits = predict_logits(data.subjects[i].x, params);
    scores.push_back(softmax(logits.span()));
  }
  return compute_metrics(y_true, scores, data.n_classes, warnings);
}

ModelRunner make_deci_runner(ModelConfig mcfg, TrainConfig tcfg) {
  return [mcfg, tcfg](const Dataset& data,
                      std::span<const std::size_t> train_idx,
                      std::span<const std::size_t> test_idx,
                      std::uint64_t seed) {
    TrainConfig t = tcfg;
    t.seed = seed;
    // Held-out subjects never steer early stopping: train without a
    // validation split and keep the final weights.
    const TrainResult r = train_model(data, train_idx, {}, mcfg, t);
    std::vector<RealVector> scores;
    scores.reserve(test_idx.size());
    for (std::size_t i : test_idx) {
      const RealVector logits = predict_logits(data.subjects[i].x, r.params);
      scores.push_back(softmax(logits.span()));
    }
    return scores;
  };
}

ModelRunner make_fc_logistic_runner(LogisticConfig lcfg) {
  return [lcfg](const Dataset& data, std::span<const std::size_t> train_idx,
                std::span<const std::size_t> test_idx, std::uint64_t) {
    std::vector<RealVector> feats;
    std::vector<int> labels;
    feats.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
      feats.push_back(fc_features(pearson_fc(data.subjects[i].x).fc));
      labels.push_back(data.subjects[i].label);
    }
    const LogisticModel model =
        logistic_fit(feats, labels, data.n_classes, lcfg);
    std::vector<RealVector> scores;
    scores.reserve(test_idx.size());
    for (std::size_t i : test_idx) {
      const RealVector f = fc_features(pearson_fc(data.subjects[i].x).fc);
      scores.push_back(model.scores(f.span()));
    }
    return scores;
  };
}

MetricsReport summarize_rows(std::vector<MetricsRow> rows,
                             std::vector<std::string> warnings) {
  if (rows.empty()) {
    throw ConfigError("summarize_rows: no metric rows");
  }
  MetricsReport report;
  report.rows = std::move(rows);
  report.warnings = std::move(warnings);
  const double n = static_cast<double>(report.rows.size());
  for (const char* name : kMetricNames) {
    double sum = 0.0;
    for (const MetricsRow& r : report.rows) sum += r.metrics.by_name(name);
    const double mean = sum / n;
    double sq = 0.0;
    for (const MetricsRow& r : report.rows) {
      const double d = r.metrics.by_name(name) - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / n);
    auto set = [&](FoldMetrics& fm, double value) {
      const std::string key(name);
      if (key == "accuracy") fm.accuracy = value;
      else if (key == "precision_macro") fm.precision_macro = value;
      else if (key == "recall_macro") fm.recall_macro = value;
      else if (key == "f1_macro") fm.f1_macro = value;
      else fm.auroc_macro = value;
    };
    set(report.mean, mean);
    set(report.stddev, sd);
  }
  return report;
}

MetricsReport cross_validate(const Dataset& data, const ModelRunner& runner,
                             const CvConfig& cfg) {
  cfg.validate();
  data.validate();
  const std::vector<int> labels = data.labels();
  std::vector<FoldSplit> splits;
  splits.reserve(cfg.runs);
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    splits.push_back(stratified_kfold(labels, cfg.k, cfg.base_seed + r));
  }
  const std::size_t n_tasks = cfg.runs * cfg.k;
  std::vector<FoldMetrics> metrics(n_tasks);
  std::vector<std::vector<std::string>> task_warnings(n_tasks);

  auto run_task = [&](std::size_t task) {
    const std::size_t r = task / cfg.k;
    const std::size_t fold = task % cfg.k;
    const FoldSplit& split = splits[r];
    const std::vector<std::size_t>& test = split.test_folds[fold];
    const std::vector<std::size_t> train = split.train_indices(fold);
    const std::uint64_t seed = mix_seed(cfg.base_seed + r, 5, fold);
    const std::vector<RealVector> scores = runner(data, train, test, seed);
    if (scores.size() != test.size()) {
      throw DimensionError("cross_validate: runner returned " +
                           std::to_string(scores.size()) + " score rows for " +
                           std::to_string(test.size()) + " test subjects");
    }
    std::vector<int> y_true;
    y_true.reserve(test.size());
    for (std::size_t i : test) y_true.push_back(labels[i]);
    std::vector<std::string> warn;
    metrics[task] = compute_metrics(y_true, scores, data.n_classes, &warn);
    for (std::string& w : warn) {
      task_warnings[task].push_back("run " + std::to_string(r) + " fold " +
                                    std::to_string(fold) + ": " + w);
    }
  };

  if (cfg.jobs <= 1 || n_tasks <= 1) {
    for (std::size_t task = 0; task < n_tasks; ++task) run_task(task);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      while (true) {
        const std::size_t task = next.fetch_add(1);
        if (task >= n_tasks) break;
        try {
          run_task(task);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    const std::size_t n_threads = std::min(cfg.jobs, n_tasks);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::vector<MetricsRow> rows;
  std::vector<std::string> warnings;
  rows.reserve(n_tasks);
  for (std::size_t task = 0; task < n_tasks; ++task) {
    rows.push_back(MetricsRow{task / cfg.k, task % cfg.k, metrics[task]});
    for (std::string& w : task_warnings[task]) warnings.push_back(std::move(w));
  }
  return summarize_rows(std::move(rows), std::move(warnings));
}

std::vector<AblationRow> ablation_suite(const Dataset& data,
                                        const ModelConfig& base_mcfg,
                                        const TrainConfig& tcfg,
                                        const CvConfig& cv,
                                        std::span<const std::size_t> kernels) {
  std::vector<AblationRow> out;
  const BranchMode modes[4] = {BranchMode::none, BranchMode::cycle_only,
                               BranchMode::drift_only, BranchMode::both};
  for (BranchMode mode : modes) {
    ModelConfig mcfg = base_mcfg;
    mcfg.branches = mode;
    out.push_back(AblationRow{
        "branches=" + to_string(mode),
        cross_validate(data, make_deci_runner(mcfg, tcfg), cv)});
  }
  for (std::size_t k : kernels) {
    ModelConfig mcfg = base_mcfg;
    mcfg.branches = BranchMode::both;
    mcfg.kernel_size = k;
    out.push_back(AblationRow{
        "kernel=" + std::to_string(k),
        cross_validate(data, make_deci_runner(mcfg, tcfg), cv)});
  }
  return out;
}

Dataset shuffle_bold_dataset(const Dataset& data, std::uint64_t seed) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.subjects.size(); ++i) {
    Rng rng(mix_seed(seed, 3, i));
    const std::vector<std::size_t> perm =
        rng.permutation(out.subjects[i].x.rows);
    out.subjects[i].x = shuffle_bold(out.subjects[i].x, perm);
  }
  return out;
}

std::string metrics_table(const MetricsReport& report) {
  std::string out = "metric              mean      std\n";
  char line[96];
  for (const char* name : kMetricNames) {
    std::snprintf(line, sizeof(line), "%-18s %8.4f %8.4f\n", name,
                  report.mean.by_name(name), report.stddev.by_name(name));
    out += line;
  }
  return out;
}

}  // namespace deci
