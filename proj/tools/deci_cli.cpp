// deci: command-line harness around the DeCI library. Subcommands cover
// synthetic data generation, training, evaluation, repeated cross-validation,
// branch/kernel ablations, decomposition export, functional-connectivity
// export, and side-by-side report aggregation.
//
// Conventions shared by every subcommand:
//   * settings resolve as command line > --config JSON > built-in defaults,
//     and the merged result is frozen to <out>/config_snapshot.json before
//     any computation starts, so every run can be replayed byte-for-byte
//     with `--config <out>/config_snapshot.json`;
//   * input dataset trees are never modified;
//   * exit codes: 0 success, 1 validation/config/lookup errors, 2 I/O or
//     numeric failures.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deci/baselines.hpp"
#include "deci/csvio.hpp"
#include "deci/data.hpp"
#include "deci/model.hpp"
#include "deci/rng.hpp"
#include "deci/train.hpp"
#include "deci/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config-file plumbing
// ---------------------------------------------------------------------------

class ConfigFile {
 public:
  ConfigFile() : data_(json::object()) {}

  static ConfigFile load(const std::string& path) {
    ConfigFile cfg;
    if (path.empty()) return cfg;
    json parsed;
    try {
      parsed = json::parse(deci::read_text_file(path));
    } catch (const json::exception& e) {
      throw deci::ConfigError("config '" + path + "': " + e.what());
    }
    if (!parsed.is_object()) {
      throw deci::ConfigError("config '" + path +
                              "': top level must be a JSON object");
    }
    cfg.data_ = std::move(parsed);
    cfg.path_ = path;
    return cfg;
  }

  // Rejects keys the command does not understand, so typos fail loudly. The
  // "command" key is always tolerated: snapshots carry it for provenance.
  void restrict_keys(const std::string& command,
                     std::initializer_list<const char*> allowed) const {
    for (const auto& item : data_.items()) {
      if (item.key() == "command") continue;
      const bool known =
          std::any_of(allowed.begin(), allowed.end(),
                      [&](const char* k) { return item.key() == k; });
      if (!known) {
        throw deci::ConfigError("config '" + path_ + "': unknown key '" +
                                item.key() + "' for command '" + command +
                                "'");
      }
    }
  }

  bool has(const std::string& key) const { return data_.contains(key); }

  template <class T>
  T get(const std::string& key) const {
    try {
      return data_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw deci::ConfigError("config '" + path_ + "': key '" + key + "': " +
                              e.what());
    }
  }

  const json& raw() const { return data_; }

 private:
  json data_;
  std::string path_;
};

// Fills `value` from the config file when the flag was not given on the
// command line; CLI-provided values always win.
template <class T>
void fallback(const CLI::App* sub, const std::string& flag,
              const ConfigFile& cfg, const std::string& key, T& value) {
  if (sub->count(flag) == 0 && cfg.has(key)) value = cfg.get<T>(key);
}

// ---------------------------------------------------------------------------
// Output-directory plumbing
// ---------------------------------------------------------------------------

std::string default_out(const std::string& command) {
  const char* root = std::getenv("DECI_OUT_ROOT");
  const std::string base =
      (root != nullptr && *root != '\0') ? root : "deci_out";
  return base + "/" + command;
}

void prepare_out_dir(const std::string& dir) {
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw deci::IoError("cannot create output directory '" + dir +
                        "': " + e.what());
  }
}

void write_snapshot(const std::string& out, json snapshot) {
  deci::write_text_file(out + "/config_snapshot.json", snapshot.dump(2) + "\n");
}

std::string sanitize_for_filename(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out.empty() ? "unnamed" : out;
}

// ---------------------------------------------------------------------------
// Shared model/training option bundle (cv, train, ablate)
// ---------------------------------------------------------------------------

struct ModelTrainOpts {
  std::string branches = "both";
  std::size_t n_blocks = 1;
  std::size_t model_dim = 64;
  std::size_t kernel = 0;  // 0 = model_dim
  double dropout = 0.0;
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int patience = 30;
};

void add_model_train_flags(CLI::App* sub, ModelTrainOpts& o,
                           bool with_branch_flags) {
  if (with_branch_flags) {
    sub->add_option("--branches", o.branches,
                    "Branch mode: both|cycle|drift|none");
    sub->add_option("--kernel", o.kernel, "Drift FIR taps K (0 means K = D)");
  }
  sub->add_option("--blocks", o.n_blocks, "Decomposition blocks N");
  sub->add_option("--dim", o.model_dim, "Embedding width D");
  sub->add_option("--dropout", o.dropout, "Dropout probability in [0, 1)");
  sub->add_option("--epochs", o.epochs, "Training epochs");
  sub->add_option("--batch-size", o.batch_size, "Mini-batch size");
  sub->add_option("--lr", o.lr, "Adam learning rate");
  sub->add_option("--weight-decay", o.weight_decay,
                  "Decoupled weight decay (skips biases and norms)");
  sub->add_option("--patience", o.patience,
                  "Early-stop patience in epochs (0 disables)");
}

void fallback_model_train(const CLI::App* sub, const ConfigFile& cfg,
                          ModelTrainOpts& o, bool with_branch_flags) {
  if (with_branch_flags) {
    fallback(sub, "--branches", cfg, "branches", o.branches);
    fallback(sub, "--kernel", cfg, "kernel", o.kernel);
  }
  fallback(sub, "--blocks", cfg, "n_blocks", o.n_blocks);
  fallback(sub, "--dim", cfg, "model_dim", o.model_dim);
  fallback(sub, "--dropout", cfg, "dropout", o.dropout);
  fallback(sub, "--epochs", cfg, "epochs", o.epochs);
  fallback(sub, "--batch-size", cfg, "batch_size", o.batch_size);
  fallback(sub, "--lr", cfg, "lr", o.lr);
  fallback(sub, "--weight-decay", cfg, "weight_decay", o.weight_decay);
  fallback(sub, "--patience", cfg, "patience", o.patience);
}

deci::ModelConfig to_model_config(const ModelTrainOpts& o) {
  deci::ModelConfig mcfg;
  mcfg.n_blocks = o.n_blocks;
  mcfg.model_dim = o.model_dim;
  mcfg.kernel_size = o.kernel;
  mcfg.dropout = o.dropout;
  mcfg.branches = deci::branch_mode_from_string(o.branches);
  return mcfg;  // data-dependent dims are filled in by the trainer
}

deci::TrainConfig to_train_config(const ModelTrainOpts& o,
                                  std::uint64_t seed) {
  deci::TrainConfig tcfg;
  tcfg.epochs = o.epochs;
  tcfg.batch_size = o.batch_size;
  tcfg.lr = o.lr;
  tcfg.weight_decay = o.weight_decay;
  tcfg.patience = o.patience;
  tcfg.seed = seed;
  tcfg.validate();
  return tcfg;
}

void snapshot_model_train(json& j, const ModelTrainOpts& o,
                          bool with_branch_flags) {
  if (with_branch_flags) {
    j["branches"] = o.branches;
    j["kernel"] = o.kernel;
  }
  j["n_blocks"] = o.n_blocks;
  j["model_dim"] = o.model_dim;
  j["dropout"] = o.dropout;
  j["epochs"] = o.epochs;
  j["batch_size"] = o.batch_size;
  j["lr"] = o.lr;
  j["weight_decay"] = o.weight_decay;
  j["patience"] = o.patience;
}

// ---------------------------------------------------------------------------
// Dataset / checkpoint helpers
// ---------------------------------------------------------------------------

deci::Dataset load_data_arg(const std::string& path) {
  if (path.empty()) {
    throw deci::ConfigError("--data is required (manifest path or dataset "
                            "directory)");
  }
  fs::path p(path);
  if (fs::is_directory(p)) p /= "manifest.json";
  return deci::load_dataset(p.string());
}

deci::ModelParams load_checkpoint_arg(const std::string& path) {
  if (path.empty()) throw deci::ConfigError("--checkpoint is required");
  fs::path p(path);
  if (!fs::is_directory(p)) p = p.parent_path();
  return deci::load_checkpoint(p.string());
}

void check_checkpoint_matches(const deci::ModelParams& params,
                              const deci::Dataset& d) {
  const deci::ModelConfig& c = params.config;
  if (c.series_len != d.series_len || c.n_channels != d.n_channels ||
      c.n_classes != static_cast<std::size_t>(d.n_classes)) {
    throw deci::ConfigError(
        "checkpoint shape (T=" + std::to_string(c.series_len) +
        ", C=" + std::to_string(c.n_channels) +
        ", V=" + std::to_string(c.n_classes) + ") does not match dataset '" +
        d.name + "' (T=" + std::to_string(d.series_len) +
        ", C=" + std::to_string(d.n_channels) +
        ", V=" + std::to_string(d.n_classes) + ")");
  }
}

std::vector<std::size_t> all_indices(const deci::Dataset& d) {
  std::vector<std::size_t> idx(d.subjects.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

// ---------------------------------------------------------------------------
// Result writers
// ---------------------------------------------------------------------------

std::string metric_cells(const deci::FoldMetrics& m) {
  std::string s;
  for (const char* name : deci::kMetricNames) {
    s += ',';
    s += deci::format_double(m.by_name(name));
  }
  return s;
}

void write_folds_csv(const std::string& path, const deci::MetricsReport& rep) {
  std::string s = "run,fold";
  for (const char* name : deci::kMetricNames) s += std::string(",") + name;
  s += '\n';
  for (const deci::MetricsRow& row : rep.rows) {
    s += std::to_string(row.run) + "," + std::to_string(row.fold) +
         metric_cells(row.metrics) + "\n";
  }
  deci::write_text_file(path, s);
}

void write_summary_csv(const std::string& path,
                       const deci::MetricsReport& rep) {
  std::string s = "metric,mean,std\n";
  for (const char* name : deci::kMetricNames) {
    s += std::string(name) + "," + deci::format_double(rep.mean.by_name(name)) +
         "," + deci::format_double(rep.stddev.by_name(name)) + "\n";
  }
  deci::write_text_file(path, s);
}

void write_metric_value_csv(const std::string& path,
                            const deci::FoldMetrics& m) {
  std::string s = "metric,value\n";
  for (const char* name : deci::kMetricNames) {
    s += std::string(name) + "," + deci::format_double(m.by_name(name)) + "\n";
  }
  deci::write_text_file(path, s);
}

std::string warnings_block(const std::vector<std::string>& warnings) {
  if (warnings.empty()) return "warnings: none\n";
  std::string s = "warnings (" + std::to_string(warnings.size()) + "):\n";
  for (const std::string& w : warnings) s += "  - " + w + "\n";
  return s;
}

std::string dataset_line(const deci::Dataset& d) {
  return "data: " + d.name + " (" + std::to_string(d.subjects.size()) +
         " subjects, V=" + std::to_string(d.n_classes) +
         ", T=" + std::to_string(d.series_len) +
         ", C=" + std::to_string(d.n_channels) + ")\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config_path;
  std::string spec_path;
  std::string out;
  std::uint64_t seed = 0;
};

deci::SynthSpec default_synth_spec() {
  deci::SynthSpec spec;  // 60 subjects/class, T=64, C=8, noise 0.5
  spec.drift_slopes = {1.0, -1.0};
  spec.cycle_freqs = {4.0, 8.0};
  spec.cycle_amps = {1.0, 1.0};
  return spec;
}

int run_synth(const CLI::App* sub, const SynthArgs& a) {
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys("synth", {"spec", "seed"});

  deci::SynthSpec spec = default_synth_spec();
  if (!a.spec_path.empty()) {
    spec = deci::synth_spec_from_json(deci::read_text_file(a.spec_path));
  } else if (cfg.has("spec")) {
    spec = deci::synth_spec_from_json(cfg.get<json>("spec").dump());
  }
  if (sub->count("--seed") > 0) {
    spec.seed = a.seed;
  } else if (cfg.has("seed")) {
    spec.seed = cfg.get<std::uint64_t>("seed");
  }
  spec.validate();  // fail before anything touches the filesystem

  const std::string out = a.out.empty() ? default_out("synth") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "synth";
  snapshot["spec"] = json::parse(deci::synth_spec_to_json(spec));
  write_snapshot(out, snapshot);

  const deci::Dataset d = deci::synth_generate(spec);
  deci::save_dataset(d, out);
  std::cout << "synth: wrote " << d.subjects.size() << " subjects to " << out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cv
// ---------------------------------------------------------------------------

struct CvArgs {
  std::string config_path;
  std::string data;
  std::string model = "deci";
  std::string out;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::size_t runs = 5;
  std::size_t jobs = 1;
  bool shuffle_bold = false;
  ModelTrainOpts mt;
  double fc_l2 = 1e-3;
  double fc_lr = 0.1;
  int fc_epochs = 500;
};

int run_cv(const CLI::App* sub, const CvArgs& args) {
  CvArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys(
      "cv", {"data", "model", "seed", "folds", "runs", "jobs", "shuffle_bold",
             "branches", "kernel", "n_blocks", "model_dim", "dropout",
             "epochs", "batch_size", "lr", "weight_decay", "patience",
             "fc_l2", "fc_lr", "fc_epochs"});
  fallback(sub, "--data", cfg, "data", a.data);
  fallback(sub, "--model", cfg, "model", a.model);
  fallback(sub, "--seed", cfg, "seed", a.seed);
  fallback(sub, "--folds", cfg, "folds", a.folds);
  fallback(sub, "--runs", cfg, "runs", a.runs);
  fallback(sub, "--jobs", cfg, "jobs", a.jobs);
  fallback(sub, "--shuffle-bold", cfg, "shuffle_bold", a.shuffle_bold);
  fallback_model_train(sub, cfg, a.mt, true);
  fallback(sub, "--fc-l2", cfg, "fc_l2", a.fc_l2);
  fallback(sub, "--fc-lr", cfg, "fc_lr", a.fc_lr);
  fallback(sub, "--fc-epochs", cfg, "fc_epochs", a.fc_epochs);

  if (a.model != "deci" && a.model != "fc-logistic") {
    throw deci::ConfigError("--model must be 'deci' or 'fc-logistic', got '" +
                            a.model + "'");
  }
  if (a.data.empty()) throw deci::ConfigError("--data is required");
  deci::CvConfig cv;
  cv.k = a.folds;
  cv.runs = a.runs;
  cv.base_seed = a.seed;
  cv.jobs = a.jobs;
  cv.validate();
  const deci::ModelConfig mcfg = to_model_config(a.mt);
  const deci::TrainConfig tcfg = to_train_config(a.mt, a.seed);
  deci::LogisticConfig lcfg;
  lcfg.l2 = a.fc_l2;
  lcfg.lr = a.fc_lr;
  lcfg.epochs = a.fc_epochs;
  lcfg.validate();

  const std::string out = a.out.empty() ? default_out("cv") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "cv";
  snapshot["data"] = a.data;
  snapshot["model"] = a.model;
  snapshot["seed"] = a.seed;
  snapshot["folds"] = a.folds;
  snapshot["runs"] = a.runs;
  snapshot["jobs"] = a.jobs;
  snapshot["shuffle_bold"] = a.shuffle_bold;
  snapshot_model_train(snapshot, a.mt, true);
  snapshot["fc_l2"] = a.fc_l2;
  snapshot["fc_lr"] = a.fc_lr;
  snapshot["fc_epochs"] = a.fc_epochs;
  write_snapshot(out, snapshot);

  deci::Dataset d = load_data_arg(a.data);
  if (a.shuffle_bold) d = deci::shuffle_bold_dataset(d, a.seed);

  const deci::ModelRunner runner =
      a.model == "deci" ? deci::make_deci_runner(mcfg, tcfg)
                        : deci::make_fc_logistic_runner(lcfg);
  const deci::MetricsReport rep = deci::cross_validate(d, runner, cv);

  write_folds_csv(out + "/folds.csv", rep);
  write_summary_csv(out + "/summary.csv", rep);
  std::string report = "cv results\n";
  report += dataset_line(d);
  report += "model: " + a.model + "\n";
  report += "folds: " + std::to_string(a.folds) +
            "  runs: " + std::to_string(a.runs) +
            "  seed: " + std::to_string(a.seed) +
            "  shuffle_bold: " + (a.shuffle_bold ? "yes" : "no") + "\n\n";
  report += deci::metrics_table(rep);
  report += "\n" + warnings_block(rep.warnings);
  deci::write_text_file(out + "/report.txt", report);
  std::cout << report;
  std::cout << "cv: wrote " << out << "/{folds.csv,summary.csv,report.txt}\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  double val_frac = 0.0;
  bool shuffle_bold = false;
  ModelTrainOpts mt;
};

int run_train(const CLI::App* sub, const TrainArgs& args) {
  TrainArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys(
      "train", {"data", "seed", "val_frac", "shuffle_bold", "branches",
                "kernel", "n_blocks", "model_dim", "dropout", "epochs",
                "batch_size", "lr", "weight_decay", "patience"});
  fallback(sub, "--data", cfg, "data", a.data);
  fallback(sub, "--seed", cfg, "seed", a.seed);
  fallback(sub, "--val-frac", cfg, "val_frac", a.val_frac);
  fallback(sub, "--shuffle-bold", cfg, "shuffle_bold", a.shuffle_bold);
  fallback_model_train(sub, cfg, a.mt, true);

  if (a.data.empty()) throw deci::ConfigError("--data is required");
  if (a.val_frac < 0.0 || a.val_frac >= 1.0) {
    throw deci::ConfigError("--val-frac must lie in [0, 1), got " +
                            deci::format_double(a.val_frac));
  }
  const deci::ModelConfig mcfg = to_model_config(a.mt);
  const deci::TrainConfig tcfg = to_train_config(a.mt, a.seed);

  const std::string out = a.out.empty() ? default_out("train") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "train";
  snapshot["data"] = a.data;
  snapshot["seed"] = a.seed;
  snapshot["val_frac"] = a.val_frac;
  snapshot["shuffle_bold"] = a.shuffle_bold;
  snapshot_model_train(snapshot, a.mt, true);
  write_snapshot(out, snapshot);

  deci::Dataset d = load_data_arg(a.data);
  if (a.shuffle_bold) d = deci::shuffle_bold_dataset(d, a.seed);

  std::vector<std::size_t> train_idx = all_indices(d);
  std::vector<std::size_t> val_idx;
  if (a.val_frac > 0.0) {
    const std::size_t k = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(1.0 / a.val_frac)));
    const deci::FoldSplit split =
        deci::stratified_kfold(d.labels(), k, deci::mix_seed(a.seed, 0x5e1d));
    val_idx = split.test_folds[0];
    train_idx = split.train_indices(0);
  }

  const deci::TrainResult res =
      deci::train_model(d, train_idx, val_idx, mcfg, tcfg);
  deci::save_checkpoint(res.params, out + "/checkpoint");

  std::string hist = val_idx.empty() ? "epoch,train_loss\n"
                                     : "epoch,train_loss,val_accuracy\n";
  for (const deci::EpochRecord& rec : res.history.epochs) {
    hist += std::to_string(rec.epoch) + "," +
            deci::format_double(rec.train_loss);
    if (rec.has_val) hist += "," + deci::format_double(rec.val_accuracy);
    hist += "\n";
  }
  deci::write_text_file(out + "/history.csv", hist);

  std::vector<std::string> warnings;
  const deci::FoldMetrics train_metrics =
      deci::evaluate(res.params, d, train_idx, &warnings);
  write_metric_value_csv(out + "/metrics.csv", train_metrics);

  std::string report = "train results\n";
  report += dataset_line(d);
  report += "train subjects: " + std::to_string(train_idx.size()) +
            "  val subjects: " + std::to_string(val_idx.size()) + "\n";
  report += "epochs run: " + std::to_string(res.history.epochs.size()) +
            "  best epoch: " + std::to_string(res.history.best_epoch) + "\n";
  report +=
      "final train loss: " +
      deci::format_double(res.history.epochs.back().train_loss) + "\n";
  if (!val_idx.empty()) {
    const auto& best = res.history.epochs[static_cast<std::size_t>(
        res.history.best_epoch)];
    report += "best val accuracy: " +
              deci::format_double(best.val_accuracy) + "\n";
  }
  report += "train-set metrics:\n";
  for (const char* name : deci::kMetricNames) {
    report += std::string("  ") + name + ": " +
              deci::format_double(train_metrics.by_name(name)) + "\n";
  }
  report += warnings_block(warnings);
  deci::write_text_file(out + "/report.txt", report);
  std::cout << report;
  std::cout << "train: wrote " << out
            << "/{checkpoint,history.csv,metrics.csv,report.txt}\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string config_path;
  std::string data;
  std::string checkpoint;
  std::string out;
  std::uint64_t seed = 0;
  bool shuffle_bold = false;
};

int run_eval(const CLI::App* sub, const EvalArgs& args) {
  EvalArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys("eval", {"data", "checkpoint", "seed", "shuffle_bold"});
  fallback(sub, "--data", cfg, "data", a.data);
  fallback(sub, "--checkpoint", cfg, "checkpoint", a.checkpoint);
  fallback(sub, "--seed", cfg, "seed", a.seed);
  fallback(sub, "--shuffle-bold", cfg, "shuffle_bold", a.shuffle_bold);
  if (a.data.empty()) throw deci::ConfigError("--data is required");
  if (a.checkpoint.empty()) {
    throw deci::ConfigError("--checkpoint is required");
  }

  const std::string out = a.out.empty() ? default_out("eval") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "eval";
  snapshot["data"] = a.data;
  snapshot["checkpoint"] = a.checkpoint;
  snapshot["seed"] = a.seed;
  snapshot["shuffle_bold"] = a.shuffle_bold;
  write_snapshot(out, snapshot);

  deci::Dataset d = load_data_arg(a.data);
  if (a.shuffle_bold) d = deci::shuffle_bold_dataset(d, a.seed);
  const deci::ModelParams params = load_checkpoint_arg(a.checkpoint);
  check_checkpoint_matches(params, d);

  const std::vector<std::size_t> idx = all_indices(d);
  std::vector<std::string> warnings;
  const deci::FoldMetrics m = deci::evaluate(params, d, idx, &warnings);
  write_metric_value_csv(out + "/metrics.csv", m);

  std::string preds = "subject,label,pred";
  for (int v = 0; v < d.n_classes; ++v) {
    preds += ",score_" + std::to_string(v);
  }
  preds += '\n';
  for (const deci::SubjectSeries& subj : d.subjects) {
    const deci::RealVector logits = deci::predict_logits(subj.x, params);
    const deci::RealVector probs = deci::softmax(logits);
    std::size_t arg = 0;
    for (std::size_t v = 1; v < probs.size(); ++v) {
      if (probs[v] > probs[arg]) arg = v;
    }
    preds += sanitize_for_filename(subj.subject_id) + "," +
             std::to_string(subj.label) + "," + std::to_string(arg);
    for (double p : probs) preds += "," + deci::format_double(p);
    preds += "\n";
  }
  deci::write_text_file(out + "/predictions.csv", preds);

  std::string report = "eval results\n";
  report += dataset_line(d);
  report += "checkpoint: " + a.checkpoint + "\n";
  report += std::string("shuffle_bold: ") + (a.shuffle_bold ? "yes" : "no") +
            "\n";
  for (const char* name : deci::kMetricNames) {
    report += std::string(name) + ": " + deci::format_double(m.by_name(name)) +
              "\n";
  }
  report += warnings_block(warnings);
  deci::write_text_file(out + "/report.txt", report);
  std::cout << report;
  std::cout << "eval: wrote " << out
            << "/{metrics.csv,predictions.csv,report.txt}\n";
  return 0;
}

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

struct DecomposeArgs {
  std::string config_path;
  std::string data;
  std::string checkpoint;
  std::string subject;
  std::string out;
};

int run_decompose(const CLI::App* sub, const DecomposeArgs& args) {
  DecomposeArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys("decompose", {"data", "checkpoint", "subject"});
  fallback(sub, "--data", cfg, "data", a.data);
  fallback(sub, "--checkpoint", cfg, "checkpoint", a.checkpoint);
  fallback(sub, "--subject", cfg, "subject", a.subject);
  if (a.data.empty()) throw deci::ConfigError("--data is required");
  if (a.checkpoint.empty()) {
    throw deci::ConfigError("--checkpoint is required");
  }
  if (a.subject.empty()) throw deci::ConfigError("--subject is required");

  const std::string out = a.out.empty() ? default_out("decompose") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "decompose";
  snapshot["data"] = a.data;
  snapshot["checkpoint"] = a.checkpoint;
  snapshot["subject"] = a.subject;
  write_snapshot(out, snapshot);

  const deci::Dataset d = load_data_arg(a.data);
  const deci::ModelParams params = load_checkpoint_arg(a.checkpoint);
  check_checkpoint_matches(params, d);

  const deci::SubjectSeries* subject = nullptr;
  for (const deci::SubjectSeries& s : d.subjects) {
    if (s.subject_id == a.subject) {
      subject = &s;
      break;
    }
  }
  if (subject == nullptr) {
    throw deci::LoadError("subject '" + a.subject +
                          "' not found in dataset '" + d.name + "'");
  }

  const deci::DecompositionTrace trace = deci::decompose(subject->x, params);
  const std::size_t n_blocks = trace.n_blocks;
  const std::size_t n_channels = trace.n_channels;

  auto write_vector = [&](const std::string& name,
                          const deci::RealVector& v) {
    deci::RealMatrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m.at(i, 0) = v[i];
    deci::write_csv(out + "/" + name, m);
  };

  std::string logits = "block,roi,branch";
  for (std::size_t v = 0; v < params.config.n_classes; ++v) {
    logits += ",logit_" + std::to_string(v);
  }
  logits += '\n';
  auto logit_row = [&](std::size_t n, std::size_t c, const char* branch,
                       const deci::RealVector& values) {
    logits += std::to_string(n) + "," + std::to_string(c) + "," + branch;
    for (double lv : values) logits += "," + deci::format_double(lv);
    logits += "\n";
  };

  double max_err = 0.0;
  for (std::size_t n = 0; n < n_blocks; ++n) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      const deci::TraceEntry& e = trace.at(n, c);
      const std::string tag =
          "block" + std::to_string(n) + "_roi" + std::to_string(c);
      write_vector("drift_" + tag + ".csv", e.drift);
      write_vector("cycle_" + tag + ".csv", e.cycle);
      write_vector("residual_" + tag + ".csv", e.residual_in);
      if (!e.logits_drift.empty()) logit_row(n, c, "drift", e.logits_drift);
      if (!e.logits_cycle.empty()) logit_row(n, c, "cycle", e.logits_cycle);
      logit_row(n, c, "fused", e.logits);

      const deci::RealVector& next = n + 1 < n_blocks
                                         ? trace.at(n + 1, c).residual_in
                                         : trace.final_residual[c];
      for (std::size_t i = 0; i < e.residual_in.size(); ++i) {
        const double err =
            std::fabs(e.residual_in[i] - e.drift[i] - e.cycle[i] - next[i]);
        max_err = std::max(max_err, err);
      }
    }
  }
  for (std::size_t c = 0; c < n_channels; ++c) {
    write_vector("residual_final_roi" + std::to_string(c) + ".csv",
                 trace.final_residual[c]);
  }
  deci::write_text_file(out + "/logits.csv", logits);

  const deci::RealVector fused = deci::predict_logits(subject->x, params);
  const deci::RealVector probs = deci::softmax(fused);
  std::string pred = "subject: " + subject->subject_id + "\n";
  pred += "label: " + std::to_string(subject->label) + "\n";
  pred += "logits:";
  for (double v : fused) pred += " " + deci::format_double(v);
  pred += "\nprobabilities:";
  for (double p : probs) pred += " " + deci::format_double(p);
  std::size_t arg = 0;
  for (std::size_t v = 1; v < probs.size(); ++v) {
    if (probs[v] > probs[arg]) arg = v;
  }
  pred += "\nprediction: " + std::to_string(arg) + "\n";
  deci::write_text_file(out + "/prediction.txt", pred);

  const double tol = 1e-10;
  std::string check = "max_abs_error " + deci::format_double(max_err) + "\n";
  check += "tolerance " + deci::format_double(tol) + "\n";
  check += std::string("status ") + (max_err <= tol ? "OK" : "VIOLATED") +
           "\n";
  deci::write_text_file(out + "/reconstruction_check.txt", check);
  if (max_err > tol) {
    throw deci::NumericError(
        "decompose: reconstruction identity violated, max |error| = " +
        deci::format_double(max_err));
  }

  std::cout << "decompose: wrote " << n_blocks * n_channels
            << " block/ROI component sets to " << out
            << " (reconstruction max error " << deci::format_double(max_err)
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fc
// ---------------------------------------------------------------------------

struct FcArgs {
  std::string config_path;
  std::string data;
  std::string subject;  // empty = all subjects
  std::string out;
};

int run_fc(const CLI::App* sub, const FcArgs& args) {
  FcArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys("fc", {"data", "subject"});
  fallback(sub, "--data", cfg, "data", a.data);
  fallback(sub, "--subject", cfg, "subject", a.subject);
  if (a.data.empty()) throw deci::ConfigError("--data is required");

  const std::string out = a.out.empty() ? default_out("fc") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "fc";
  snapshot["data"] = a.data;
  snapshot["subject"] = a.subject;
  write_snapshot(out, snapshot);

  const deci::Dataset d = load_data_arg(a.data);
  std::string report = "fc results\n" + dataset_line(d);
  std::size_t written = 0;
  bool found = a.subject.empty();
  for (const deci::SubjectSeries& s : d.subjects) {
    if (!a.subject.empty() && s.subject_id != a.subject) continue;
    found = true;
    const deci::FCResult r = deci::pearson_fc(s.x);
    deci::write_csv(
        out + "/fc_" + sanitize_for_filename(s.subject_id) + ".csv", r.fc);
    ++written;
    if (!r.degenerate_cols.empty()) {
      report += "  " + s.subject_id + ": degenerate channels";
      for (std::size_t c : r.degenerate_cols) {
        report += " " + std::to_string(c);
      }
      report += "\n";
    }
  }
  if (!found) {
    throw deci::LoadError("subject '" + a.subject +
                          "' not found in dataset '" + d.name + "'");
  }
  report += "matrices written: " + std::to_string(written) + "\n";
  deci::write_text_file(out + "/report.txt", report);
  std::cout << report;
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string config_path;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::size_t runs = 5;
  std::size_t jobs = 1;
  std::vector<std::size_t> kernels;  // empty = {D, 3D/4, D/2}
  ModelTrainOpts mt;
};

int run_ablate(const CLI::App* sub, const AblateArgs& args) {
  AblateArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys(
      "ablate", {"data", "seed", "folds", "runs", "jobs", "kernels",
                 "n_blocks", "model_dim", "dropout", "epochs", "batch_size",
                 "lr", "weight_decay", "patience"});
  fallback(sub, "--data", cfg, "data", a.data);
  fallback(sub, "--seed", cfg, "seed", a.seed);
  fallback(sub, "--folds", cfg, "folds", a.folds);
  fallback(sub, "--runs", cfg, "runs", a.runs);
  fallback(sub, "--jobs", cfg, "jobs", a.jobs);
  fallback(sub, "--kernels", cfg, "kernels", a.kernels);
  fallback_model_train(sub, cfg, a.mt, false);

  if (a.data.empty()) throw deci::ConfigError("--data is required");
  if (a.kernels.empty()) {
    const std::size_t d = a.mt.model_dim;
    for (std::size_t k : {d, (3 * d) / 4, d / 2}) {
      if (k >= 1 && std::find(a.kernels.begin(), a.kernels.end(), k) ==
                        a.kernels.end()) {
        a.kernels.push_back(k);
      }
    }
  }
  deci::CvConfig cv;
  cv.k = a.folds;
  cv.runs = a.runs;
  cv.base_seed = a.seed;
  cv.jobs = a.jobs;
  cv.validate();
  const deci::ModelConfig mcfg = to_model_config(a.mt);
  const deci::TrainConfig tcfg = to_train_config(a.mt, a.seed);

  const std::string out = a.out.empty() ? default_out("ablate") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "ablate";
  snapshot["data"] = a.data;
  snapshot["seed"] = a.seed;
  snapshot["folds"] = a.folds;
  snapshot["runs"] = a.runs;
  snapshot["jobs"] = a.jobs;
  snapshot["kernels"] = a.kernels;
  snapshot_model_train(snapshot, a.mt, false);
  write_snapshot(out, snapshot);

  const deci::Dataset d = load_data_arg(a.data);
  const std::vector<deci::AblationRow> rows =
      deci::ablation_suite(d, mcfg, tcfg, cv, a.kernels);

  std::string csv = "label,metric,mean,std\n";
  std::string report = "ablation results\n" + dataset_line(d) + "\n";
  for (const deci::AblationRow& row : rows) {
    for (const char* name : deci::kMetricNames) {
      csv += row.label + "," + name + "," +
             deci::format_double(row.report.mean.by_name(name)) + "," +
             deci::format_double(row.report.stddev.by_name(name)) + "\n";
    }
    report += row.label + "\n" + deci::metrics_table(row.report);
    report += warnings_block(row.report.warnings) + "\n";
  }
  deci::write_text_file(out + "/ablation.csv", csv);
  deci::write_text_file(out + "/report.txt", report);
  std::cout << report;
  std::cout << "ablate: wrote " << out << "/{ablation.csv,report.txt}\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string config_path;
  std::vector<std::string> inputs;
  std::string out;
};

struct SummaryFile {
  std::string label;
  deci::FoldMetrics mean;
  deci::FoldMetrics stddev;
};

double parse_cell(const std::string& cell, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw deci::LoadError("summary '" + path + "': bad numeric cell '" +
                          cell + "'");
  }
}

SummaryFile read_summary(const std::string& dir) {
  const std::string path =
      (fs::path(dir) / "summary.csv").string();
  if (!fs::exists(path)) {
    throw deci::LoadError("no summary.csv under '" + dir +
                          "' (expected a cv/ablate output directory)");
  }
  SummaryFile sf;
  fs::path p(dir);
  std::string label = p.filename().string();
  if (label.empty()) label = p.parent_path().filename().string();
  sf.label = label.empty() ? dir : label;

  const std::string text = deci::read_text_file(path);
  std::size_t pos = 0;
  bool first = true;
  std::set<std::string> seen;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != "metric,mean,std") {
        throw deci::LoadError("summary '" + path + "': unexpected header '" +
                              line + "'");
      }
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw deci::LoadError("summary '" + path + "': malformed row '" + line +
                            "'");
    }
    const std::string name = line.substr(0, c1);
    const double mean = parse_cell(line.substr(c1 + 1, c2 - c1 - 1), path);
    const double sd = parse_cell(line.substr(c2 + 1), path);
    bool known = false;
    for (const char* metric : deci::kMetricNames) {
      if (name == metric) known = true;
    }
    if (!known) {
      throw deci::LoadError("summary '" + path + "': unknown metric '" + name +
                            "'");
    }
    seen.insert(name);
    auto assign = [&](deci::FoldMetrics& m, double v) {
      if (name == "accuracy") m.accuracy = v;
      if (name == "precision_macro") m.precision_macro = v;
      if (name == "recall_macro") m.recall_macro = v;
      if (name == "f1_macro") m.f1_macro = v;
      if (name == "auroc_macro") m.auroc_macro = v;
    };
    assign(sf.mean, mean);
    assign(sf.stddev, sd);
  }
  if (seen.size() != 5) {
    throw deci::LoadError("summary '" + path + "': expected all 5 metrics, " +
                          "found " + std::to_string(seen.size()));
  }
  return sf;
}

int run_report(const CLI::App* sub, const ReportArgs& args) {
  ReportArgs a = args;
  const ConfigFile cfg = ConfigFile::load(a.config_path);
  cfg.restrict_keys("report", {"inputs"});
  fallback(sub, "inputs", cfg, "inputs", a.inputs);
  if (a.inputs.empty()) {
    throw deci::ConfigError(
        "report needs at least one cv output directory (positional "
        "arguments or config key 'inputs')");
  }

  std::vector<SummaryFile> summaries;
  for (const std::string& dir : a.inputs) summaries.push_back(read_summary(dir));
  // Disambiguate duplicate directory basenames.
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (summaries[j].label == summaries[i].label) {
        summaries[i].label += "#" + std::to_string(i);
        break;
      }
    }
  }

  const std::string out = a.out.empty() ? default_out("report") : a.out;
  prepare_out_dir(out);
  json snapshot;
  snapshot["command"] = "report";
  snapshot["inputs"] = a.inputs;
  write_snapshot(out, snapshot);

  std::string csv = "metric";
  for (const SummaryFile& sf : summaries) {
    csv += "," + sf.label + "_mean," + sf.label + "_std";
  }
  csv += '\n';
  for (const char* name : deci::kMetricNames) {
    csv += name;
    for (const SummaryFile& sf : summaries) {
      csv += "," + deci::format_double(sf.mean.by_name(name)) + "," +
             deci::format_double(sf.stddev.by_name(name));
    }
    csv += '\n';
  }
  deci::write_text_file(out + "/comparison.csv", csv);

  std::size_t width = 16;
  for (const SummaryFile& sf : summaries) {
    width = std::max(width, sf.label.size() + 2);
  }
  auto pad = [&](std::string s, std::size_t w) {
    if (s.size() < w) s += std::string(w - s.size(), ' ');
    return s;
  };
  std::string table = pad("metric", 18);
  for (const SummaryFile& sf : summaries) table += pad(sf.label, width + 8);
  table += '\n';
  for (const char* name : deci::kMetricNames) {
    table += pad(name, 18);
    for (const SummaryFile& sf : summaries) {
      char cell[64];
      std::snprintf(cell, sizeof(cell), "%.4f +/- %.4f",
                    sf.mean.by_name(name), sf.stddev.by_name(name));
      table += pad(cell, width + 8);
    }
    table += '\n';
  }
  deci::write_text_file(out + "/report.txt", table);
  std::cout << table;
  std::cout << "report: wrote " << out << "/{comparison.csv,report.txt}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deci: progressive cycle/drift decomposition for multivariate "
      "time-series classification"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a synthetic dataset tree from a spec");
  synth->add_option("--config", synth_args.config_path, "JSON config file");
  synth->add_option("--spec", synth_args.spec_path, "Synth spec JSON file");
  synth->add_option("--seed", synth_args.seed, "Generator seed override");
  synth->add_option("--out", synth_args.out, "Output directory");

  CvArgs cv_args;
  CLI::App* cv = app.add_subcommand(
      "cv", "Repeated stratified k-fold cross-validation");
  cv->add_option("--config", cv_args.config_path, "JSON config file");
  cv->add_option("--data", cv_args.data, "Dataset manifest or directory");
  cv->add_option("--model", cv_args.model, "Model: deci|fc-logistic");
  cv->add_option("--seed", cv_args.seed, "Base seed");
  cv->add_option("--folds", cv_args.folds, "Folds per run");
  cv->add_option("--runs", cv_args.runs, "Repeated runs");
  cv->add_option("--jobs", cv_args.jobs, "Parallel fold workers");
  cv->add_flag("--shuffle-bold", cv_args.shuffle_bold,
               "Temporally shuffle every subject before training");
  add_model_train_flags(cv, cv_args.mt, true);
  cv->add_option("--fc-l2", cv_args.fc_l2, "FC baseline L2 strength");
  cv->add_option("--fc-lr", cv_args.fc_lr, "FC baseline learning rate");
  cv->add_option("--fc-epochs", cv_args.fc_epochs, "FC baseline epochs");
  cv->add_option("--out", cv_args.out, "Output directory");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Train one model and save a checkpoint");
  train->add_option("--config", train_args.config_path, "JSON config file");
  train->add_option("--data", train_args.data,
                    "Dataset manifest or directory");
  train->add_option("--seed", train_args.seed, "Training seed");
  train->add_option("--val-frac", train_args.val_frac,
                    "Held-out validation fraction (0 disables early stop)");
  train->add_flag("--shuffle-bold", train_args.shuffle_bold,
                  "Temporally shuffle every subject before training");
  add_model_train_flags(train, train_args.mt, true);
  train->add_option("--out", train_args.out, "Output directory");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--config", eval_args.config_path, "JSON config file");
  eval->add_option("--data", eval_args.data, "Dataset manifest or directory");
  eval->add_option("--checkpoint", eval_args.checkpoint,
                   "Checkpoint directory");
  eval->add_option("--seed", eval_args.seed, "Shuffle seed");
  eval->add_flag("--shuffle-bold", eval_args.shuffle_bold,
                 "Temporally shuffle every subject before evaluating");
  eval->add_option("--out", eval_args.out, "Output directory");

  DecomposeArgs dec_args;
  CLI::App* dec = app.add_subcommand(
      "decompose", "Export per-block drift/cycle components for one subject");
  dec->add_option("--config", dec_args.config_path, "JSON config file");
  dec->add_option("--data", dec_args.data, "Dataset manifest or directory");
  dec->add_option("--checkpoint", dec_args.checkpoint,
                  "Checkpoint directory");
  dec->add_option("--subject", dec_args.subject, "Subject id to decompose");
  dec->add_option("--out", dec_args.out, "Output directory");

  FcArgs fc_args;
  CLI::App* fc = app.add_subcommand(
      "fc", "Export Pearson functional-connectivity matrices");
  fc->add_option("--config", fc_args.config_path, "JSON config file");
  fc->add_option("--data", fc_args.data, "Dataset manifest or directory");
  fc->add_option("--subject", fc_args.subject,
                 "Only this subject (default: all)");
  fc->add_option("--out", fc_args.out, "Output directory");

  AblateArgs abl_args;
  CLI::App* abl = app.add_subcommand(
      "ablate", "Branch ablation table plus kernel-size sweep");
  abl->add_option("--config", abl_args.config_path, "JSON config file");
  abl->add_option("--data", abl_args.data, "Dataset manifest or directory");
  abl->add_option("--seed", abl_args.seed, "Base seed");
  abl->add_option("--folds", abl_args.folds, "Folds per run");
  abl->add_option("--runs", abl_args.runs, "Repeated runs");
  abl->add_option("--jobs", abl_args.jobs, "Parallel fold workers");
  abl->add_option("--kernels", abl_args.kernels,
                  "Kernel sizes to sweep (default: D, 3D/4, D/2)");
  add_model_train_flags(abl, abl_args.mt, false);
  abl->add_option("--out", abl_args.out, "Output directory");

  ReportArgs rep_args;
  CLI::App* rep = app.add_subcommand(
      "report", "Side-by-side comparison of cv output directories");
  rep->add_option("--config", rep_args.config_path, "JSON config file");
  rep->add_option("inputs", rep_args.inputs, "cv output directories");
  rep->add_option("--out", rep_args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*synth) return run_synth(synth, synth_args);
    if (*cv) return run_cv(cv, cv_args);
    if (*train) return run_train(train, train_args);
    if (*eval) return run_eval(eval, eval_args);
    if (*dec) return run_decompose(dec, dec_args);
    if (*fc) return run_fc(fc, fc_args);
    if (*abl) return run_ablate(abl, abl_args);
    if (*rep) return run_report(rep, rep_args);
    std::cerr << "deci: no command selected\n";
    return 1;
  } catch (const deci::ValidationError& e) {
    std::cerr << "deci " << command << ": error: " << e.what() << "\n";
    return 1;
  } catch (const deci::NumericError& e) {
    std::cerr << "deci " << command << ": numeric error: " << e.what() << "\n";
    return 2;
  } catch (const deci::IoError& e) {
    std::cerr << "deci " << command << ": i/o error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "deci " << command << ": i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "deci " << command << ": unexpected error: " << e.what()
              << "\n";
    return 2;
  }
}
