#include "deci/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "deci/csvio.hpp"
#include "deci/rng.hpp"

namespace deci {

namespace {

using nlohmann::json;

bool safe_file_stem(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.label);
  return out;
}

void Dataset::validate() const {
  if (n_classes < 2) {
    throw LoadError("dataset '" + name + "': n_classes must be at least 2");
  }
  if (subjects.empty()) {
    throw LoadError("dataset '" + name + "': no subjects");
  }
  std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
  for (const auto& s : subjects) {
    if (s.x.rows != series_len || s.x.cols != n_channels) {
      throw LoadError("dataset '" + name + "': subject '" + s.subject_id +
                      "' is " + std::to_string(s.x.rows) + "x" +
                      std::to_string(s.x.cols) + " but the manifest declares " +
                      std::to_string(series_len) + "x" +
                      std::to_string(n_channels));
    }
    if (s.label < 0 || s.label >= n_classes) {
      throw LoadError("dataset '" + name + "': subject '" + s.subject_id +
                      "' has label " + std::to_string(s.label) +
                      " outside [0, " + std::to_string(n_classes) + ")");
    }
    seen[static_cast<std::size_t>(s.label)] = true;
  }
  for (int v = 0; v < n_classes; ++v) {
    if (!seen[static_cast<std::size_t>(v)]) {
      throw LoadError("dataset '" + name + "': class " + std::to_string(v) +
                      " has no subjects");
    }
  }
}

std::vector<std::size_t> zscore_columns(RealMatrix& x) {
  if (x.rows == 0 || x.cols == 0) {
    throw DimensionError("zscore_columns: matrix is empty");
  }
  std::vector<std::size_t> degenerate;
  const double n = static_cast<double>(x.rows);
  for (std::size_t c = 0; c < x.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) mean += x.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double d = x.at(r, c) - mean;
      var += d * d;
    }
    var /= n;
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::fabs(mean))) {
      for (std::size_t r = 0; r < x.rows; ++r) x.at(r, c) = 0.0;
      degenerate.push_back(c);
      continue;
    }
    const double inv = 1.0 / sd;
    for (std::size_t r = 0; r < x.rows; ++r) {
      x.at(r, c) = (x.at(r, c) - mean) * inv;
    }
  }
  return degenerate;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
  if (fold >= test_folds.size()) {
    throw ValidationError("train_indices: fold " + std::to_string(fold) +
                          " out of range (" +
                          std::to_string(test_folds.size()) + " folds)");
  }
  std::vector<bool> in_test(n_samples, false);
  for (std::size_t i : test_folds[fold]) in_test[i] = true;
  std::vector<std::size_t> out;
  out.reserve(n_samples - test_folds[fold].size());
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (!in_test[i]) out.push_back(i);
  }
  return out;
}

FoldSplit stratified_kfold(const std::vector<int>& labels, std::size_t k,
                           std::uint64_t seed) {
  if (k < 2) {
    throw ConfigError("stratified_kfold: need at least 2 folds, got " +
                      std::to_string(k));
  }
  if (labels.size() < k) {
    throw ConfigError("stratified_kfold: " + std::to_string(k) +
                      " folds exceed " + std::to_string(labels.size()) +
                      " samples");
  }
  int max_label = 0;
  for (int v : labels) {
    if (v < 0) {
      throw ConfigError("stratified_kfold: negative label " +
                        std::to_string(v));
    }
    max_label = std::max(max_label, v);
  }
  FoldSplit split;
  split.seed = seed;
  split.n_samples = labels.size();
  split.test_folds.assign(k, {});
  Rng rng(mix_seed(seed, 0xf01d));
  std::size_t cursor = 0;
  for (int v = 0; v <= max_label; ++v) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == v) members.push_back(i);
    }
    rng.shuffle(members);
    for (std::size_t i : members) {
      split.test_folds[cursor % k].push_back(i);
      ++cursor;
    }
  }
  for (auto& fold : split.test_folds) std::sort(fold.begin(), fold.end());
  return split;
}

void SynthSpec::validate() const {
  if (n_classes < 2) {
    throw ConfigError("synth: n_classes must be at least 2");
  }
  if (n_per_class == 0) {
    throw ConfigError("synth: n_per_class must be positive");
  }
  if (series_len < 3) {
    throw ConfigError("synth: series_len must be at least 3");
  }
  if (n_channels < 2) {
    throw ConfigError("synth: n_channels must be at least 2");
  }
  if (!(noise_sd >= 0.0)) {
    throw ConfigError("synth: noise_sd must be non-negative");
  }
  const auto need = static_cast<std::size_t>(n_classes);
  auto check = [&](const char* field, const std::vector<double>& v) {
    if (v.size() != need) {
      throw ConfigError("synth: " + std::string(field) + " has " +
                        std::to_string(v.size()) + " entries but n_classes is " +
                        std::to_string(n_classes));
    }
  };
  check("drift_slopes", drift_slopes);
  check("cycle_freqs", cycle_freqs);
  check("cycle_amps", cycle_amps);
  if (!safe_file_stem(name)) {
    throw ConfigError(
        "synth: name must be non-empty and use only [A-Za-z0-9_-]");
  }
}

Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  Dataset d;
  d.name = spec.name;
  d.n_classes = spec.n_classes;
  d.series_len = spec.series_len;
  d.n_channels = spec.n_channels;
  const std::size_t t_len = spec.series_len;
  const std::size_t c_len = spec.n_channels;
  const double t_mid = static_cast<double>(t_len) / 2.0;
  for (int v = 0; v < spec.n_classes; ++v) {
    for (std::size_t j = 0; j < spec.n_per_class; ++j) {
      SubjectSeries subj;
      char idbuf[64];
      std::snprintf(idbuf, sizeof(idbuf), "class%d_subj%04zu", v, j);
      subj.subject_id = idbuf;
      subj.label = v;
      subj.x = RealMatrix(t_len, c_len);

      // Phase stream keyed by subject index only, so fc-matched classes
      // reuse identical phases subject-for-subject.
      Rng phase_rng(mix_seed(spec.seed, 1, j));
      std::vector<double> phases(c_len);
      if (spec.fc_matched) {
        for (std::size_t i = 0; i < c_len; ++i) {
          phases[i] = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
      } else {
        const double base = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < c_len; ++i) {
          phases[i] = base + 2.0 * std::numbers::pi * static_cast<double>(v) *
                                 static_cast<double>(i) /
                                 static_cast<double>(c_len);
        }
      }

      Rng noise_rng(mix_seed(
          spec.seed, 2,
          static_cast<std::uint64_t>(v) * spec.n_per_class + j));
      const double slope = spec.drift_slopes[static_cast<std::size_t>(v)];
      const double freq = spec.cycle_freqs[static_cast<std::size_t>(v)];
      const double amp = spec.cycle_amps[static_cast<std::size_t>(v)];
      for (std::size_t i = 0; i < c_len; ++i) {
        for (std::size_t t = 0; t < t_len; ++t) {
          const double tt = static_cast<double>(t);
          double value =
              slope * (tt - t_mid) / static_cast<double>(t_len) +
              amp * std::sin(2.0 * std::numbers::pi * freq * tt /
                                 static_cast<double>(t_len) +
                             phases[i]);
          if (spec.noise_sd > 0.0) {
            value += noise_rng.normal(0.0, spec.noise_sd);
          }
          subj.x.at(t, i) = value;
        }
      }
      subj.degenerate_cols = zscore_columns(subj.x);
      d.subjects.push_back(std::move(subj));
    }
  }
  d.validate();
  return d;
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw LoadError("load_dataset: cannot open '" + manifest_path + "'");
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw LoadError("load_dataset: '" + manifest_path + "' is not valid JSON: " +
                    std::string(e.what()));
  }
  Dataset d;
  bool normalized = false;
  try {
    d.name = manifest.at("name").get<std::string>();
    d.n_classes = manifest.at("n_classes").get<int>();
    d.series_len = manifest.at("series_len").get<std::size_t>();
    d.n_channels = manifest.at("n_channels").get<std::size_t>();
    normalized = manifest.value("normalized", false);
  } catch (const json::exception& e) {
    throw LoadError("load_dataset: '" + manifest_path +
                    "' manifest malformed: " + std::string(e.what()));
  }
  const auto base = std::filesystem::path(manifest_path).parent_path();
  if (!manifest.contains("subjects") || !manifest["subjects"].is_array()) {
    throw LoadError("load_dataset: '" + manifest_path +
                    "' manifest has no subjects array");
  }
  for (const json& js : manifest["subjects"]) {
    SubjectSeries subj;
    std::string file;
    try {
      subj.subject_id = js.at("id").get<std::string>();
      file = js.at("file").get<std::string>();
      subj.label = js.at("label").get<int>();
    } catch (const json::exception& e) {
      throw LoadError("load_dataset: '" + manifest_path +
                      "' subject entry malformed: " + std::string(e.what()));
    }
    const std::string path = (base / file).string();
    subj.x = read_csv(path);
    if (subj.x.rows != d.series_len || subj.x.cols != d.n_channels) {
      throw LoadError("load_dataset: '" + path + "' is " +
                      std::to_string(subj.x.rows) + "x" +
                      std::to_string(subj.x.cols) +
                      " but the manifest declares " +
                      std::to_string(d.series_len) + "x" +
                      std::to_string(d.n_channels));
    }
    if (!all_finite(subj.x.data)) {
      throw LoadError("load_dataset: '" + path + "' contains non-finite values");
    }
    if (!normalized) {
      subj.degenerate_cols = zscore_columns(subj.x);
    }
    d.subjects.push_back(std::move(subj));
  }
  d.validate();
  return d;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  dataset.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("save_dataset: cannot create directory '" + dir +
                  "': " + ec.message());
  }
  json manifest;
  manifest["name"] = dataset.name;
  manifest["n_classes"] = dataset.n_classes;
  manifest["series_len"] = dataset.series_len;
  manifest["n_channels"] = dataset.n_channels;
  manifest["normalized"] = true;
  json subjects = json::array();
  for (const auto& s : dataset.subjects) {
    if (!safe_file_stem(s.subject_id)) {
      throw ConfigError("save_dataset: subject id '" + s.subject_id +
                        "' cannot be used as a file name (allowed: "
                        "[A-Za-z0-9_-])");
    }
    const std::string file = s.subject_id + ".csv";
    write_csv(dir + "/" + file, s.x);
    subjects.push_back(
        json{{"id", s.subject_id}, {"file", file}, {"label", s.label}});
  }
  manifest["subjects"] = std::move(subjects);
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json j;
  j["n_per_class"] = spec.n_per_class;
  j["series_len"] = spec.series_len;
  j["n_channels"] = spec.n_channels;
  j["n_classes"] = spec.n_classes;
  j["drift_slopes"] = spec.drift_slopes;
  j["cycle_freqs"] = spec.cycle_freqs;
  j["cycle_amps"] = spec.cycle_amps;
  j["noise_sd"] = spec.noise_sd;
  j["fc_matched"] = spec.fc_matched;
  j["seed"] = spec.seed;
  j["name"] = spec.name;
  return j.dump(2) + "\n";
}

SynthSpec synth_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("synth spec: invalid JSON: " + std::string(e.what()));
  }
  SynthSpec spec;
  try {
    if (j.contains("n_per_class")) spec.n_per_class = j["n_per_class"];
    if (j.contains("series_len")) spec.series_len = j["series_len"];
    if (j.contains("n_channels")) spec.n_channels = j["n_channels"];
    if (j.contains("n_classes")) spec.n_classes = j["n_classes"];
    if (j.contains("drift_slopes")) {
      spec.drift_slopes = j["drift_slopes"].get<std::vector<double>>();
    }
    if (j.contains("cycle_freqs")) {
      spec.cycle_freqs = j["cycle_freqs"].get<std::vector<double>>();
    }
    if (j.contains("cycle_amps")) {
      spec.cycle_amps = j["cycle_amps"].get<std::vector<double>>();
    }
    if (j.contains("noise_sd")) spec.noise_sd = j["noise_sd"];
    if (j.contains("fc_matched")) spec.fc_matched = j["fc_matched"];
    if (j.contains("seed")) spec.seed = j["seed"];
    if (j.contains("name")) spec.name = j["name"];
  } catch (const json::exception& e) {
    throw ConfigError("synth spec: field has wrong type: " +
                      std::string(e.what()));
  }
  spec.validate();
  return spec;
}

}  // namespace deci
