#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deci/types.hpp"

namespace deci {

struct SubjectSeries {
  std::string subject_id;
  RealMatrix x;  // series_len rows x n_channels columns
  int label = 0;
  std::vector<std::size_t> degenerate_cols;  // zero-variance before z-scoring
};

struct Dataset {
  std::string name;
  int n_classes = 0;
  std::size_t series_len = 0;
  std::size_t n_channels = 0;
  std::vector<SubjectSeries> subjects;

  std::vector<int> labels() const;
  void validate() const;  // shape uniformity, label range, class coverage
};

// Z-scores each column in place against its own mean and population
// standard deviation. Columns whose deviation is indistinguishable from
// zero (sd <= 1e-12 * max(1, |mean|)) are set to all zeros and returned.
std::vector<std::size_t> zscore_columns(RealMatrix& x);

struct FoldSplit {
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::vector<std::vector<std::size_t>> test_folds;

  // Ascending complement of test_folds[fold].
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

// Deterministic stratified split: shuffles each class's indices with a
// stream derived from seed, then deals them round-robin across folds with a
// cursor that carries over between classes so fold sizes stay balanced.
FoldSplit stratified_kfold(const std::vector<int>& labels, std::size_t k,
                           std::uint64_t seed);

struct SynthSpec {
  std::size_t n_per_class = 60;
  std::size_t series_len = 64;
  std::size_t n_channels = 8;
  int n_classes = 2;
  std::vector<double> drift_slopes;  // per class
  std::vector<double> cycle_freqs;   // per class, cycles over the series
  std::vector<double> cycle_amps;    // per class
  double noise_sd = 0.5;
  // true: sinusoid phases are drawn per (subject index, channel) and reused
  // across classes, so class-conditional functional connectivity matches by
  // construction and only temporal structure separates the classes.
  // false: channel i of a class-v subject gets a class-dependent phase lag
  // (2*pi*v*i / n_channels) on top of a random per-subject base phase, which
  // makes connectivity itself class-informative.
  bool fc_matched = true;
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  void validate() const;
};

// Generates per-subject series
//   x[t,i] = slope_v*(t - T/2)/T + amp_v*sin(2*pi*freq_v*t/T + phi_i) + noise
// then z-scores each channel, so classes differ only through temporal
// structure (and through connectivity when fc_matched is false).
Dataset synth_generate(const SynthSpec& spec);

// Dataset on disk: a manifest.json naming per-subject header-free CSV files
// (series_len rows x n_channels columns). Loading z-scores each subject
// unless the manifest says the files are already normalized.
Dataset load_dataset(const std::string& manifest_path);
void save_dataset(const Dataset& dataset, const std::string& dir);

std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);

}  // namespace deci
