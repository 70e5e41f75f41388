#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deci/rng.hpp"
#include "deci/tape.hpp"
#include "deci/types.hpp"

namespace deci {

// Which decomposition branches are active. Disabled branches contribute
// exact zeros to the decomposition and are skipped by the logit average;
// with both branches off, each block falls back to a plain affine head on
// its residual so the ablation baseline still produces logits.
enum class BranchMode { both, cycle_only, drift_only, none };

BranchMode branch_mode_from_string(const std::string& s);
std::string to_string(BranchMode m);

constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
  std::size_t n_blocks = 1;    // number of decomposition blocks
  std::size_t model_dim = 64;  // embedding width D
  std::size_t kernel_size = 0; // drift FIR taps K; 0 means "use model_dim"
  double dropout = 0.0;
  std::size_t n_classes = 2;   // V
  std::size_t series_len = 0;  // T, timepoints per channel
  std::size_t n_channels = 0;  // C, channels (ROIs)
  BranchMode branches = BranchMode::both;

  std::size_t effective_kernel() const {
    return kernel_size == 0 ? model_dim : kernel_size;
  }
  bool use_drift() const {
    return branches == BranchMode::both || branches == BranchMode::drift_only;
  }
  bool use_cycle() const {
    return branches == BranchMode::both || branches == BranchMode::cycle_only;
  }
  void validate() const;  // throws ConfigError on any bad field
};

struct DriftParams {
  RealVector kernel;   // K taps, newest sample at index K-1
  RealMatrix head_w;   // D x V
  RealVector head_b;   // V
};

struct CycleParams {
  RealMatrix w1, w2, wg, w3, w4;  // all D x D
  RealVector b1, b2, bg, b3, b4;  // all D
  RealVector ln1_gamma, ln1_beta; // first residual LayerNorm
  RealVector ln2_gamma, ln2_beta; // second residual LayerNorm
  RealMatrix head_w;              // D x V
  RealVector head_b;              // V
};

struct BlockParams {
  DriftParams drift;
  CycleParams cycle;
  RealMatrix plain_head_w;  // D x V, used only when both branches are off
  RealVector plain_head_b;  // V
};

struct ModelParams {
  ModelConfig config;
  RealMatrix embed_w;  // T x D, one shared projection for every channel
  RealVector embed_b;  // D
  std::vector<BlockParams> blocks;
};

// Visits every tensor in a fixed order with
//   fn(name, std::vector<double>& flat, rows, cols, decayable)
// where decayable is false for biases and LayerNorm affine pairs (the
// tensors weight decay must skip). Vectors report rows == size, cols == 1.
template <class ParamsT, class Fn>
void for_each_tensor(ParamsT& p, Fn&& fn) {
  auto mat = [&fn](const std::string& name, auto& m, bool decayable) {
    fn(name, m.data, m.rows, m.cols, decayable);
  };
  auto vec = [&fn](const std::string& name, auto& v, bool decayable) {
    fn(name, v.data, v.size(), std::size_t{1}, decayable);
  };
  mat("embed.w", p.embed_w, true);
  vec("embed.b", p.embed_b, false);
  for (std::size_t n = 0; n < p.blocks.size(); ++n) {
    auto& blk = p.blocks[n];
    const std::string prefix = "block" + std::to_string(n) + ".";
    vec(prefix + "drift.kernel", blk.drift.kernel, true);
    mat(prefix + "drift.head_w", blk.drift.head_w, true);
    vec(prefix + "drift.head_b", blk.drift.head_b, false);
    mat(prefix + "cycle.w1", blk.cycle.w1, true);
    vec(prefix + "cycle.b1", blk.cycle.b1, false);
    mat(prefix + "cycle.w2", blk.cycle.w2, true);
    vec(prefix + "cycle.b2", blk.cycle.b2, false);
    mat(prefix + "cycle.wg", blk.cycle.wg, true);
    vec(prefix + "cycle.bg", blk.cycle.bg, false);
    mat(prefix + "cycle.w3", blk.cycle.w3, true);
    vec(prefix + "cycle.b3", blk.cycle.b3, false);
    mat(prefix + "cycle.w4", blk.cycle.w4, true);
    vec(prefix + "cycle.b4", blk.cycle.b4, false);
    vec(prefix + "cycle.ln1_gamma", blk.cycle.ln1_gamma, false);
    vec(prefix + "cycle.ln1_beta", blk.cycle.ln1_beta, false);
    vec(prefix + "cycle.ln2_gamma", blk.cycle.ln2_gamma, false);
    vec(prefix + "cycle.ln2_beta", blk.cycle.ln2_beta, false);
    mat(prefix + "cycle.head_w", blk.cycle.head_w, true);
    vec(prefix + "cycle.head_b", blk.cycle.head_b, false);
    mat(prefix + "plain.head_w", blk.plain_head_w, true);
    vec(prefix + "plain.head_b", blk.plain_head_b, false);
  }
}

// Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)] for weights and FIR
// taps, zeros for biases, ones/zeros for LayerNorm gamma/beta. Every branch
// is always allocated regardless of the branch mode, so the parameter count
// depends only on the dimensions and unused branches keep exact-zero
// gradients.
ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// Same shapes as p, every tensor zero-filled. Used for gradient and
// optimizer-moment accumulators.
ModelParams zeros_like(const ModelParams& p);

std::size_t parameter_count(const ModelConfig& cfg);

// Per-block, per-channel record of the decomposition. Disabled branches
// store zero component vectors and empty logit vectors.
struct TraceEntry {
  RealVector residual_in;   // embedding entering the block
  RealVector drift;         // drift component removed by this block
  RealVector cycle;         // cycle component removed by this block
  RealVector logits_drift;  // drift-head logits (empty if branch off)
  RealVector logits_cycle;  // cycle-head logits (empty if branch off)
  RealVector logits;        // per-block logits entering the fusion average
};

struct DecompositionTrace {
  std::size_t n_blocks = 0;
  std::size_t n_channels = 0;
  std::vector<TraceEntry> entries;         // indexed block-major
  std::vector<RealVector> final_residual;  // per channel, after the last block

  TraceEntry& at(std::size_t block, std::size_t channel);
  const TraceEntry& at(std::size_t block, std::size_t channel) const;
};

// Tape handles for one forward pass. Bound in the same order as
// for_each_tensor so gradients can be read back tensor-by-tensor.
struct BoundParams {
  std::vector<Var> vars;
};

BoundParams bind_params(GradTape& tape, const ModelParams& params);

struct ForwardResult {
  Var y_hat;                      // fused logits, length V
  std::vector<Var> block_logits;  // per (channel, block) logits on the tape
};

// Records the full forward pass for one multivariate series (T x C) on the
// tape. Channels run through identical shared-parameter blocks; the fused
// prediction averages every per-block, per-channel logit vector.
ForwardResult model_forward(GradTape& tape, const RealMatrix& x,
                            const ModelParams& params,
                            const BoundParams& bound, Mode mode, Rng& rng,
                            DecompositionTrace* trace = nullptr);

// Reads d(loss)/d(tensor) off the tape after backward() and adds
// scale * grad into the matching tensors of `grads`.
void accumulate_grads(const GradTape& tape, const BoundParams& bound,
                      ModelParams& grads, double scale);

// Eval-mode forward pass; returns the fused logits.
RealVector predict_logits(const RealMatrix& x, const ModelParams& params);

// Eval-mode forward pass that keeps the whole decomposition.
DecompositionTrace decompose(const RealMatrix& x, const ModelParams& params);

// Checkpoints: dir/manifest.json (config + tensor table) plus
// dir/tensors.bin (raw little-endian float64, bitwise round trip).
void save_checkpoint(const ModelParams& params, const std::string& dir);
ModelParams load_checkpoint(const std::string& dir);

}  // namespace deci
