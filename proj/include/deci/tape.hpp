#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deci/rng.hpp"
#include "deci/types.hpp"

namespace deci {

// Handle to a value recorded on a GradTape.
struct Var {
  std::uint32_t id = 0;
};

// Reverse-mode tape over the dense kernels the model needs. Operations
// record their inputs plus whatever forward state the adjoint needs;
// backward() replays the records newest-first and accumulates gradients
// into every node, including untouched leaves (which end up exactly zero).
//
// Spans returned by value()/grad() point into tape-owned storage and stay
// valid only until the next recording call or reset().
class GradTape {
 public:
  Var leaf(std::span<const double> values);
  Var leaf(const RealVector& v);
  Var leaf(const RealMatrix& m);
  // Leaf over external row-major storage, remembering the matrix shape so
  // affine() can validate against it.
  Var leaf_matrix(std::span<const double> values, std::size_t rows,
                  std::size_t cols);

  // out[j] = sum_i x[i] * w[i][j] + b[j], with w a matrix leaf shaped
  // (len(x), len(b)).
  Var affine(Var x, Var w, Var b);

  // Causal FIR filter. x is extended with K-1 leading zeros so the output
  // keeps the input length:
  //   out[t] = sum_k x[t + k - (K - 1)] * kernel[k]
  // The newest sample always multiplies kernel[K-1]. No bias term.
  Var conv1d_front_padded(Var x, Var kernel);

  // Normalizes x to zero mean and unit variance (biased variance, stabilized
  // by eps inside the square root), then applies the learned affine pair.
  Var layer_norm(Var x, Var gamma, Var beta, double eps);

  // Exact GELU: x * Phi(x) with the Gaussian CDF via erf.
  Var gelu(Var x);

  // Numerically safe logistic; never overflows, saturates to {0, 1}.
  Var sigmoid(Var x);

  // Inverted dropout. In train mode zeroes each element with probability p
  // and scales survivors by 1/(1-p); in eval mode it is the exact identity.
  Var dropout(Var x, double p, Mode mode, Rng& rng);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double factor);

  std::span<const double> value(Var v) const;
  std::span<const double> grad(Var v) const;
  RealVector value_vec(Var v) const { return RealVector(value(v)); }
  std::size_t len(Var v) const;

  // Accumulates d(root)/d(node) for every node, starting from the given
  // cotangent at root (same length as root's value).
  void backward(Var root, std::span<const double> seed);

  // Multi-root variant: seeds several nodes at once, then runs one sweep.
  struct SeedEntry {
    Var var;
    RealVector grad;
  };
  void backward(std::span<const SeedEntry> seeds);

  // Drops all records but keeps allocated capacity for reuse.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    leaf,
    affine,
    conv,
    layer_norm,
    gelu,
    sigmoid,
    dropout,
    add,
    sub,
    hadamard,
    scale,
  };

  struct Node {
    Op op;
    std::uint32_t a = 0, b = 0, c = 0;  // input node ids
    std::uint32_t rows = 0, cols = 0;   // shape when the leaf is a matrix
    double param = 0.0;                 // eps for layer_norm, factor for scale
    std::uint32_t val_off = 0, val_len = 0;
    std::uint32_t aux_off = 0, aux_len = 0;
  };

  Var push(Op op, std::size_t out_len, std::uint32_t a = 0, std::uint32_t b = 0,
           std::uint32_t c = 0);
  double* val_ptr(std::uint32_t id) { return values_.data() + nodes_[id].val_off; }
  const double* val_ptr(std::uint32_t id) const {
    return values_.data() + nodes_[id].val_off;
  }
  double* grad_ptr(std::uint32_t id) { return grads_.data() + nodes_[id].val_off; }
  double* aux_alloc(std::uint32_t id, std::size_t n);
  const double* aux_ptr(std::uint32_t id) const {
    return aux_.data() + nodes_[id].aux_off;
  }
  void check_id(Var v) const;
  void run_backward();

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<double> aux_;
  bool grads_ready_ = false;
};

}  // namespace deci
