#include "deci/tape.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace deci {

namespace {

constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double gauss_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
double gauss_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void GradTape::check_id(Var v) const {
  if (v.id >= nodes_.size()) {
    throw ValidationError("tape: variable id " + std::to_string(v.id) +
                          " out of range (" + std::to_string(nodes_.size()) +
                          " nodes recorded)");
  }
}

Var GradTape::push(Op op, std::size_t out_len, std::uint32_t a, std::uint32_t b,
                   std::uint32_t c) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.val_off = static_cast<std::uint32_t>(values_.size());
  n.val_len = static_cast<std::uint32_t>(out_len);
  values_.resize(values_.size() + out_len, 0.0);
  nodes_.push_back(n);
  grads_ready_ = false;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

double* GradTape::aux_alloc(std::uint32_t id, std::size_t n) {
  nodes_[id].aux_off = static_cast<std::uint32_t>(aux_.size());
  nodes_[id].aux_len = static_cast<std::uint32_t>(n);
  aux_.resize(aux_.size() + n, 0.0);
  return aux_.data() + nodes_[id].aux_off;
}

Var GradTape::leaf(std::span<const double> values) {
  Var v = push(Op::leaf, values.size());
  double* out = val_ptr(v.id);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i];
  return v;
}

Var GradTape::leaf(const RealVector& v) { return leaf(v.span()); }

Var GradTape::leaf(const RealMatrix& m) {
  return leaf_matrix({m.data.data(), m.data.size()}, m.rows, m.cols);
}

Var GradTape::leaf_matrix(std::span<const double> values, std::size_t rows,
                          std::size_t cols) {
  if (rows * cols != values.size()) {
    throw DimensionError("leaf_matrix: " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " shape does not cover " +
                         std::to_string(values.size()) + " values");
  }
  Var v = leaf(values);
  nodes_[v.id].rows = static_cast<std::uint32_t>(rows);
  nodes_[v.id].cols = static_cast<std::uint32_t>(cols);
  return v;
}

Var GradTape::affine(Var x, Var w, Var b) {
  check_id(x);
  check_id(w);
  check_id(b);
  const Node& wn = nodes_[w.id];
  if (wn.rows == 0 || wn.cols == 0) {
    throw DimensionError("affine: weight operand was not recorded as a matrix");
  }
  if (len(x) != wn.rows) {
    throw DimensionError("affine: input has length " + std::to_string(len(x)) +
                         " but weight has " + std::to_string(wn.rows) +
                         " rows");
  }
  if (len(b) != wn.cols) {
    throw DimensionError("affine: bias has length " + std::to_string(len(b)) +
                         " but weight has " + std::to_string(wn.cols) +
                         " columns");
  }
  const std::size_t din = wn.rows;
  const std::size_t dout = wn.cols;
  Var out = push(Op::affine, dout, x.id, w.id, b.id);
  const double* xv = val_ptr(x.id);
  const double* wv = val_ptr(w.id);
  const double* bv = val_ptr(b.id);
  double* ov = val_ptr(out.id);
  for (std::size_t j = 0; j < dout; ++j) ov[j] = bv[j];
  for (std::size_t i = 0; i < din; ++i) {
    const double xi = xv[i];
    const double* wrow = wv + i * dout;
    for (std::size_t j = 0; j < dout; ++j) ov[j] += xi * wrow[j];
  }
  return out;
}

Var GradTape::conv1d_front_padded(Var x, Var kernel) {
  check_id(x);
  check_id(kernel);
  const std::size_t n = len(x);
  const std::size_t k = len(kernel);
  if (k == 0 || k > n) {
    throw DimensionError("conv1d_front_padded: kernel length " +
                         std::to_string(k) + " must be in [1, " +
                         std::to_string(n) + "] for input length " +
                         std::to_string(n));
  }
  Var out = push(Op::conv, n, x.id, kernel.id);
  const double* xv = val_ptr(x.id);
  const double* kv = val_ptr(kernel.id);
  double* ov = val_ptr(out.id);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t idx =
          static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(k - 1);
      if (idx >= 0) acc += xv[idx] * kv[j];
    }
    ov[t] = acc;
  }
  return out;
}

Var GradTape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  check_id(x);
  check_id(gamma);
  check_id(beta);
  const std::size_t n = len(x);
  if (n < 2) {
    throw DimensionError("layer_norm: input length must be at least 2, got " +
                         std::to_string(n));
  }
  if (len(gamma) != n || len(beta) != n) {
    throw DimensionError("layer_norm: gamma/beta lengths (" +
                         std::to_string(len(gamma)) + ", " +
                         std::to_string(len(beta)) +
                         ") must match input length " + std::to_string(n));
  }
  if (!(eps > 0.0)) {
    throw ConfigError("layer_norm: eps must be positive");
  }
  Var out = push(Op::layer_norm, n, x.id, gamma.id, beta.id);
  nodes_[out.id].param = eps;
  const double* xv = val_ptr(x.id);
  const double* gv = val_ptr(gamma.id);
  const double* bv = val_ptr(beta.id);
  double mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) mu += xv[i];
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xv[i] - mu;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  // aux layout: xhat[0..n) followed by inv.
  double* aux = aux_alloc(out.id, n + 1);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < n; ++i) {
    const double xh = (xv[i] - mu) * inv;
    aux[i] = xh;
    ov[i] = gv[i] * xh + bv[i];
  }
  aux[n] = inv;
  return out;
}

Var GradTape::gelu(Var x) {
  check_id(x);
  Var out = push(Op::gelu, len(x), x.id);
  const double* xv = val_ptr(x.id);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < len(x); ++i) ov[i] = xv[i] * gauss_cdf(xv[i]);
  return out;
}

Var GradTape::sigmoid(Var x) {
  check_id(x);
  Var out = push(Op::sigmoid, len(x), x.id);
  const double* xv = val_ptr(x.id);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < len(x); ++i) ov[i] = sigmoid_scalar(xv[i]);
  return out;
}

Var GradTape::dropout(Var x, double p, Mode mode, Rng& rng) {
  check_id(x);
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: rate must satisfy 0 <= p < 1, got " +
                      std::to_string(p));
  }
  const std::size_t n = len(x);
  Var out = push(Op::dropout, n, x.id);
  const double* xv = val_ptr(x.id);
  double* ov = val_ptr(out.id);
  if (mode == Mode::eval || p == 0.0) {
    // Exact identity; aux stays empty and backward passes gradients through.
    for (std::size_t i = 0; i < n; ++i) ov[i] = xv[i];
    return out;
  }
  const double keep_scale = 1.0 / (1.0 - p);
  double* mask = aux_alloc(out.id, n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = (rng.uniform() < p) ? 0.0 : keep_scale;
    ov[i] = xv[i] * mask[i];
  }
  return out;
}

Var GradTape::add(Var a, Var b) {
  check_id(a);
  check_id(b);
  if (len(a) != len(b)) {
    throw DimensionError("add: operand lengths differ (" +
                         std::to_string(len(a)) + " vs " +
                         std::to_string(len(b)) + ")");
  }
  Var out = push(Op::add, len(a), a.id, b.id);
  const double* av = val_ptr(a.id);
  const double* bv = val_ptr(b.id);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < len(a); ++i) ov[i] = av[i] + bv[i];
  return out;
}

Var GradTape::sub(Var a, Var b) {
  check_id(a);
  check_id(b);
  if (len(a) != len(b)) {
    throw DimensionError("sub: operand lengths differ (" +
                         std::to_string(len(a)) + " vs " +
                         std::to_string(len(b)) + ")");
  }
  Var out = push(Op::sub, len(a), a.id, b.id);
  const double* av = val_ptr(a.id);
  const double* bv = val_ptr(b.id);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < len(a); ++i) ov[i] = av[i] - bv[i];
  return out;
}

Var GradTape::hadamard(Var a, Var b) {
  check_id(a);
  check_id(b);
  if (len(a) != len(b)) {
    throw DimensionError("hadamard: operand lengths differ (" +
                         std::to_string(len(a)) + " vs " +
                         std::to_string(len(b)) + ")");
  }
  Var out = push(Op::hadamard, len(a), a.id, b.id);
  const double* av = val_ptr(a.id);
  const double* bv = val_ptr(b.id);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < len(a); ++i) ov[i] = av[i] * bv[i];
  return out;
}

Var GradTape::scale(Var a, double factor) {
  check_id(a);
  Var out = push(Op::scale, len(a), a.id);
  nodes_[out.id].param = factor;
  const double* av = val_ptr(a.id);
  double* ov = val_ptr(out.id);
  for (std::size_t i = 0; i < len(a); ++i) ov[i] = av[i] * factor;
  return out;
}

std::span<const double> GradTape::value(Var v) const {
  check_id(v);
  const Node& n = nodes_[v.id];
  return {values_.data() + n.val_off, n.val_len};
}

std::span<const double> GradTape::grad(Var v) const {
  check_id(v);
  if (!grads_ready_) {
    throw ValidationError("tape: grad() called before backward()");
  }
  const Node& n = nodes_[v.id];
  return {grads_.data() + n.val_off, n.val_len};
}

std::size_t GradTape::len(Var v) const {
  check_id(v);
  return nodes_[v.id].val_len;
}

void GradTape::backward(Var root, std::span<const double> seed) {
  check_id(root);
  if (seed.size() != len(root)) {
    throw DimensionError("backward: seed length " + std::to_string(seed.size()) +
                         " does not match root length " +
                         std::to_string(len(root)));
  }
  grads_.assign(values_.size(), 0.0);
  double* g = grads_.data() + nodes_[root.id].val_off;
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  run_backward();
}

void GradTape::backward(std::span<const SeedEntry> seeds) {
  grads_.assign(values_.size(), 0.0);
  for (const SeedEntry& s : seeds) {
    check_id(s.var);
    if (s.grad.size() != len(s.var)) {
      throw DimensionError("backward: seed length " +
                           std::to_string(s.grad.size()) +
                           " does not match node length " +
                           std::to_string(len(s.var)));
    }
    double* g = grads_.data() + nodes_[s.var.id].val_off;
    for (std::size_t i = 0; i < s.grad.size(); ++i) g[i] += s.grad[i];
  }
  run_backward();
}

void GradTape::run_backward() {
  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Node& n = nodes_[idx];
    const double* dout = grads_.data() + n.val_off;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::affine: {
        const std::size_t din = len(Var{n.a});
        const std::size_t dcols = n.val_len;
        const double* xv = val_ptr(n.a);
        const double* wv = val_ptr(n.b);
        double* dx = grad_ptr(n.a);
        double* dw = grad_ptr(n.b);
        double* db = grad_ptr(n.c);
        for (std::size_t j = 0; j < dcols; ++j) db[j] += dout[j];
        for (std::size_t i = 0; i < din; ++i) {
          const double* wrow = wv + i * dcols;
          double* dwrow = dw + i * dcols;
          const double xi = xv[i];
          double acc = 0.0;
          for (std::size_t j = 0; j < dcols; ++j) {
            acc += dout[j] * wrow[j];
            dwrow[j] += xi * dout[j];
          }
          dx[i] += acc;
        }
        break;
      }
      case Op::conv: {
        const std::size_t nlen = n.val_len;
        const std::size_t k = len(Var{n.b});
        const double* xv = val_ptr(n.a);
        const double* kv = val_ptr(n.b);
        double* dx = grad_ptr(n.a);
        double* dk = grad_ptr(n.b);
        for (std::size_t t = 0; t < nlen; ++t) {
          const double dt = dout[t];
          if (dt == 0.0) continue;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t idx2 = static_cast<std::ptrdiff_t>(t + j) -
                                        static_cast<std::ptrdiff_t>(k - 1);
            if (idx2 >= 0) {
              dx[idx2] += dt * kv[j];
              dk[j] += dt * xv[idx2];
            }
          }
        }
        break;
      }
      case Op::layer_norm: {
        const std::size_t nlen = n.val_len;
        const double* gv = val_ptr(n.b);
        const double* aux = aux_ptr(static_cast<std::uint32_t>(idx));
        const double inv = aux[nlen];
        double* dx = grad_ptr(n.a);
        double* dg = grad_ptr(n.b);
        double* db = grad_ptr(n.c);
        double mean_dxh = 0.0;
        double mean_dxh_xh = 0.0;
        for (std::size_t i = 0; i < nlen; ++i) {
          const double dxh = dout[i] * gv[i];
          mean_dxh += dxh;
          mean_dxh_xh += dxh * aux[i];
        }
        mean_dxh /= static_cast<double>(nlen);
        mean_dxh_xh /= static_cast<double>(nlen);
        for (std::size_t i = 0; i < nlen; ++i) {
          dg[i] += dout[i] * aux[i];
          db[i] += dout[i];
          const double dxh = dout[i] * gv[i];
          dx[i] += inv * (dxh - mean_dxh - aux[i] * mean_dxh_xh);
        }
        break;
      }
      case Op::gelu: {
        const double* xv = val_ptr(n.a);
        double* dx = grad_ptr(n.a);
        for (std::size_t i = 0; i < n.val_len; ++i) {
          const double x = xv[i];
          dx[i] += dout[i] * (gauss_cdf(x) + x * gauss_pdf(x));
        }
        break;
      }
      case Op::sigmoid: {
        const double* sv = values_.data() + n.val_off;
        double* dx = grad_ptr(n.a);
        for (std::size_t i = 0; i < n.val_len; ++i) {
          dx[i] += dout[i] * sv[i] * (1.0 - sv[i]);
        }
        break;
      }
      case Op::dropout: {
        double* dx = grad_ptr(n.a);
        if (n.aux_len == 0) {
          for (std::size_t i = 0; i < n.val_len; ++i) dx[i] += dout[i];
        } else {
          const double* mask = aux_ptr(static_cast<std::uint32_t>(idx));
          for (std::size_t i = 0; i < n.val_len; ++i) dx[i] += dout[i] * mask[i];
        }
        break;
      }
      case Op::add: {
        double* da = grad_ptr(n.a);
        double* db = grad_ptr(n.b);
        for (std::size_t i = 0; i < n.val_len; ++i) {
          da[i] += dout[i];
          db[i] += dout[i];
        }
        break;
      }
      case Op::sub: {
        double* da = grad_ptr(n.a);
        double* db = grad_ptr(n.b);
        for (std::size_t i = 0; i < n.val_len; ++i) {
          da[i] += dout[i];
          db[i] -= dout[i];
        }
        break;
      }
      case Op::hadamard: {
        const double* av = val_ptr(n.a);
        const double* bv = val_ptr(n.b);
        double* da = grad_ptr(n.a);
        double* db = grad_ptr(n.b);
        for (std::size_t i = 0; i < n.val_len; ++i) {
          da[i] += dout[i] * bv[i];
          db[i] += dout[i] * av[i];
        }
        break;
      }
      case Op::scale: {
        double* da = grad_ptr(n.a);
        for (std::size_t i = 0; i < n.val_len; ++i) {
          da[i] += dout[i] * n.param;
        }
        break;
      }
    }
  }
  grads_ready_ = true;
}

void GradTape::reset() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  aux_.clear();
  grads_ready_ = false;
}

}  // namespace deci
