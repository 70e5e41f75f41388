#include "deci/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace deci {

namespace {

using nlohmann::json;

constexpr std::size_t kTensorsPerBlock = 21;
constexpr std::size_t kGlobalTensors = 2;  // embed.w, embed.b

// Named view of one block's bound tape handles. The offsets must match the
// per-block listing order in for_each_tensor.
struct BlockVars {
  Var kernel, drift_head_w, drift_head_b;
  Var w1, b1, w2, b2, wg, bg, w3, b3, w4, b4;
  Var ln1_g, ln1_b, ln2_g, ln2_b;
  Var cycle_head_w, cycle_head_b;
  Var plain_w, plain_b;
};

BlockVars block_vars(const BoundParams& bound, std::size_t n) {
  const std::size_t base = kGlobalTensors + n * kTensorsPerBlock;
  const auto& v = bound.vars;
  BlockVars b;
  b.kernel = v[base + 0];
  b.drift_head_w = v[base + 1];
  b.drift_head_b = v[base + 2];
  b.w1 = v[base + 3];
  b.b1 = v[base + 4];
  b.w2 = v[base + 5];
  b.b2 = v[base + 6];
  b.wg = v[base + 7];
  b.bg = v[base + 8];
  b.w3 = v[base + 9];
  b.b3 = v[base + 10];
  b.w4 = v[base + 11];
  b.b4 = v[base + 12];
  b.ln1_g = v[base + 13];
  b.ln1_b = v[base + 14];
  b.ln2_g = v[base + 15];
  b.ln2_b = v[base + 16];
  b.cycle_head_w = v[base + 17];
  b.cycle_head_b = v[base + 18];
  b.plain_w = v[base + 19];
  b.plain_b = v[base + 20];
  return b;
}

// Allocates every tensor at its configured shape: weights zero, biases zero,
// LayerNorm gamma one / beta zero.
ModelParams make_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const std::size_t t = cfg.series_len;
  const std::size_t d = cfg.model_dim;
  const std::size_t v = cfg.n_classes;
  const std::size_t k = cfg.effective_kernel();
  p.embed_w = RealMatrix(t, d);
  p.embed_b = RealVector(d);
  p.blocks.resize(cfg.n_blocks);
  for (auto& blk : p.blocks) {
    blk.drift.kernel = RealVector(k);
    blk.drift.head_w = RealMatrix(d, v);
    blk.drift.head_b = RealVector(v);
    blk.cycle.w1 = RealMatrix(d, d);
    blk.cycle.w2 = RealMatrix(d, d);
    blk.cycle.wg = RealMatrix(d, d);
    blk.cycle.w3 = RealMatrix(d, d);
    blk.cycle.w4 = RealMatrix(d, d);
    blk.cycle.b1 = RealVector(d);
    blk.cycle.b2 = RealVector(d);
    blk.cycle.bg = RealVector(d);
    blk.cycle.b3 = RealVector(d);
    blk.cycle.b4 = RealVector(d);
    blk.cycle.ln1_gamma = RealVector(d, 1.0);
    blk.cycle.ln1_beta = RealVector(d);
    blk.cycle.ln2_gamma = RealVector(d, 1.0);
    blk.cycle.ln2_beta = RealVector(d);
    blk.cycle.head_w = RealMatrix(d, v);
    blk.cycle.head_b = RealVector(v);
    blk.plain_head_w = RealMatrix(d, v);
    blk.plain_head_b = RealVector(v);
  }
  return p;
}

void write_le_doubles(std::ofstream& out, const std::vector<double>& values) {
  for (double d : values) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) {
      bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

void read_le_doubles(std::ifstream& in, std::vector<double>& values) {
  for (double& d : values) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) {
      throw LoadError("checkpoint: tensor file truncated");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    d = std::bit_cast<double>(bits);
  }
}

}  // namespace

BranchMode branch_mode_from_string(const std::string& s) {
  if (s == "both") return BranchMode::both;
  if (s == "cycle") return BranchMode::cycle_only;
  if (s == "drift") return BranchMode::drift_only;
  if (s == "none") return BranchMode::none;
  throw ConfigError("branches: expected one of both|cycle|drift|none, got '" +
                    s + "'");
}

std::string to_string(BranchMode m) {
  switch (m) {
    case BranchMode::both:
      return "both";
    case BranchMode::cycle_only:
      return "cycle";
    case BranchMode::drift_only:
      return "drift";
    case BranchMode::none:
      return "none";
  }
  throw ConfigError("branches: invalid enum value");
}

void ModelConfig::validate() const {
  if (n_blocks == 0) throw ConfigError("model: n_blocks must be at least 1");
  if (model_dim < 2) throw ConfigError("model: model_dim must be at least 2");
  if (n_classes < 2) throw ConfigError("model: n_classes must be at least 2");
  if (series_len == 0) throw ConfigError("model: series_len must be positive");
  if (n_channels == 0) throw ConfigError("model: n_channels must be positive");
  const std::size_t k = effective_kernel();
  if (k == 0 || k > model_dim) {
    throw ConfigError("model: kernel_size must be in [1, model_dim], got " +
                      std::to_string(k) + " with model_dim " +
                      std::to_string(model_dim));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("model: dropout must satisfy 0 <= p < 1, got " +
                      std::to_string(dropout));
  }
}

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  ModelParams p = make_params(cfg);
  auto randomize = [&rng](std::vector<double>& flat, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& x : flat) x = rng.uniform(-bound, bound);
  };
  randomize(p.embed_w.data, p.embed_w.rows);
  for (auto& blk : p.blocks) {
    randomize(blk.drift.kernel.data, blk.drift.kernel.size());
    randomize(blk.drift.head_w.data, blk.drift.head_w.rows);
    randomize(blk.cycle.w1.data, blk.cycle.w1.rows);
    randomize(blk.cycle.w2.data, blk.cycle.w2.rows);
    randomize(blk.cycle.wg.data, blk.cycle.wg.rows);
    randomize(blk.cycle.w3.data, blk.cycle.w3.rows);
    randomize(blk.cycle.w4.data, blk.cycle.w4.rows);
    randomize(blk.cycle.head_w.data, blk.cycle.head_w.rows);
    randomize(blk.plain_head_w.data, blk.plain_head_w.rows);
  }
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = make_params(p.config);
  for_each_tensor(z, [](const std::string&, std::vector<double>& flat,
                        std::size_t, std::size_t, bool) {
    std::fill(flat.begin(), flat.end(), 0.0);
  });
  return z;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t t = cfg.series_len;
  const std::size_t d = cfg.model_dim;
  const std::size_t v = cfg.n_classes;
  const std::size_t k = cfg.effective_kernel();
  const std::size_t head = d * v + v;
  const std::size_t per_block = k + 5 * d * d + 5 * d + 4 * d + 3 * head;
  return t * d + d + cfg.n_blocks * per_block;
}

TraceEntry& DecompositionTrace::at(std::size_t block, std::size_t channel) {
  return entries.at(block * n_channels + channel);
}

const TraceEntry& DecompositionTrace::at(std::size_t block,
                                         std::size_t channel) const {
  return entries.at(block * n_channels + channel);
}

BoundParams bind_params(GradTape& tape, const ModelParams& params) {
  BoundParams bound;
  bound.vars.reserve(kGlobalTensors + params.blocks.size() * kTensorsPerBlock);
  for_each_tensor(const_cast<ModelParams&>(params),
                  [&](const std::string&, std::vector<double>& flat,
                      std::size_t rows, std::size_t cols, bool) {
                    bound.vars.push_back(tape.leaf_matrix(
                        {flat.data(), flat.size()}, rows, cols));
                  });
  return bound;
}

ForwardResult model_forward(GradTape& tape, const RealMatrix& x,
                            const ModelParams& params,
                            const BoundParams& bound, Mode mode, Rng& rng,
                            DecompositionTrace* trace) {
  const ModelConfig& cfg = params.config;
  if (x.rows != cfg.series_len || x.cols != cfg.n_channels) {
    throw DimensionError(
        "model_forward: input is " + std::to_string(x.rows) + "x" +
        std::to_string(x.cols) + " but the model expects " +
        std::to_string(cfg.series_len) + "x" + std::to_string(cfg.n_channels));
  }
  const std::size_t expected =
      kGlobalTensors + cfg.n_blocks * kTensorsPerBlock;
  if (bound.vars.size() != expected) {
    throw DimensionError("model_forward: bound parameter list has " +
                         std::to_string(bound.vars.size()) +
                         " tensors, expected " + std::to_string(expected));
  }
  const std::size_t d = cfg.model_dim;
  const bool has_drift = cfg.use_drift();
  const bool has_cycle = cfg.use_cycle();
  if (trace) {
    trace->n_blocks = cfg.n_blocks;
    trace->n_channels = cfg.n_channels;
    trace->entries.assign(cfg.n_blocks * cfg.n_channels, TraceEntry{});
    trace->final_residual.assign(cfg.n_channels, RealVector{});
  }

  const Var embed_w = bound.vars[0];
  const Var embed_b = bound.vars[1];
  ForwardResult result;
  result.block_logits.reserve(cfg.n_channels * cfg.n_blocks);
  Var acc{};
  bool have_acc = false;
  for (std::size_t c = 0; c < cfg.n_channels; ++c) {
    const Var xc = tape.leaf(column(x, c));
    Var r = tape.affine(xc, embed_w, embed_b);
    for (std::size_t n = 0; n < cfg.n_blocks; ++n) {
      const BlockVars bv = block_vars(bound, n);
      if (trace) trace->at(n, c).residual_in = tape.value_vec(r);

      Var drift_t{};
      Var pt{};
      if (has_drift) {
        const Var conv = tape.conv1d_front_padded(r, bv.kernel);
        drift_t = tape.dropout(conv, cfg.dropout, mode, rng);
        pt = tape.affine(drift_t, bv.drift_head_w, bv.drift_head_b);
      }
      const Var l = has_drift ? tape.sub(r, drift_t) : r;

      Var s{};
      Var ps{};
      if (has_cycle) {
        const Var a1 = tape.affine(l, bv.w1, bv.b1);
        const Var d1 = tape.dropout(a1, cfg.dropout, mode, rng);
        const Var g1 = tape.gelu(d1);
        const Var a2 = tape.affine(g1, bv.w2, bv.b2);
        const Var gate = tape.sigmoid(a2);
        const Var gated = tape.hadamard(l, gate);
        const Var h = tape.affine(gated, bv.wg, bv.bg);
        const Var q1 =
            tape.layer_norm(tape.add(h, l), bv.ln1_g, bv.ln1_b, kLayerNormEps);
        const Var a3 = tape.affine(q1, bv.w3, bv.b3);
        const Var d3 = tape.dropout(a3, cfg.dropout, mode, rng);
        const Var g3 = tape.gelu(d3);
        const Var a4 = tape.affine(g3, bv.w4, bv.b4);
        s = tape.layer_norm(tape.add(a4, q1), bv.ln2_g, bv.ln2_b,
                            kLayerNormEps);
        ps = tape.affine(s, bv.cycle_head_w, bv.cycle_head_b);
      }

      Var p{};
      switch (cfg.branches) {
        case BranchMode::both:
          p = tape.scale(tape.add(pt, ps), 0.5);
          break;
        case BranchMode::drift_only:
          p = pt;
          break;
        case BranchMode::cycle_only:
          p = ps;
          break;
        case BranchMode::none:
          p = tape.affine(r, bv.plain_w, bv.plain_b);
          break;
      }

      Var r_next = r;
      if (has_drift && has_cycle) {
        r_next = tape.sub(l, s);
      } else if (has_drift) {
        r_next = l;
      } else if (has_cycle) {
        r_next = tape.sub(l, s);
      }

      if (trace) {
        TraceEntry& e = trace->at(n, c);
        e.drift = has_drift ? tape.value_vec(drift_t) : RealVector(d);
        e.cycle = has_cycle ? tape.value_vec(s) : RealVector(d);
        if (has_drift) e.logits_drift = tape.value_vec(pt);
        if (has_cycle) e.logits_cycle = tape.value_vec(ps);
        e.logits = tape.value_vec(p);
      }
      result.block_logits.push_back(p);
      acc = have_acc ? tape.add(acc, p) : p;
      have_acc = true;
      r = r_next;
    }
    if (trace) trace->final_residual[c] = tape.value_vec(r);
  }
  result.y_hat = tape.scale(
      acc, 1.0 / static_cast<double>(cfg.n_blocks * cfg.n_channels));
  return result;
}

void accumulate_grads(const GradTape& tape, const BoundParams& bound,
                      ModelParams& grads, double scale) {
  std::size_t idx = 0;
  for_each_tensor(
      grads, [&](const std::string& name, std::vector<double>& flat,
                 std::size_t, std::size_t, bool) {
        if (idx >= bound.vars.size()) {
          throw DimensionError(
              "accumulate_grads: tensor list longer than bound parameters");
        }
        const auto g = tape.grad(bound.vars[idx]);
        if (g.size() != flat.size()) {
          throw DimensionError("accumulate_grads: tensor '" + name + "' has " +
                               std::to_string(flat.size()) +
                               " elements but its gradient has " +
                               std::to_string(g.size()));
        }
        for (std::size_t i = 0; i < flat.size(); ++i) {
          flat[i] += scale * g[i];
        }
        ++idx;
      });
  if (idx != bound.vars.size()) {
    throw DimensionError(
        "accumulate_grads: bound parameter list longer than tensor list");
  }
}

RealVector predict_logits(const RealMatrix& x, const ModelParams& params) {
  GradTape tape;
  const BoundParams bound = bind_params(tape, params);
  Rng rng(0);  // eval mode draws nothing
  const ForwardResult r =
      model_forward(tape, x, params, bound, Mode::eval, rng, nullptr);
  return tape.value_vec(r.y_hat);
}

DecompositionTrace decompose(const RealMatrix& x, const ModelParams& params) {
  GradTape tape;
  const BoundParams bound = bind_params(tape, params);
  Rng rng(0);
  DecompositionTrace trace;
  model_forward(tape, x, params, bound, Mode::eval, rng, &trace);
  return trace;
}

void save_checkpoint(const ModelParams& params, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("checkpoint: cannot create directory '" + dir +
                  "': " + ec.message());
  }
  json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = {
      {"n_blocks", params.config.n_blocks},
      {"model_dim", params.config.model_dim},
      {"kernel_size", params.config.kernel_size},
      {"dropout", params.config.dropout},
      {"n_classes", params.config.n_classes},
      {"series_len", params.config.series_len},
      {"n_channels", params.config.n_channels},
      {"branches", to_string(params.config.branches)},
  };
  json tensors = json::array();
  const std::string bin_path = dir + "/tensors.bin";
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) {
    throw IoError("checkpoint: cannot open '" + bin_path + "' for writing");
  }
  std::uint64_t offset = 0;
  for_each_tensor(const_cast<ModelParams&>(params),
                  [&](const std::string& name, std::vector<double>& flat,
                      std::size_t rows, std::size_t cols, bool) {
                    tensors.push_back(json{{"name", name},
                                           {"rows", rows},
                                           {"cols", cols},
                                           {"offset", offset},
                                           {"count", flat.size()}});
                    write_le_doubles(bin, flat);
                    offset += flat.size();
                  });
  bin.flush();
  if (!bin) {
    throw IoError("checkpoint: failed writing '" + bin_path + "'");
  }
  manifest["tensors"] = std::move(tensors);
  const std::string manifest_path = dir + "/manifest.json";
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) {
    throw IoError("checkpoint: cannot open '" + manifest_path +
                  "' for writing");
  }
  mf << manifest.dump(2) << '\n';
  if (!mf.good()) {
    throw IoError("checkpoint: failed writing '" + manifest_path + "'");
  }
}

ModelParams load_checkpoint(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) {
    throw LoadError("checkpoint: cannot open '" + manifest_path + "'");
  }
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw LoadError("checkpoint: invalid manifest JSON: " +
                    std::string(e.what()));
  }
  ModelConfig cfg;
  try {
    const json& jc = manifest.at("config");
    cfg.n_blocks = jc.at("n_blocks").get<std::size_t>();
    cfg.model_dim = jc.at("model_dim").get<std::size_t>();
    cfg.kernel_size = jc.at("kernel_size").get<std::size_t>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.n_classes = jc.at("n_classes").get<std::size_t>();
    cfg.series_len = jc.at("series_len").get<std::size_t>();
    cfg.n_channels = jc.at("n_channels").get<std::size_t>();
    cfg.branches = branch_mode_from_string(jc.at("branches").get<std::string>());
  } catch (const json::exception& e) {
    throw LoadError("checkpoint: manifest config malformed: " +
                    std::string(e.what()));
  }
  ModelParams params = make_params(cfg);

  struct Entry {
    std::size_t rows = 0, cols = 0, offset = 0, count = 0;
  };
  std::map<std::string, Entry> table;
  try {
    for (const json& jt : manifest.at("tensors")) {
      Entry e;
      e.rows = jt.at("rows").get<std::size_t>();
      e.cols = jt.at("cols").get<std::size_t>();
      e.offset = jt.at("offset").get<std::size_t>();
      e.count = jt.at("count").get<std::size_t>();
      table[jt.at("name").get<std::string>()] = e;
    }
  } catch (const json::exception& e) {
    throw LoadError("checkpoint: manifest tensor table malformed: " +
                    std::string(e.what()));
  }

  const std::string bin_path = dir + "/tensors.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) {
    throw LoadError("checkpoint: cannot open '" + bin_path + "'");
  }
  for_each_tensor(params, [&](const std::string& name,
                              std::vector<double>& flat, std::size_t rows,
                              std::size_t cols, bool) {
    const auto it = table.find(name);
    if (it == table.end()) {
      throw LoadError("checkpoint: manifest is missing tensor '" + name + "'");
    }
    const Entry& e = it->second;
    if (e.rows != rows || e.cols != cols || e.count != flat.size()) {
      throw LoadError("checkpoint: tensor '" + name + "' has shape " +
                      std::to_string(e.rows) + "x" + std::to_string(e.cols) +
                      " in the manifest but the config implies " +
                      std::to_string(rows) + "x" + std::to_string(cols));
    }
    bin.seekg(static_cast<std::streamoff>(e.offset * 8));
    read_le_doubles(bin, flat);
  });
  return params;
}

}  // namespace deci
