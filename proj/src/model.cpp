#include "simo/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "simo/errors.hpp"
#include "simo/rng.hpp"

namespace simo {

std::vector<std::size_t> Architecture::widths() const {
  std::vector<std::size_t> w;
  w.push_back(input_dim);
  for (std::size_t h : hidden) w.push_back(h);
  w.push_back(embedding_dim);
  return w;
}

std::vector<Tensor*> ModelParams::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    out.push_back(&dense[i].w);
    out.push_back(&dense[i].b);
    if (i < norms.size()) {
      out.push_back(&norms[i].gamma);
      out.push_back(&norms[i].beta);
    }
  }
  return out;
}

std::vector<const Tensor*> ModelParams::parameters() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    out.push_back(&dense[i].w);
    out.push_back(&dense[i].b);
    if (i < norms.size()) {
      out.push_back(&norms[i].gamma);
      out.push_back(&norms[i].beta);
    }
  }
  return out;
}

bool ModelParams::all_finite() const {
  for (const Tensor* t : parameters()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

namespace {

Tensor he_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor w({fan_in, fan_out});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

ModelParams init_model(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim == 0 || arch.embedding_dim == 0) {
    throw ConfigError("model: input and embedding dimensions must be > 0");
  }
  Rng rng(seed);
  ModelParams p;
  p.arch = arch;
  const std::vector<std::size_t> w = arch.widths();
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    DenseLayer layer;
    layer.w = he_uniform(w[i], w[i + 1], rng);
    layer.b = Tensor({w[i + 1]});
    p.dense.push_back(std::move(layer));
    if (i + 2 < w.size()) {
      LayerNormParams ln;
      ln.gamma = Tensor::full({w[i + 1]}, 1.0);
      ln.beta = Tensor({w[i + 1]});
      p.norms.push_back(std::move(ln));
    }
  }
  return p;
}

Value encode_on_tape(Tape& tape, const ModelParams& params, Value inputs,
                     std::vector<Value>* param_leaves) {
  const Tensor& x = tape.value(inputs);
  if (!x.is_matrix() || x.shape()[1] != params.arch.input_dim) {
    throw ShapeError("encode: input shape " + x.shape_str() + " does not match input_dim " +
                     std::to_string(params.arch.input_dim));
  }
  Value h = inputs;
  for (std::size_t i = 0; i < params.dense.size(); ++i) {
    const Value w = tape.leaf(params.dense[i].w);
    const Value b = tape.leaf(params.dense[i].b);
    if (param_leaves != nullptr) {
      param_leaves->push_back(w);
      param_leaves->push_back(b);
    }
    Value z = tape.add(tape.matmul(h, w), b);
    if (i + 1 < params.dense.size()) {
      const Value gamma = tape.leaf(params.norms[i].gamma);
      const Value beta = tape.leaf(params.norms[i].beta);
      if (param_leaves != nullptr) {
        param_leaves->push_back(gamma);
        param_leaves->push_back(beta);
      }
      h = tape.relu(tape.layer_norm(z, gamma, beta));
    } else {
      h = tape.sigmoid(z);
    }
  }
  return h;
}

Tensor encode(const ModelParams& params, const Tensor& inputs) {
  if (!inputs.all_finite()) throw NumericError("encode: non-finite input");
  Tape tape;
  const Value in = tape.constant(inputs);
  const Value out = encode_on_tape(tape, params, in);
  return tape.value(out);
}

std::vector<Tensor*> ProbeParams::parameters() { return {&w1, &b1, &w2, &b2}; }

ProbeParams init_probe(std::size_t embedding_dim, std::size_t hidden, std::size_t num_classes,
                       std::uint64_t seed) {
  Rng rng(seed);
  ProbeParams p;
  p.w1 = he_uniform(embedding_dim, hidden, rng);
  p.b1 = Tensor({hidden});
  p.w2 = he_uniform(hidden, num_classes, rng);
  p.b2 = Tensor({num_classes});
  return p;
}

Value probe_on_tape(Tape& tape, const ProbeParams& probe, Value embeddings,
                    std::vector<Value>* param_leaves) {
  const Tensor& e = tape.value(embeddings);
  if (!e.is_matrix() || e.shape()[1] != probe.w1.shape()[0]) {
    throw ShapeError("probe: embedding shape " + e.shape_str() +
                     " does not match probe input width " +
                     std::to_string(probe.w1.shape()[0]));
  }
  const Value w1 = tape.leaf(probe.w1);
  const Value b1 = tape.leaf(probe.b1);
  const Value w2 = tape.leaf(probe.w2);
  const Value b2 = tape.leaf(probe.b2);
  if (param_leaves != nullptr) {
    param_leaves->assign({w1, b1, w2, b2});
  }
  const Value h = tape.relu(tape.add(tape.matmul(embeddings, w1), b1));
  return tape.add(tape.matmul(h, w2), b2);
}

Tensor probe_forward(const ProbeParams& probe, const Tensor& embeddings) {
  Tape tape;
  const Value e = tape.constant(embeddings);
  const Value logits = probe_on_tape(tape, probe, e);
  return tape.value(logits);
}

namespace {

constexpr char kMagic[4] = {'S', 'I', 'M', 'O'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw DataError("checkpoint: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64_array(std::ostream& os, const Tensor& t) {
  for (double x : t.data()) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
  }
}

void read_f64_array(std::istream& is, Tensor& t) {
  for (double& x : t.data()) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw DataError("checkpoint: truncated parameter data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    x = std::bit_cast<double>(bits);
  }
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  const std::vector<std::size_t> widths = params.arch.widths();
  write_u32(os, static_cast<std::uint32_t>(widths.size()));
  for (std::size_t w : widths) write_u32(os, static_cast<std::uint32_t>(w));
  for (const Tensor* t : params.parameters()) write_f64_array(os, *t);
  if (!os) throw DataError("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t n_widths = read_u32(is);
  if (n_widths < 2) throw DataError("checkpoint: need at least input and embedding widths");
  std::vector<std::size_t> widths(n_widths);
  for (std::uint32_t i = 0; i < n_widths; ++i) widths[i] = read_u32(is);

  Architecture arch;
  arch.input_dim = widths.front();
  arch.embedding_dim = widths.back();
  arch.hidden.assign(widths.begin() + 1, widths.end() - 1);

  ModelParams p;
  p.arch = arch;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayer layer;
    layer.w = Tensor({widths[i], widths[i + 1]});
    layer.b = Tensor({widths[i + 1]});
    p.dense.push_back(std::move(layer));
    if (i + 2 < widths.size()) {
      LayerNormParams ln;
      ln.gamma = Tensor({widths[i + 1]});
      ln.beta = Tensor({widths[i + 1]});
      p.norms.push_back(std::move(ln));
    }
  }
  for (Tensor* t : p.parameters()) read_f64_array(is, *t);
  is.peek();
  if (!is.eof()) throw DataError("checkpoint: trailing bytes in " + path);
  if (!p.all_finite()) throw DataError("checkpoint: non-finite parameters in " + path);
  return p;
}

}  // namespace simo
