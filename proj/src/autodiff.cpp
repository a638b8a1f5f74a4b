#include "simo/autodiff.hpp"

#include <cmath>
#include <string>

#include "simo/errors.hpp"

namespace simo {

namespace {

double stable_logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::square: return "square";
    case OpKind::dot: return "dot";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::reciprocal_eps: return "reciprocal_eps";
    case OpKind::ratio_eps: return "ratio_eps";
    case OpKind::scale: return "scale";
    case OpKind::div_by: return "div_by";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::stack_rows: return "stack_rows";
    case OpKind::pairwise_sqdist_sum: return "pairwise_sqdist_sum";
    case OpKind::pairwise_sqdot_sum: return "pairwise_sqdot_sum";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
  }
  return "?";
}

Value Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Tape::leaf(Tensor t) {
  if (!t.all_finite()) throw NumericError("leaf: non-finite input tensor");
  return push({OpKind::leaf, {}, std::move(t)});
}

Value Tape::constant(Tensor t) {
  if (!t.all_finite()) throw NumericError("constant: non-finite input tensor");
  return push({OpKind::constant, {}, std::move(t)});
}

Value Tape::add(Value a, Value b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.is_matrix() && tb.is_vector() && ta.shape()[1] == tb.shape()[0]) {
    // row broadcast (bias add)
    Tensor out(ta.shape());
    const std::size_t rows = ta.shape()[0], cols = ta.shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = ta[r * cols + c] + tb[c];
    }
    return push({OpKind::add, {a.id, b.id}, std::move(out)});
  }
  require_same_shape("add", ta, tb);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] + tb[i];
  return push({OpKind::add, {a.id, b.id}, std::move(out)});
}

Value Tape::sub(Value a, Value b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape("sub", ta, tb);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] - tb[i];
  return push({OpKind::sub, {a.id, b.id}, std::move(out)});
}

Value Tape::mul(Value a, Value b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape("mul", ta, tb);
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] * tb[i];
  return push({OpKind::mul, {a.id, b.id}, std::move(out)});
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.is_matrix() || !tb.is_matrix() || ta.shape()[1] != tb.shape()[0]) {
    throw ShapeError(std::string("matmul: shape mismatch ") + ta.shape_str() + " vs " +
                     tb.shape_str());
  }
  const std::size_t R = ta.shape()[0], K = ta.shape()[1], C = tb.shape()[1];
  Tensor out({R, C});
  // ikj: per-element accumulation order over k is ascending, same as a naive
  // ijk triple loop, but rows of b are walked contiguously.
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t k = 0; k < K; ++k) {
      const double av = ta[r * K + k];
      const double* brow = tb.data().data() + k * C;
      double* orow = out.data().data() + r * C;
      for (std::size_t c = 0; c < C; ++c) orow[c] += av * brow[c];
    }
  }
  return push({OpKind::matmul, {a.id, b.id}, std::move(out)});
}

Value Tape::sum(Value x) {
  const Tensor& tx = value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < tx.numel(); ++i) acc += tx[i];
  return push({OpKind::sum, {x.id}, Tensor::scalar(acc)});
}

Value Tape::mean(Value x) {
  const Tensor& tx = value(x);
  if (tx.is_matrix()) {
    const std::size_t R = tx.shape()[0], C = tx.shape()[1];
    Tensor out({C});
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < R; ++r) acc += tx[r * C + c];
      out[c] = acc / static_cast<double>(R);
    }
    return push({OpKind::mean, {x.id}, std::move(out)});
  }
  if (tx.is_vector()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tx.numel(); ++i) acc += tx[i];
    return push({OpKind::mean, {x.id}, Tensor::scalar(acc / static_cast<double>(tx.numel()))});
  }
  throw ShapeError(std::string("mean: expected vector or matrix, got ") + tx.shape_str());
}

Value Tape::square(Value x) {
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < tx.numel(); ++i) out[i] = tx[i] * tx[i];
  return push({OpKind::square, {x.id}, std::move(out)});
}

Value Tape::dot(Value a, Value b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.is_vector() || !tb.is_vector() || ta.numel() != tb.numel()) {
    throw ShapeError(std::string("dot: shape mismatch ") + ta.shape_str() + " vs " +
                     tb.shape_str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.numel(); ++i) acc += ta[i] * tb[i];
  return push({OpKind::dot, {a.id, b.id}, Tensor::scalar(acc)});
}

Value Tape::sigmoid(Value x) {
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < tx.numel(); ++i) out[i] = stable_logistic(tx[i]);
  return push({OpKind::sigmoid, {x.id}, std::move(out)});
}

Value Tape::relu(Value x) {
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < tx.numel(); ++i) out[i] = tx[i] > 0.0 ? tx[i] : 0.0;
  return push({OpKind::relu, {x.id}, std::move(out)});
}

Value Tape::layer_norm(Value x, Value gamma, Value beta, double eps) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  if (!(tx.is_matrix() || tx.is_vector())) {
    throw ShapeError(std::string("layer_norm: expected vector or matrix, got ") + tx.shape_str());
  }
  const std::size_t C = tx.cols();
  if (!tg.is_vector() || tg.numel() != C || !tb.is_vector() || tb.numel() != C) {
    throw ShapeError(std::string("layer_norm: scale/shift shape mismatch ") + tg.shape_str() +
                     ", " + tb.shape_str() + " for input " + tx.shape_str());
  }
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be > 0");
  const std::size_t R = tx.rows();
  Tensor out(tx.shape());
  for (std::size_t r = 0; r < R; ++r) {
    const double* xr = tx.data().data() + r * C;
    double* yr = out.data().data() + r * C;
    double mu = 0.0;
    for (std::size_t c = 0; c < C; ++c) mu += xr[c];
    mu /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double istd = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) yr[c] = tg[c] * ((xr[c] - mu) * istd) + tb[c];
  }
  Node n{OpKind::layer_norm, {x.id, gamma.id, beta.id}, std::move(out)};
  n.c0 = eps;
  return push(std::move(n));
}

Value Tape::reciprocal_eps(Value x, double eps) {
  if (eps <= 0.0) throw ConfigError("reciprocal_eps: epsilon must be > 0");
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < tx.numel(); ++i) out[i] = 1.0 / (eps + tx[i]);
  Node n{OpKind::reciprocal_eps, {x.id}, std::move(out)};
  n.c0 = eps;
  return push(std::move(n));
}

Value Tape::ratio_eps(Value num, Value den, double eps) {
  if (eps <= 0.0) throw ConfigError("ratio_eps: epsilon must be > 0");
  const Tensor& tn = value(num);
  const Tensor& td = value(den);
  require_same_shape("ratio_eps", tn, td);
  Tensor out(tn.shape());
  for (std::size_t i = 0; i < tn.numel(); ++i) out[i] = tn[i] / (eps + td[i]);
  Node n{OpKind::ratio_eps, {num.id, den.id}, std::move(out)};
  n.c0 = eps;
  return push(std::move(n));
}

Value Tape::scale(Value x, double c) {
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < tx.numel(); ++i) out[i] = c * tx[i];
  Node n{OpKind::scale, {x.id}, std::move(out)};
  n.c0 = c;
  return push(std::move(n));
}

Value Tape::div_by(Value x, double c) {
  if (c == 0.0) throw ConfigError("div_by: divisor must be nonzero");
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < tx.numel(); ++i) out[i] = tx[i] / c;
  Node n{OpKind::div_by, {x.id}, std::move(out)};
  n.c0 = c;
  return push(std::move(n));
}

Value Tape::gather_rows(Value x, std::vector<std::size_t> rows) {
  const Tensor& tx = value(x);
  if (!tx.is_matrix()) {
    throw ShapeError(std::string("gather_rows: expected matrix, got ") + tx.shape_str());
  }
  const std::size_t R = tx.shape()[0], C = tx.shape()[1];
  for (std::size_t r : rows) {
    if (r >= R) {
      throw ShapeError("gather_rows: row index " + std::to_string(r) + " out of range for " +
                       tx.shape_str());
    }
  }
  Tensor out({rows.size(), C});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = tx.data().data() + rows[i] * C;
    double* dst = out.data().data() + i * C;
    for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
  }
  Node n{OpKind::gather_rows, {x.id}, std::move(out)};
  n.rows = std::move(rows);
  return push(std::move(n));
}

Value Tape::stack_rows(const std::vector<Value>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows given");
  const std::size_t C = value(rows[0]).numel();
  for (Value v : rows) {
    const Tensor& t = value(v);
    if (!t.is_vector() || t.numel() != C) {
      throw ShapeError(std::string("stack_rows: expected vectors of length ") +
                       std::to_string(C) + ", got " + t.shape_str());
    }
  }
  Tensor out({rows.size(), C});
  Node n{OpKind::stack_rows, {}, Tensor()};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    n.inputs.push_back(rows[i].id);
    const Tensor& t = value(rows[i]);
    for (std::size_t c = 0; c < C; ++c) out[i * C + c] = t[c];
  }
  n.val = std::move(out);
  return push(std::move(n));
}

Value Tape::pairwise_sqdist_sum(Value x) {
  const Tensor& tx = value(x);
  if (!tx.is_matrix()) {
    throw ShapeError(std::string("pairwise_sqdist_sum: expected matrix, got ") + tx.shape_str());
  }
  const std::size_t m = tx.shape()[0], C = tx.shape()[1];
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double* a = tx.data().data() + i * C;
      const double* b = tx.data().data() + j * C;
      double d = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double t = a[c] - b[c];
        d += t * t;
      }
      total += d;
    }
  }
  return push({OpKind::pairwise_sqdist_sum, {x.id}, Tensor::scalar(total)});
}

Value Tape::pairwise_sqdot_sum(Value x) {
  const Tensor& tx = value(x);
  if (!tx.is_matrix()) {
    throw ShapeError(std::string("pairwise_sqdot_sum: expected matrix, got ") + tx.shape_str());
  }
  const std::size_t m = tx.shape()[0], C = tx.shape()[1];
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double* a = tx.data().data() + i * C;
      const double* b = tx.data().data() + j * C;
      double dp = 0.0;
      for (std::size_t c = 0; c < C; ++c) dp += a[c] * b[c];
      total += dp * dp;
    }
  }
  return push({OpKind::pairwise_sqdot_sum, {x.id}, Tensor::scalar(total)});
}

Value Tape::softmax_cross_entropy(Value logits, Value targets) {
  const Tensor& tx = value(logits);
  const Tensor& tt = value(targets);
  if (!tx.is_matrix()) {
    throw ShapeError(std::string("softmax_cross_entropy: expected matrix logits, got ") +
                     tx.shape_str());
  }
  require_same_shape("softmax_cross_entropy", tx, tt);
  const std::size_t R = tx.shape()[0], C = tx.shape()[1];
  double total = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const double* xr = tx.data().data() + r * C;
    const double* tr = tt.data().data() + r * C;
    double mx = xr[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
    double se = 0.0;
    for (std::size_t c = 0; c < C; ++c) se += std::exp(xr[c] - mx);
    const double lse = mx + std::log(se);
    double tsum = 0.0, tx_dot = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      tsum += tr[c];
      tx_dot += tr[c] * xr[c];
    }
    total += lse * tsum - tx_dot;
  }
  return push({OpKind::softmax_cross_entropy,
               {logits.id, targets.id},
               Tensor::scalar(total / static_cast<double>(R))});
}

Gradients Tape::backward(Value root) const {
  const Tensor& rv = value(root);
  if (rv.numel() != 1 || !rv.is_scalar()) {
    throw ShapeError(std::string("backward: root must be scalar, got ") + rv.shape_str());
  }
  std::vector<Tensor> grads;
  grads.reserve(nodes_.size());
  for (const Node& n : nodes_) grads.emplace_back(n.val.shape());
  std::vector<char> touched(nodes_.size(), 0);
  grads[root.id][0] = 1.0;
  touched[root.id] = 1;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    if (!touched[idx]) continue;
    const Node& n = nodes_[idx];
    const Tensor& g = grads[idx];
    auto grad_of = [&](std::size_t i) -> Tensor& {
      touched[n.inputs[i]] = 1;
      return grads[n.inputs[i]];
    };
    switch (n.kind) {
      case OpKind::leaf:
      case OpKind::constant:
        break;
      case OpKind::add: {
        const Tensor& ta = in(n, 0);
        const Tensor& tb = in(n, 1);
        Tensor& ga = grad_of(0);
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < ta.numel(); ++i) ga[i] += g[i];
        if (ta.same_shape(tb)) {
          for (std::size_t i = 0; i < tb.numel(); ++i) gb[i] += g[i];
        } else {  // row broadcast
          const std::size_t R = ta.shape()[0], C = ta.shape()[1];
          for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t c = 0; c < C; ++c) gb[c] += g[r * C + c];
          }
        }
        break;
      }
      case OpKind::sub: {
        Tensor& ga = grad_of(0);
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case OpKind::mul: {
        const Tensor& ta = in(n, 0);
        const Tensor& tb = in(n, 1);
        Tensor& ga = grad_of(0);
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i] * tb[i];
          gb[i] += g[i] * ta[i];
        }
        break;
      }
      case OpKind::matmul: {
        const Tensor& ta = in(n, 0);
        const Tensor& tb = in(n, 1);
        Tensor& ga = grad_of(0);
        Tensor& gb = grad_of(1);
        const std::size_t R = ta.shape()[0], K = ta.shape()[1], C = tb.shape()[1];
        for (std::size_t r = 0; r < R; ++r) {
          const double* grow = g.data().data() + r * C;
          for (std::size_t k = 0; k < K; ++k) {
            const double* brow = tb.data().data() + k * C;
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) acc += grow[c] * brow[c];
            ga[r * K + k] += acc;
          }
        }
        for (std::size_t r = 0; r < R; ++r) {
          const double* grow = g.data().data() + r * C;
          for (std::size_t k = 0; k < K; ++k) {
            const double av = ta[r * K + k];
            double* gbrow = gb.data().data() + k * C;
            for (std::size_t c = 0; c < C; ++c) gbrow[c] += av * grow[c];
          }
        }
        break;
      }
      case OpKind::sum: {
        Tensor& ga = grad_of(0);
        const double gv = g[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gv;
        break;
      }
      case OpKind::mean: {
        const Tensor& tx = in(n, 0);
        Tensor& ga = grad_of(0);
        if (tx.is_matrix()) {
          const std::size_t R = tx.shape()[0], C = tx.shape()[1];
          for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[c] / static_cast<double>(R);
          }
        } else {
          const double gv = g[0] / static_cast<double>(tx.numel());
          for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gv;
        }
        break;
      }
      case OpKind::square: {
        const Tensor& tx = in(n, 0);
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * 2.0 * tx[i];
        break;
      }
      case OpKind::dot: {
        const Tensor& ta = in(n, 0);
        const Tensor& tb = in(n, 1);
        Tensor& ga = grad_of(0);
        Tensor& gb = grad_of(1);
        const double gv = g[0];
        for (std::size_t i = 0; i < ta.numel(); ++i) {
          ga[i] += gv * tb[i];
          gb[i] += gv * ta[i];
        }
        break;
      }
      case OpKind::sigmoid: {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double s = n.val[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      }
      case OpKind::relu: {
        const Tensor& tx = in(n, 0);
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (tx[i] > 0.0) ga[i] += g[i];
        }
        break;
      }
      case OpKind::layer_norm: {
        const Tensor& tx = in(n, 0);
        const Tensor& tg = in(n, 1);
        Tensor& gx = grad_of(0);
        Tensor& ggamma = grad_of(1);
        Tensor& gbeta = grad_of(2);
        const std::size_t R = tx.rows(), C = tx.cols();
        std::vector<double> xhat(C), gxh(C);
        for (std::size_t r = 0; r < R; ++r) {
          const double* xr = tx.data().data() + r * C;
          const double* gr = g.data().data() + r * C;
          double mu = 0.0;
          for (std::size_t c = 0; c < C; ++c) mu += xr[c];
          mu /= static_cast<double>(C);
          double var = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            const double d = xr[c] - mu;
            var += d * d;
          }
          var /= static_cast<double>(C);
          const double istd = 1.0 / std::sqrt(var + n.c0);
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            xhat[c] = (xr[c] - mu) * istd;
            gxh[c] = gr[c] * tg[c];
            m1 += gxh[c];
            m2 += gxh[c] * xhat[c];
          }
          m1 /= static_cast<double>(C);
          m2 /= static_cast<double>(C);
          for (std::size_t c = 0; c < C; ++c) {
            gx[r * C + c] += istd * (gxh[c] - m1 - xhat[c] * m2);
            ggamma[c] += gr[c] * xhat[c];
            gbeta[c] += gr[c];
          }
        }
        break;
      }
      case OpKind::reciprocal_eps: {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double y = n.val[i];
          ga[i] -= g[i] * y * y;
        }
        break;
      }
      case OpKind::ratio_eps: {
        const Tensor& td = in(n, 1);
        Tensor& gnum = grad_of(0);
        Tensor& gden = grad_of(1);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double inv = 1.0 / (n.c0 + td[i]);
          gnum[i] += g[i] * inv;
          gden[i] -= g[i] * n.val[i] * inv;
        }
        break;
      }
      case OpKind::scale: {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.c0;
        break;
      }
      case OpKind::div_by: {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / n.c0;
        break;
      }
      case OpKind::gather_rows: {
        Tensor& ga = grad_of(0);
        const std::size_t C = n.val.shape()[1];
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
          const double* src = g.data().data() + i * C;
          double* dst = ga.data().data() + n.rows[i] * C;
          for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
        }
        break;
      }
      case OpKind::stack_rows: {
        const std::size_t C = n.val.shape()[1];
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          Tensor& gi = grad_of(i);
          const double* src = g.data().data() + i * C;
          for (std::size_t c = 0; c < C; ++c) gi[c] += src[c];
        }
        break;
      }
      case OpKind::pairwise_sqdist_sum: {
        const Tensor& tx = in(n, 0);
        Tensor& ga = grad_of(0);
        const std::size_t m = tx.shape()[0], C = tx.shape()[1];
        const double gv = g[0];
        std::vector<double> colsum(C, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t c = 0; c < C; ++c) colsum[c] += tx[i * C + c];
        }
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t c = 0; c < C; ++c) {
            ga[i * C + c] += gv * 2.0 * (static_cast<double>(m) * tx[i * C + c] - colsum[c]);
          }
        }
        break;
      }
      case OpKind::pairwise_sqdot_sum: {
        const Tensor& tx = in(n, 0);
        Tensor& ga = grad_of(0);
        const std::size_t m = tx.shape()[0], C = tx.shape()[1];
        const double gv = g[0];
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = i + 1; j < m; ++j) {
            const double* a = tx.data().data() + i * C;
            const double* b = tx.data().data() + j * C;
            double dp = 0.0;
            for (std::size_t c = 0; c < C; ++c) dp += a[c] * b[c];
            const double f = gv * 2.0 * dp;
            for (std::size_t c = 0; c < C; ++c) {
              ga[i * C + c] += f * b[c];
              ga[j * C + c] += f * a[c];
            }
          }
        }
        break;
      }
      case OpKind::softmax_cross_entropy: {
        const Tensor& tx = in(n, 0);
        const Tensor& tt = in(n, 1);
        Tensor& gx = grad_of(0);
        Tensor& gt = grad_of(1);
        const std::size_t R = tx.shape()[0], C = tx.shape()[1];
        const double gv = g[0] / static_cast<double>(R);
        std::vector<double> p(C);
        for (std::size_t r = 0; r < R; ++r) {
          const double* xr = tx.data().data() + r * C;
          const double* tr = tt.data().data() + r * C;
          double mx = xr[0];
          for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
          double se = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            p[c] = std::exp(xr[c] - mx);
            se += p[c];
          }
          const double lse = mx + std::log(se);
          double tsum = 0.0;
          for (std::size_t c = 0; c < C; ++c) tsum += tr[c];
          for (std::size_t c = 0; c < C; ++c) {
            gx[r * C + c] += gv * (p[c] / se * tsum - tr[c]);
            gt[r * C + c] += gv * (lse - xr[c]);
          }
        }
        break;
      }
    }
  }
  return Gradients(std::move(grads));
}

}  // namespace simo
