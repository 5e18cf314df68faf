#pragma once

// Minimal reverse-mode automatic differentiation over row-major matrices.
//
// A Tape owns every node created during one forward pass. Nodes are
// referenced by raw pointer and stay valid until the tape is destroyed or
// cleared. Each op records a closure that pushes the node's gradient into its
// inputs; Tape::backward replays the closures in reverse creation order.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ilts/common.hpp"

namespace ilts::ad {

template <class T>
using Matrix = RowMatrix<T>;

template <class T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  Matrix<T>& g() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
    return grad;
  }
  bool has_grad() const { return grad.size() != 0; }

  // grad += e, assigning on first use.
  template <class E>
  void accumulate(const E& e) {
    if (grad.size() == 0) {
      grad = e;
    } else {
      grad += e;
    }
  }
};

template <class T>
using Var = Node<T>*;

template <class T>
class Tape {
 public:
  Var<T> make(Matrix<T> value, bool requires_grad = false) {
    auto node = std::make_unique<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
  }

  Var<T> constant(Matrix<T> value) { return make(std::move(value), false); }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(Var<T> root) {
    root->g().setOnes();
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.requires_grad && n.has_grad() && n.backward) n.backward(n);
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  // Scales the query gradient produced by causal_attention. Only used by the
  // gradient checker's negative control.
  T attention_query_grad_scale = T(1);

 private:
  std::vector<std::unique_ptr<Node<T>>> nodes_;
};

namespace detail {
template <class T>
bool any_grad(std::initializer_list<Var<T>> xs) {
  for (auto* x : xs) {
    if (x && x->requires_grad) return true;
  }
  return false;
}
}  // namespace detail

template <class T>
Var<T> matmul(Tape<T>& tape, Var<T> a, Var<T> b) {
  Matrix<T> out;
  out.noalias() = a->value * b->value;
  Var<T> c = tape.make(std::move(out), detail::any_grad<T>({a, b}));
  if (c->requires_grad) {
    c->backward = [a, b](Node<T>& self) {
      if (a->requires_grad) a->g().noalias() += self.grad * b->value.transpose();
      if (b->requires_grad) b->g().noalias() += a->value.transpose() * self.grad;
    };
  }
  return c;
}

template <class T>
Var<T> add(Tape<T>& tape, Var<T> a, Var<T> b) {
  Var<T> c = tape.make(a->value + b->value, detail::any_grad<T>({a, b}));
  if (c->requires_grad) {
    c->backward = [a, b](Node<T>& self) {
      if (a->requires_grad) a->accumulate(self.grad);
      if (b->requires_grad) b->accumulate(self.grad);
    };
  }
  return c;
}

template <class T>
Var<T> scale(Tape<T>& tape, Var<T> a, T s) {
  Var<T> c = tape.make(a->value * s, a->requires_grad);
  if (c->requires_grad) {
    c->backward = [a, s](Node<T>& self) { a->accumulate(self.grad * s); };
  }
  return c;
}

// a (n x m) + broadcast row b (1 x m)
template <class T>
Var<T> add_row(Tape<T>& tape, Var<T> a, Var<T> b) {
  Matrix<T> out = a->value;
  out.rowwise() += b->value.row(0);
  Var<T> c = tape.make(std::move(out), detail::any_grad<T>({a, b}));
  if (c->requires_grad) {
    c->backward = [a, b](Node<T>& self) {
      if (a->requires_grad) a->accumulate(self.grad);
      if (b->requires_grad) b->g().row(0) += self.grad.colwise().sum();
    };
  }
  return c;
}

// a * w + broadcast row b
template <class T>
Var<T> linear(Tape<T>& tape, Var<T> a, Var<T> w, Var<T> b) {
  Matrix<T> out;
  out.noalias() = a->value * w->value;
  out.rowwise() += b->value.row(0);
  Var<T> c = tape.make(std::move(out), detail::any_grad<T>({a, w, b}));
  if (c->requires_grad) {
    c->backward = [a, w, b](Node<T>& self) {
      if (a->requires_grad) a->g().noalias() += self.grad * w->value.transpose();
      if (w->requires_grad) w->g().noalias() += a->value.transpose() * self.grad;
      if (b->requires_grad) b->g().row(0) += self.grad.colwise().sum();
    };
  }
  return c;
}

// x is (batch*seq x d); adds pos.row(t) to row b*seq + t.
template <class T>
Var<T> add_positional(Tape<T>& tape, Var<T> x, Var<T> pos, int batch, int seq) {
  Matrix<T> out = x->value;
  for (int b = 0; b < batch; ++b) out.middleRows(b * seq, seq) += pos->value.topRows(seq);
  Var<T> c = tape.make(std::move(out), detail::any_grad<T>({x, pos}));
  if (c->requires_grad) {
    c->backward = [x, pos, batch, seq](Node<T>& self) {
      if (x->requires_grad) x->accumulate(self.grad);
      if (pos->requires_grad) {
        auto& g = pos->g();
        for (int b = 0; b < batch; ++b) g.topRows(seq) += self.grad.middleRows(b * seq, seq);
      }
    };
  }
  return c;
}

template <class T>
Var<T> slice_cols(Tape<T>& tape, Var<T> x, Eigen::Index first, Eigen::Index count) {
  Var<T> c = tape.make(x->value.middleCols(first, count), x->requires_grad);
  if (c->requires_grad) {
    c->backward = [x, first, count](Node<T>& self) { x->g().middleCols(first, count) += self.grad; };
  }
  return c;
}

template <class T>
Var<T> slice_rows(Tape<T>& tape, Var<T> x, Eigen::Index first, Eigen::Index count) {
  Var<T> c = tape.make(x->value.middleRows(first, count), x->requires_grad);
  if (c->requires_grad) {
    c->backward = [x, first, count](Node<T>& self) { x->g().middleRows(first, count) += self.grad; };
  }
  return c;
}

template <class T>
Var<T> concat_cols(Tape<T>& tape, const std::vector<Var<T>>& parts) {
  Eigen::Index cols = 0;
  bool rg = false;
  for (auto* p : parts) {
    cols += p->value.cols();
    rg = rg || p->requires_grad;
  }
  Matrix<T> out(parts.front()->value.rows(), cols);
  Eigen::Index at = 0;
  for (auto* p : parts) {
    out.middleCols(at, p->value.cols()) = p->value;
    at += p->value.cols();
  }
  Var<T> c = tape.make(std::move(out), rg);
  if (rg) {
    c->backward = [parts](Node<T>& self) {
      Eigen::Index off = 0;
      for (auto* p : parts) {
        if (p->requires_grad) p->g() += self.grad.middleCols(off, p->value.cols());
        off += p->value.cols();
      }
    };
  }
  return c;
}

// Row-wise layer normalization with affine gamma/beta (1 x d).
template <class T>
Var<T> layer_norm(Tape<T>& tape, Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
  const Eigen::Index n = x->value.rows();
  const Eigen::Index d = x->value.cols();
  auto xhat = std::make_shared<Matrix<T>>(n, d);
  auto rstd = std::make_shared<Eigen::Matrix<T, Eigen::Dynamic, 1>>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x->value.row(i).array();
    const T mu = row.mean();
    const T var = (row - mu).square().mean();
    const T r = T(1) / std::sqrt(var + eps);
    (*rstd)(i) = r;
    xhat->row(i) = (row - mu) * r;
  }
  Matrix<T> out = (xhat->array().rowwise() * gamma->value.row(0).array()).rowwise() +
                  beta->value.row(0).array();
  Var<T> c = tape.make(std::move(out), detail::any_grad<T>({x, gamma, beta}));
  if (c->requires_grad) {
    c->backward = [x, gamma, beta, xhat, rstd](Node<T>& self) {
      const auto& g = self.grad;
      if (gamma->requires_grad) {
        gamma->g().row(0) += (g.array() * xhat->array()).colwise().sum().matrix();
      }
      if (beta->requires_grad) beta->g().row(0) += g.colwise().sum();
      if (x->requires_grad) {
        const auto d_cols = static_cast<T>(g.cols());
        Matrix<T> gx = g.array().rowwise() * gamma->value.row(0).array();
        auto& out = x->g();
        for (Eigen::Index i = 0; i < gx.rows(); ++i) {
          const T m1 = gx.row(i).sum() / d_cols;
          const T m2 = gx.row(i).dot(xhat->row(i)) / d_cols;
          out.row(i).array() +=
              (*rstd)(i) * (gx.row(i).array() - m1 - xhat->row(i).array() * m2);
        }
      }
    };
  }
  return c;
}

// GELU, tanh approximation.
template <class T>
Var<T> gelu(Tape<T>& tape, Var<T> x) {
  const T k = T(0.7978845608028654);  // sqrt(2/pi)
  const T a = T(0.044715);
  auto th = std::make_shared<Matrix<T>>(
      (k * (x->value.array() + a * x->value.array().cube())).tanh().matrix());
  Matrix<T> out = (T(0.5) * x->value.array() * (T(1) + th->array())).matrix();
  Var<T> c = tape.make(std::move(out), x->requires_grad);
  if (c->requires_grad) {
    c->backward = [x, th, k, a](Node<T>& self) {
      const auto xv = x->value.array();
      const auto t = th->array();
      const auto dy = T(0.5) * (T(1) + t) +
                      T(0.5) * xv * (T(1) - t.square()) * k * (T(1) + T(3) * a * xv.square());
      x->accumulate((self.grad.array() * dy).matrix());
    };
  }
  return c;
}

inline constexpr Eigen::Index kAttentionTile = 64;

namespace detail {
// q, k and v start at columns qo, ko and vo of their nodes and are d wide.
template <class T>
Var<T> attention(Tape<T>& tape, Var<T> q, Eigen::Index qo, Var<T> k, Eigen::Index ko, Var<T> v,
                 Eigen::Index vo, Eigen::Index d, int batch, int seq, int heads) {
  const Eigen::Index dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  auto probs = std::make_shared<std::vector<Matrix<T>>>(static_cast<std::size_t>(batch * heads));
  Matrix<T> out(static_cast<Eigen::Index>(batch) * seq, d);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * seq;
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index c0 = h * dh;
      Matrix<T>& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
      p.resize(seq, seq);
      // Row tiles only touch the key columns at or before their last row.
      for (Eigen::Index i0 = 0; i0 < seq; i0 += kAttentionTile) {
        const Eigen::Index rows = std::min<Eigen::Index>(kAttentionTile, seq - i0);
        const Eigen::Index cols = i0 + rows;
        auto tile = p.block(i0, 0, rows, cols);
        tile.noalias() = (inv_sqrt * q->value.block(r0 + i0, qo + c0, rows, dh)) *
                         k->value.block(r0, ko + c0, cols, dh).transpose();
        for (Eigen::Index r = 0; r < rows; ++r) {
          const Eigen::Index i = i0 + r;
          auto row = p.row(i).head(i + 1).array();
          const T mx = row.maxCoeff();
          row = (row - mx).exp();
          row *= T(1) / row.sum();
          if (i + 1 < cols) p.row(i).segment(i + 1, cols - i - 1).setZero();
        }
        out.block(r0 + i0, c0, rows, dh).noalias() = tile * v->value.block(r0, vo + c0, cols, dh);
      }
    }
  }
  Var<T> c = tape.make(std::move(out), detail::any_grad<T>({q, k, v}));
  if (c->requires_grad) {
    const T qscale = tape.attention_query_grad_scale;
    c->backward = [q, qo, k, ko, v, vo, probs, batch, seq, heads, dh, inv_sqrt, qscale](Node<T>& self) {
      Matrix<T> gp(std::min<Eigen::Index>(kAttentionTile, seq), seq);
      for (int b = 0; b < batch; ++b) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(b) * seq;
        for (int h = 0; h < heads; ++h) {
          const Eigen::Index c0 = h * dh;
          const Matrix<T>& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
          for (Eigen::Index i0 = 0; i0 < seq; i0 += kAttentionTile) {
            const Eigen::Index rows = std::min<Eigen::Index>(kAttentionTile, seq - i0);
            const Eigen::Index cols = i0 + rows;
            const auto pt = p.block(i0, 0, rows, cols);
            const auto go = self.grad.block(r0 + i0, c0, rows, dh);
            if (v->requires_grad) v->g().block(r0, vo + c0, cols, dh).noalias() += pt.transpose() * go;
            if (!q->requires_grad && !k->requires_grad) continue;
            auto gt = gp.block(0, 0, rows, cols);
            gt.noalias() = go * v->value.block(r0, vo + c0, cols, dh).transpose();
            for (Eigen::Index r = 0; r < rows; ++r) {
              const Eigen::Index i = i0 + r;
              auto pr = p.row(i).head(i + 1).array();
              auto gr = gp.row(r).head(i + 1).array();
              const T dot = (pr * gr).sum();
              gr = pr * (gr - dot) * inv_sqrt;
              if (i + 1 < cols) gp.row(r).segment(i + 1, cols - i - 1).setZero();
            }
            if (q->requires_grad) {
              q->g().block(r0 + i0, qo + c0, rows, dh).noalias() +=
                  qscale * (gt * k->value.block(r0, ko + c0, cols, dh));
            }
            if (k->requires_grad) {
              k->g().block(r0, ko + c0, cols, dh).noalias() +=
                  gt.transpose() * q->value.block(r0 + i0, qo + c0, rows, dh);
            }
          }
        }
      }
    };
  }
  return c;
}
}  // namespace detail

// Causal multi-head attention over `batch` independent sequences of length
// `seq`. q, k, v are (batch*seq x heads*d_head); head h occupies columns
// [h*d_head, (h+1)*d_head). Returns the concatenated head outputs.
template <class T>
Var<T> causal_attention(Tape<T>& tape, Var<T> q, Var<T> k, Var<T> v, int batch, int seq,
                        int heads) {
  return detail::attention(tape, q, 0, k, 0, v, 0, q->value.cols(), batch, seq, heads);
}

// Same, reading q, k, v from the column thirds of one (batch*seq x 3*d) node.
template <class T>
Var<T> causal_attention(Tape<T>& tape, Var<T> qkv, int batch, int seq, int heads) {
  const Eigen::Index d = qkv->value.cols() / 3;
  return detail::attention(tape, qkv, 0, qkv, d, qkv, 2 * d, d, batch, seq, heads);
}

// Sum of squared errors over rows where mask is set, times `weight`.
// Returns a 1x1 node. Targets and mask are constants.
template <class T>
Var<T> masked_sse(Tape<T>& tape, Var<T> pred, const Matrix<T>& target,
                  std::span<const std::uint8_t> mask, T weight = T(1)) {
  T total = 0;
  for (Eigen::Index i = 0; i < pred->value.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    total += (pred->value.row(i) - target.row(i)).squaredNorm();
  }
  Matrix<T> out(1, 1);
  out(0, 0) = total * weight;
  Var<T> c = tape.make(std::move(out), pred->requires_grad);
  if (c->requires_grad) {
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    c->backward = [pred, target, m = std::move(m), weight](Node<T>& self) {
      const T s = self.grad(0, 0) * weight * T(2);
      auto& g = pred->g();
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (m[static_cast<std::size_t>(i)]) g.row(i) += s * (pred->value.row(i) - target.row(i));
      }
    };
  }
  return c;
}

// sum_j w[idx[j]] * xs[j] for a 1 x E weight row.
template <class T>
Var<T> weighted_sum(Tape<T>& tape, const std::vector<Var<T>>& xs, Var<T> w,
                    const std::vector<int>& idx) {
  Matrix<T> out = Matrix<T>::Zero(xs.front()->value.rows(), xs.front()->value.cols());
  bool rg = w->requires_grad;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const T wj = w->value(0, idx[j]);
    if (wj != T(0)) out += wj * xs[j]->value;
    rg = rg || xs[j]->requires_grad;
  }
  Var<T> c = tape.make(std::move(out), rg);
  if (rg) {
    c->backward = [xs, w, idx](Node<T>& self) {
      for (std::size_t j = 0; j < xs.size(); ++j) {
        if (xs[j]->requires_grad) xs[j]->g() += w->value(0, idx[j]) * self.grad;
        if (w->requires_grad) {
          w->g()(0, idx[j]) += (xs[j]->value.array() * self.grad.array()).sum();
        }
      }
    };
  }
  return c;
}

// Coefficient matrix for mix(): C[r][w] = g[idx[r][w]] where idx >= 0,
// otherwise the constant fixed[r][w]. g is a 1 x E row of gate values.
template <class T>
Var<T> scatter_gates(Tape<T>& tape, Var<T> g, const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& idx,
                     const Matrix<T>& fixed) {
  Matrix<T> out = fixed;
  for (Eigen::Index r = 0; r < idx.rows(); ++r) {
    for (Eigen::Index w = 0; w < idx.cols(); ++w) {
      if (idx(r, w) >= 0) out(r, w) = g->value(0, idx(r, w));
    }
  }
  Var<T> c = tape.make(std::move(out), g->requires_grad);
  if (c->requires_grad) {
    c->backward = [g, idx](Node<T>& self) {
      auto& gg = g->g();
      for (Eigen::Index r = 0; r < idx.rows(); ++r) {
        for (Eigen::Index w = 0; w < idx.cols(); ++w) {
          if (idx(r, w) >= 0) gg(0, idx(r, w)) += self.grad(r, w);
        }
      }
    };
  }
  return c;
}

// Row r of the result is sum_w coef(r, w) * xs[w], each x flattened row-major.
// All xs share one shape; the result is (R x rows*cols).
template <class T>
Var<T> mix(Tape<T>& tape, const std::vector<Var<T>>& xs, Var<T> coef) {
  const Eigen::Index n = xs.front()->value.size();
  auto stack = std::make_shared<Matrix<T>>(static_cast<Eigen::Index>(xs.size()), n);
  bool rg = coef->requires_grad;
  for (std::size_t w = 0; w < xs.size(); ++w) {
    stack->row(static_cast<Eigen::Index>(w)) =
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(xs[w]->value.data(), n);
    rg = rg || xs[w]->requires_grad;
  }
  Matrix<T> out;
  out.noalias() = coef->value * (*stack);
  Var<T> c = tape.make(std::move(out), rg);
  if (rg) {
    c->backward = [xs, coef, stack, n](Node<T>& self) {
      if (coef->requires_grad) coef->g().noalias() += self.grad * stack->transpose();
      Matrix<T> gx;
      gx.noalias() = coef->value.transpose() * self.grad;
      for (std::size_t w = 0; w < xs.size(); ++w) {
        if (!xs[w]->requires_grad) continue;
        auto& g = xs[w]->g();
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.data(), n) += gx.row(static_cast<Eigen::Index>(w));
      }
    };
  }
  return c;
}

// Row r of y reshaped to (rows x cols), row-major.
template <class T>
Var<T> row_as_matrix(Tape<T>& tape, Var<T> y, Eigen::Index r, Eigen::Index rows, Eigen::Index cols) {
  Matrix<T> out = Eigen::Map<const Matrix<T>>(y->value.row(r).data(), rows, cols);
  Var<T> c = tape.make(std::move(out), y->requires_grad);
  if (c->requires_grad) {
    c->backward = [y, r, rows, cols](Node<T>& self) {
      auto& g = y->g();
      Eigen::Map<Matrix<T>>(g.row(r).data(), rows, cols) += self.grad;
    };
  }
  return c;
}

}  // namespace ilts::ad
