#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "uicws/errors.hpp"
#include "uicws/tensor.hpp"

namespace uicws {

/// Trainable tensor with its accumulated gradient.
template <class Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;

  Param() = default;
  Param(std::string n, Tensor<Real> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(Real(0)); }
};

template <class Real>
class Tape;

/// Handle to a node on a tape.
template <class Real>
struct Var {
  Tape<Real>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Real>& value() const { return tape->value(id); }
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Contiguous row range [begin, end) of a packed sequence batch.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const noexcept { return end - begin; }
};

/// Define-by-run tape. Nodes are appended in execution order; backward()
/// walks them in exact reverse order and accumulates into Param::grad.
template <class Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Var<Real> constant(Tensor<Real> value) { return push(std::move(value), false, nullptr, {}); }

  /// Leaf bound to a parameter; its gradient is added to `p.grad` on backward.
  Var<Real> param(Param<Real>& p) { return push(p.value, true, &p, {}); }

  /// Records a primitive. The node needs a gradient iff any input does.
  Var<Real> record(Tensor<Real> value, std::initializer_list<Var<Real>> inputs, BackwardFn fn) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].requires_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
  }
  Var<Real> record(Tensor<Real> value, const std::vector<Var<Real>>& inputs, BackwardFn fn) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].requires_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
  }
  /// Records a node whose gradient always matters (e.g. reads a Param directly).
  Var<Real> record_active(Tensor<Real> value, BackwardFn fn) { return push(std::move(value), true, nullptr, std::move(fn)); }

  const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor<Real>& grad(std::size_t id) {
    auto& node = nodes_[id];
    if (node.grad.empty()) node.grad = Tensor<Real>(node.value.shape());
    return node.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(Var<Real> loss) {
    if (value(loss.id).size() != 1) throw NotScalar(value(loss.id).shape());
    for (auto& n : nodes_) n.grad = Tensor<Real>();
    grad(loss.id)[0] = Real(1);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      auto& node = nodes_[id];
      if (node.grad.empty() || !node.requires_grad) continue;
      if (node.backward) node.backward(*this, id);
      if (node.param) node.param->grad.mat() += nodes_[id].grad.mat();
    }
  }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    Param<Real>* param = nullptr;
    BackwardFn backward;
  };

  Var<Real> push(Tensor<Real> value, bool needs, Param<Real>* p, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}, needs, p, std::move(fn)});
    return Var<Real>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

/// Fill value used for forbidden entries: -inf in double, -1e4 in float
/// (keeps single-precision recursions NaN-free).
template <class Real>
constexpr Real forbidden_score() {
  if constexpr (std::is_same_v<Real, double>) {
    return -std::numeric_limits<double>::infinity();
  } else {
    return Real(-1e4);
  }
}

namespace ad {

namespace detail {

inline std::size_t broadcast_dim(const char* op, std::size_t a, std::size_t b, const std::vector<std::size_t>& sa,
                                 const std::vector<std::size_t>& sb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeMismatch(op, sa, sb);
}

inline void require_rank2(const char* op, const std::vector<std::size_t>& s) {
  if (s.size() != 2) throw ShapeMismatch(std::string(op) + ": expected a matrix, got " + uicws::detail::shape_string(s));
}

/// Sums `g` (rows x cols) down to the (r, c) broadcast source shape.
template <class Real>
void reduce_into(const Tensor<Real>& g, Tensor<Real>& target, Real factor = Real(1)) {
  const std::size_t tr = target.rows(), tc = target.cols();
  const std::size_t gr = g.rows(), gc = g.cols();
  for (std::size_t i = 0; i < gr; ++i) {
    const std::size_t ti = tr == 1 ? 0 : i;
    for (std::size_t j = 0; j < gc; ++j) target(ti, tc == 1 ? 0 : j) += factor * g(i, j);
  }
}

}  // namespace detail

/// Elementwise a + b with row/column broadcasting.
template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  auto& t = *a.tape;
  const auto& va = a.value();
  const auto& vb = b.value();
  detail::require_rank2("add", va.shape());
  detail::require_rank2("add", vb.shape());
  const std::size_t r = detail::broadcast_dim("add", va.rows(), vb.rows(), va.shape(), vb.shape());
  const std::size_t c = detail::broadcast_dim("add", va.cols(), vb.cols(), va.shape(), vb.shape());
  Tensor<Real> out(r, c);
  if (va.rows() == r && va.cols() == c && vb.rows() == r && vb.cols() == c) {
    out.mat() = va.mat() + vb.mat();
  } else {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        out(i, j) = va(va.rows() == 1 ? 0 : i, va.cols() == 1 ? 0 : j) +
                    vb(vb.rows() == 1 ? 0 : i, vb.cols() == 1 ? 0 : j);
  }
  return t.record(std::move(out), {a, b}, [a = a.id, b = b.id](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    if (tp.requires_grad(a)) detail::reduce_into(g, tp.grad(a));
    if (tp.requires_grad(b)) detail::reduce_into(g, tp.grad(b));
  });
}

/// Elementwise a * b with row/column broadcasting.
template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  auto& t = *a.tape;
  const auto& va = a.value();
  const auto& vb = b.value();
  detail::require_rank2("mul", va.shape());
  detail::require_rank2("mul", vb.shape());
  const std::size_t r = detail::broadcast_dim("mul", va.rows(), vb.rows(), va.shape(), vb.shape());
  const std::size_t c = detail::broadcast_dim("mul", va.cols(), vb.cols(), va.shape(), vb.shape());
  Tensor<Real> out(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out(i, j) =
          va(va.rows() == 1 ? 0 : i, va.cols() == 1 ? 0 : j) * vb(vb.rows() == 1 ? 0 : i, vb.cols() == 1 ? 0 : j);
  return t.record(std::move(out), {a, b}, [a = a.id, b = b.id](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& va = tp.value(a);
    const auto& vb = tp.value(b);
    const auto at = [](const Tensor<Real>& x, std::size_t i, std::size_t j) {
      return x(x.rows() == 1 ? 0 : i, x.cols() == 1 ? 0 : j);
    };
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad(a);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          ga(ga.rows() == 1 ? 0 : i, ga.cols() == 1 ? 0 : j) += g(i, j) * at(vb, i, j);
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad(b);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          gb(gb.rows() == 1 ? 0 : i, gb.cols() == 1 ? 0 : j) += g(i, j) * at(va, i, j);
    }
  });
}

template <class Real>
Var<Real> scale(Var<Real> a, Real factor) {
  Tensor<Real> out = a.value();
  out.mat() *= factor;
  return a.tape->record(std::move(out), {a}, [a = a.id, factor](Tape<Real>& tp, std::size_t self) {
    tp.grad(a).mat() += factor * tp.grad(self).mat();
  });
}

/// (m x k) . (k x n)
template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  const auto& va = a.value();
  const auto& vb = b.value();
  detail::require_rank2("matmul", va.shape());
  detail::require_rank2("matmul", vb.shape());
  if (va.cols() != vb.rows()) throw ShapeMismatch("matmul", va.shape(), vb.shape());
  Tensor<Real> out(va.rows(), vb.cols());
  out.mat().noalias() = va.mat() * vb.mat();
  return a.tape->record(std::move(out), {a, b}, [a = a.id, b = b.id](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a).mat().noalias() += g.mat() * tp.value(b).mat().transpose();
    if (tp.requires_grad(b)) tp.grad(b).mat().noalias() += tp.value(a).mat().transpose() * g.mat();
  });
}

/// Rows [start, start + len) of a sequence; rows outside the sequence are zero
/// and receive no gradient.
template <class Real>
Var<Real> window_slice(Var<Real> seq, std::ptrdiff_t start, std::size_t len) {
  const auto& v = seq.value();
  detail::require_rank2("window_slice", v.shape());
  const auto n = static_cast<std::ptrdiff_t>(v.rows());
  const std::size_t d = v.cols();
  Tensor<Real> out(len, d);
  for (std::size_t r = 0; r < len; ++r) {
    const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(r);
    if (src < 0 || src >= n) continue;
    std::copy_n(v.data() + src * d, d, out.data() + r * d);
  }
  return seq.tape->record(std::move(out), {seq}, [s = seq.id, start, len](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& gs = tp.grad(s);
    const auto n = static_cast<std::ptrdiff_t>(gs.rows());
    const std::size_t d = gs.cols();
    for (std::size_t r = 0; r < len; ++r) {
      const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(r);
      if (src < 0 || src >= n) continue;
      for (std::size_t j = 0; j < d; ++j) gs(src, j) += g(r, j);
    }
  });
}

/// Sliding windows over each segment of a packed sequence: output row i is
/// [x_{i+offset}, ..., x_{i+offset+len-1}] flattened, with zeros wherever the
/// window leaves the segment containing i.
template <class Real>
Var<Real> unfold(Var<Real> seq, const std::vector<Segment>& segments, std::ptrdiff_t offset, std::size_t len) {
  const auto& v = seq.value();
  detail::require_rank2("unfold", v.shape());
  const std::size_t d = v.cols();
  Tensor<Real> out(v.rows(), len * d);
  for (const auto& s : segments) {
    if (s.end > v.rows() || s.begin > s.end) throw ShapeMismatch("unfold: segment out of range");
    for (std::size_t i = s.begin; i < s.end; ++i) {
      for (std::size_t k = 0; k < len; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i) + offset + static_cast<std::ptrdiff_t>(k);
        if (src < static_cast<std::ptrdiff_t>(s.begin) || src >= static_cast<std::ptrdiff_t>(s.end)) continue;
        std::copy_n(v.data() + src * d, d, out.data() + i * len * d + k * d);
      }
    }
  }
  return seq.tape->record(std::move(out), {seq},
                          [s = seq.id, segments, offset, len](Tape<Real>& tp, std::size_t self) {
                            const auto& g = tp.grad(self);
                            auto& gs = tp.grad(s);
                            const std::size_t d = gs.cols();
                            for (const auto& seg : segments) {
                              for (std::size_t i = seg.begin; i < seg.end; ++i) {
                                for (std::size_t k = 0; k < len; ++k) {
                                  const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i) + offset +
                                                             static_cast<std::ptrdiff_t>(k);
                                  if (src < static_cast<std::ptrdiff_t>(seg.begin) ||
                                      src >= static_cast<std::ptrdiff_t>(seg.end))
                                    continue;
                                  const Real* gi = g.data() + i * len * d + k * d;
                                  Real* go = gs.data() + src * d;
                                  for (std::size_t j = 0; j < d; ++j) go[j] += gi[j];
                                }
                              }
                            }
                          });
}

/// Concatenation along axis 0 (rows) or 1 (columns).
template <class Real>
Var<Real> concat(const std::vector<Var<Real>>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeMismatch("concat: axis must be 0 or 1");
  const auto& first = parts.front().value();
  detail::require_rank2("concat", first.shape());
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    detail::require_rank2("concat", v.shape());
    if (axis == 0) {
      if (v.cols() != first.cols()) throw ShapeMismatch("concat", first.shape(), v.shape());
      rows += v.rows();
    } else {
      if (v.rows() != first.rows()) throw ShapeMismatch("concat", first.shape(), v.shape());
      cols += v.cols();
    }
  }
  if (axis == 0) cols = first.cols();
  else rows = first.rows();
  Tensor<Real> out(rows, cols);
  std::size_t at = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    const auto& v = p.value();
    ids.push_back(p.id);
    if (axis == 0) {
      out.mat().middleRows(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(v.rows())) = v.mat();
      at += v.rows();
    } else {
      out.mat().middleCols(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(v.cols())) = v.mat();
      at += v.cols();
    }
  }
  return parts.front().tape->record(std::move(out), parts, [ids, axis](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    std::size_t at = 0;
    for (std::size_t id : ids) {
      const auto& v = tp.value(id);
      const auto extent = static_cast<Eigen::Index>(axis == 0 ? v.rows() : v.cols());
      if (tp.requires_grad(id)) {
        if (axis == 0) tp.grad(id).mat() += g.mat().middleRows(static_cast<Eigen::Index>(at), extent);
        else tp.grad(id).mat() += g.mat().middleCols(static_cast<Eigen::Index>(at), extent);
      }
      at += static_cast<std::size_t>(extent);
    }
  });
}

/// Columns [begin, begin + count).
template <class Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count) {
  const auto& v = x.value();
  detail::require_rank2("slice_cols", v.shape());
  if (begin + count > v.cols()) throw ShapeMismatch("slice_cols", v.shape(), {begin, count});
  Tensor<Real> out(v.rows(), count);
  out.mat() = v.mat().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return x.tape->record(std::move(out), {x}, [x = x.id, begin, count](Tape<Real>& tp, std::size_t self) {
    tp.grad(x).mat().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) +=
        tp.grad(self).mat();
  });
}

template <class Real>
Var<Real> relu(Var<Real> x) {
  Tensor<Real> out = x.value();
  for (auto& e : out.values()) e = e > Real(0) ? e : Real(0);
  return x.tape->record(std::move(out), {x}, [x = x.id](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& in = tp.value(x);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] > Real(0)) gx[i] += g[i];
  });
}

template <class Real>
Var<Real> tanh(Var<Real> x) {
  Tensor<Real> out = x.value();
  for (auto& e : out.values()) e = std::tanh(e);
  return x.tape->record(std::move(out), {x}, [x = x.id](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& y = tp.value(self);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (Real(1) - y[i] * y[i]);
  });
}

namespace detail {

/// Visits every 1-D lane of a matrix along `axis` as (base offset, stride, length).
template <class Fn>
void for_each_lane(std::size_t rows, std::size_t cols, int axis, Fn&& fn) {
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r, r * cols, std::size_t{1}, cols);
  } else {
    for (std::size_t c = 0; c < cols; ++c) fn(c, c, cols, rows);
  }
}

template <class Real>
Real lane_logsumexp(const Real* p, std::size_t stride, std::size_t len) {
  Real m = -std::numeric_limits<Real>::infinity();
  for (std::size_t k = 0; k < len; ++k) m = std::max(m, p[k * stride]);
  if (!std::isfinite(m)) return m;
  Real s = 0;
  for (std::size_t k = 0; k < len; ++k) s += std::exp(p[k * stride] - m);
  return m + std::log(s);
}

}  // namespace detail

/// Softmax along axis 1 (each row) or axis 0 (each column).
template <class Real>
Var<Real> softmax(Var<Real> x, int axis) {
  const auto& v = x.value();
  detail::require_rank2("softmax", v.shape());
  if (axis != 0 && axis != 1) throw ShapeMismatch("softmax: axis must be 0 or 1");
  Tensor<Real> out(v.shape());
  detail::for_each_lane(v.rows(), v.cols(), axis, [&](std::size_t, std::size_t base, std::size_t stride, std::size_t len) {
    const Real lse = detail::lane_logsumexp(v.data() + base, stride, len);
    for (std::size_t k = 0; k < len; ++k) out[base + k * stride] = std::exp(v[base + k * stride] - lse);
  });
  return x.tape->record(std::move(out), {x}, [x = x.id, axis](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& y = tp.value(self);
    auto& gx = tp.grad(x);
    detail::for_each_lane(y.rows(), y.cols(), axis, [&](std::size_t, std::size_t base, std::size_t stride, std::size_t len) {
      Real dot = 0;
      for (std::size_t k = 0; k < len; ++k) dot += g[base + k * stride] * y[base + k * stride];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = base + k * stride;
        gx[i] += y[i] * (g[i] - dot);
      }
    });
  });
}

/// Max-shifted log-sum-exp along an axis. Axis 1 gives rows x 1, axis 0 gives
/// 1 x cols. A lane of all -inf yields -inf and passes no gradient.
template <class Real>
Var<Real> logsumexp(Var<Real> x, int axis) {
  const auto& v = x.value();
  detail::require_rank2("logsumexp", v.shape());
  if (axis != 0 && axis != 1) throw ShapeMismatch("logsumexp: axis must be 0 or 1");
  Tensor<Real> out = axis == 1 ? Tensor<Real>(v.rows(), 1) : Tensor<Real>(1, v.cols());
  detail::for_each_lane(v.rows(), v.cols(), axis, [&](std::size_t lane, std::size_t base, std::size_t stride, std::size_t len) {
    out[lane] = detail::lane_logsumexp(v.data() + base, stride, len);
  });
  return x.tape->record(std::move(out), {x}, [x = x.id, axis](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& y = tp.value(self);
    const auto& in = tp.value(x);
    auto& gx = tp.grad(x);
    detail::for_each_lane(in.rows(), in.cols(), axis, [&](std::size_t lane, std::size_t base, std::size_t stride, std::size_t len) {
      if (!std::isfinite(y[lane])) return;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = base + k * stride;
        gx[i] += g[lane] * std::exp(in[i] - y[lane]);
      }
    });
  });
}

/// Inverted dropout. Identity when `train` is false or p == 0.
template <class Real, class Rng>
Var<Real> dropout(Var<Real> x, Real p, bool train, Rng& rng) {
  if (!train || p <= Real(0)) return x;
  if (p >= Real(1)) throw ShapeMismatch("dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Real factor = Real(1) / (Real(1) - p);
  std::vector<Real> mask(x.value().size());
  for (auto& m : mask) m = keep(rng) ? factor : Real(0);
  Tensor<Real> out = x.value();
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] *= mask[i];
  return x.tape->record(std::move(out), {x}, [x = x.id, mask = std::move(mask)](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

/// Gathers rows of an embedding table; the gradient is scattered straight
/// into `table.grad`.
template <class Real>
Var<Real> embedding_lookup(Tape<Real>& tape, Param<Real>& table, const std::vector<std::size_t>& ids) {
  const std::size_t d = table.value.cols();
  Tensor<Real> out(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= table.value.rows()) {
      throw ShapeMismatch("embedding_lookup: id " + std::to_string(ids[r]) + " outside table " +
                          uicws::detail::shape_string(table.value.shape()));
    }
    std::copy_n(table.value.data() + ids[r] * d, d, out.data() + r * d);
  }
  return tape.record_active(std::move(out), [p = &table, ids](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const std::size_t d = p->grad.cols();
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) p->grad(ids[r], j) += g(r, j);
  });
}

/// Replaces entries where mask != 0 with `fill`; those entries pass no gradient.
template <class Real>
Var<Real> masked_fill(Var<Real> x, const std::vector<std::uint8_t>& mask, Real fill) {
  const auto& v = x.value();
  if (mask.size() != v.size()) throw ShapeMismatch("masked_fill", v.shape(), {mask.size()});
  Tensor<Real> out = v;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i] = fill;
  return x.tape->record(std::move(out), {x}, [x = x.id, mask](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (!mask[i]) gx[i] += g[i];
  });
}

template <class Real>
Var<Real> sum(Var<Real> x) {
  Real s = 0;
  for (Real e : x.value().values()) s += e;
  return x.tape->record(Tensor<Real>::scalar(s), {x}, [x = x.id](Tape<Real>& tp, std::size_t self) {
    const Real g = tp.grad(self)[0];
    for (auto& e : tp.grad(x).values()) e += g;
  });
}

/// Selects elements by flat index into a 1 x k row.
template <class Real>
Var<Real> pick(Var<Real> x, const std::vector<std::size_t>& flat) {
  const auto& v = x.value();
  Tensor<Real> out(1, flat.size());
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (flat[k] >= v.size()) throw ShapeMismatch("pick: index " + std::to_string(flat[k]) + " out of range");
    out[k] = v[flat[k]];
  }
  return x.tape->record(std::move(out), {x}, [x = x.id, flat](Tape<Real>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& gx = tp.grad(x);
    for (std::size_t k = 0; k < flat.size(); ++k) gx[flat[k]] += g[k];
  });
}

template <class Real>
Var<Real> reshape(Var<Real> x, std::size_t rows, std::size_t cols) {
  Tensor<Real> out = x.value().reshaped({rows, cols});
  return x.tape->record(std::move(out), {x}, [x = x.id](Tape<Real>& tp, std::size_t self) {
    auto& gx = tp.grad(x);
    const auto& g = tp.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

}  // namespace ad
}  // namespace uicws
