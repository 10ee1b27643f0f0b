#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "softdice/errors.hpp"
#include "softdice/tensor.hpp"

namespace softdice {

class Var;

/// Backward rule: given the node itself and the adjoint of its output,
/// produce the adjoint contribution for each parent. Rules build their
/// results out of engine operations, so an adjoint graph is itself
/// differentiable and gradients of gradients come for free.
using VjpFn = std::function<std::vector<Var>(const Var& self, const Var& adjoint)>;

struct Node {
  Tensor value;
  std::string op;
  bool requires_grad = false;
  bool second_order_ok = true;
  std::vector<Var> parents;
  VjpFn vjp;
};

/// Value-semantic handle to a graph node. Graphs are immutable and acyclic by
/// construction: a node's parents are fixed at creation and values are
/// computed eagerly, so evaluation is deterministic given the leaves.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  const std::vector<Var>& parents() const { return node_->parents; }
  Node* get() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

/// Per-thread toggle for the NaN/Inf check applied to every op result.
inline bool& finite_checks_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

inline Var make_node(std::string op, Tensor value, std::vector<Var> parents, VjpFn vjp,
                     bool second_order_ok = true) {
  if (finite_checks_enabled() && !value.all_finite())
    throw numerical_error("numerical overflow in op '" + op + "'");
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(op);
  for (const Var& p : parents)
    if (p.requires_grad()) n->requires_grad = true;
  n->parents = std::move(parents);
  n->vjp = std::move(vjp);
  n->second_order_ok = second_order_ok;
  return Var(std::move(n));
}

/// A differentiable leaf (parameter or input).
inline Var leaf(Tensor value, bool requires_grad = true) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = requires_grad ? "leaf" : "const";
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }
inline Var constant(double v) { return leaf(Tensor::scalar(v), false); }

// ---- primitive ops -------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  return make_node("add", add(a.value(), b.value()), {a, b},
                   [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var neg(const Var& a);

inline Var sub(const Var& a, const Var& b) {
  return make_node("sub", sub(a.value(), b.value()), {a, b},
                   [](const Var&, const Var& g) { return std::vector<Var>{g, neg(g)}; });
}

inline Var mul(const Var& a, const Var& b) {
  return make_node("mul", mul(a.value(), b.value()), {a, b}, [](const Var& self, const Var& g) {
    return std::vector<Var>{mul(g, self.parents()[1]), mul(g, self.parents()[0])};
  });
}

inline Var neg(const Var& a) {
  return make_node("neg", neg(a.value()), {a},
                   [](const Var&, const Var& g) { return std::vector<Var>{neg(g)}; });
}

inline Var scale(const Var& a, double c) {
  return make_node("scale", scale(a.value(), c), {a},
                   [c](const Var&, const Var& g) { return std::vector<Var>{scale(g, c)}; });
}

inline Var add_constant(const Var& a, double c) {
  return make_node("add_constant", add_scalar(a.value(), c), {a},
                   [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

Var transpose(const Var& a);

inline Var matmul(const Var& a, const Var& b) {
  return make_node("matmul", matmul(a.value(), b.value()), {a, b},
                   [](const Var& self, const Var& g) {
                     const Var& a = self.parents()[0];
                     const Var& b = self.parents()[1];
                     return std::vector<Var>{matmul(g, transpose(b)), matmul(transpose(a), g)};
                   });
}

inline Var transpose(const Var& a) {
  return make_node("transpose", transpose(a.value()), {a},
                   [](const Var&, const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var square(const Var& a);

inline Var tanh(const Var& a) {
  return make_node("tanh", tanh(a.value()), {a}, [](const Var& self, const Var& g) {
    // d tanh = 1 - tanh^2, reusing the forward result
    return std::vector<Var>{mul(g, add_constant(neg(square(self)), 1.0))};
  });
}

inline Var exp(const Var& a) {
  return make_node("exp", exp(a.value()), {a}, [](const Var& self, const Var& g) {
    return std::vector<Var>{mul(g, self)};
  });
}

inline Var square(const Var& a) {
  return make_node("square", square(a.value()), {a}, [](const Var& self, const Var& g) {
    return std::vector<Var>{scale(mul(g, self.parents()[0]), 2.0)};
  });
}

inline Var reciprocal(const Var& a) {
  return make_node("reciprocal", reciprocal(a.value()), {a}, [](const Var& self, const Var& g) {
    return std::vector<Var>{neg(mul(g, square(self)))};
  });
}

inline Var sqrt(const Var& a) {
  return make_node("sqrt", sqrt(a.value()), {a}, [](const Var& self, const Var& g) {
    return std::vector<Var>{scale(mul(g, reciprocal(self)), 0.5)};
  });
}

inline Var clamp(const Var& a, double lo, double hi) {
  return make_node("clamp", clamp(a.value(), lo, hi), {a},
                   [lo, hi](const Var& self, const Var& g) {
                     // gradient passes only inside [lo, hi]; the mask is constant
                     Var mask = constant(clamp_mask(self.parents()[0].value(), lo, hi));
                     return std::vector<Var>{mul(g, mask)};
                   });
}

namespace detail {
/// log on inputs already guaranteed >= some positive floor.
inline Var log_positive(const Var& a) {
  return make_node("log", log(a.value()), {a}, [](const Var& self, const Var& g) {
    return std::vector<Var>{mul(g, reciprocal(self.parents()[0]))};
  });
}
}  // namespace detail

/// Natural log with the input clamped below at 1e-12, so log-densities and
/// log-of-mean-exp terms cannot produce -Inf.
inline Var log(const Var& a) {
  constexpr double kLogFloor = 1e-12;
  return detail::log_positive(clamp(a, kLogFloor, std::numeric_limits<double>::infinity()));
}

Var broadcast_to(const Var& a, std::size_t rows, std::size_t cols);

inline Var sum(const Var& a) {
  return make_node("sum", sum_all(a.value()), {a}, [](const Var& self, const Var& g) {
    const Tensor& x = self.parents()[0].value();
    return std::vector<Var>{broadcast_to(g, x.rows(), x.cols())};
  });
}

inline Var mean(const Var& a) {
  return make_node("mean", mean_all(a.value()), {a}, [](const Var& self, const Var& g) {
    const Tensor& x = self.parents()[0].value();
    double inv = 1.0 / static_cast<double>(x.size());
    return std::vector<Var>{broadcast_to(scale(g, inv), x.rows(), x.cols())};
  });
}

inline Var sum_axis(const Var& a, int axis) {
  return make_node("sum_axis", sum_axis(a.value(), axis), {a},
                   [](const Var& self, const Var& g) {
                     const Tensor& x = self.parents()[0].value();
                     return std::vector<Var>{broadcast_to(g, x.rows(), x.cols())};
                   });
}

inline Var broadcast_to(const Var& a, std::size_t rows, std::size_t cols) {
  return make_node("broadcast", broadcast_to(a.value(), rows, cols), {a},
                   [](const Var& self, const Var& g) {
                     const Tensor& x = self.parents()[0].value();
                     // reduce back over whichever axes were expanded
                     Var r = g;
                     if (x.rows() == 1 && self.value().rows() > 1) r = sum_axis(r, 0);
                     if (x.cols() == 1 && self.value().cols() > 1) r = sum_axis(r, 1);
                     return std::vector<Var>{r};
                   });
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);

inline Var concat_cols(const Var& a, const Var& b) {
  std::size_t ca = a.value().cols();
  return make_node("concat_cols", concat_cols(a.value(), b.value()), {a, b},
                   [ca](const Var& self, const Var& g) {
                     std::size_t total = self.value().cols();
                     return std::vector<Var>{slice_cols(g, 0, ca), slice_cols(g, ca, total)};
                   });
}

inline Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
  return make_node("slice_cols", slice_cols(a.value(), c0, c1), {a},
                   [c0, c1](const Var& self, const Var& g) {
                     const Tensor& x = self.parents()[0].value();
                     Var r = g;
                     if (c0 > 0) r = concat_cols(constant(Tensor::zeros(x.rows(), c0)), r);
                     if (c1 < x.cols())
                       r = concat_cols(r, constant(Tensor::zeros(x.rows(), x.cols() - c1)));
                     return std::vector<Var>{r};
                   });
}

// ---- composites -----------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

/// x*W + b with b broadcast across rows.
inline Var affine(const Var& x, const Var& w, const Var& b) {
  Var xw = matmul(x, w);
  return add(xw, broadcast_to(b, xw.value().rows(), xw.value().cols()));
}

/// Euclidean norm of the whole tensor as a scalar. A 1e-12 shift keeps the
/// norm differentiable at zero.
inline Var l2_norm(const Var& a) {
  return sqrt(add_constant(sum(square(a)), 1e-12));
}

/// Per-row Euclidean norms of a matrix, as [R x 1].
inline Var l2_norm_rows(const Var& a) {
  return sqrt(add_constant(sum_axis(square(a), 1), 1e-12));
}

/// An op whose backward rule computes raw tensors instead of graph nodes.
/// The first gradient works; asking for a gradient of that gradient raises
/// second_order_error. Exists so callers can plug in custom ops cheaply and
/// the engine can still report a precise error when Eq-penalty-style double
/// differentiation reaches them.
inline Var first_order_op(std::string op, Tensor value, std::vector<Var> parents,
                          std::function<std::vector<Tensor>(const Tensor& adjoint)> raw_vjp) {
  auto name = op;
  return make_node(
      std::move(op), std::move(value), std::move(parents),
      [raw_vjp = std::move(raw_vjp), name](const Var& self, const Var& g) {
        std::vector<Tensor> raw = raw_vjp(g.value());
        std::vector<Var> out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
          out.push_back(make_node(
              "first_order_adjoint(" + name + ")", std::move(raw[i]),
              {self.parents()[i]},
              [name](const Var&, const Var&) -> std::vector<Var> {
                throw second_order_error("second-order unsupported op '" + name + "'");
              },
              /*second_order_ok=*/false));
        }
        return out;
      },
      /*second_order_ok=*/false);
}

// ---- evaluation and differentiation ---------------------------------------

/// Forward value of a graph. Values are computed eagerly at construction
/// (with per-op finite checks), so this is a lookup.
inline const Tensor& evaluate(const Var& root) {
  if (!root.defined()) throw contract_error("evaluate: undefined graph root");
  return root.value();
}

namespace detail {

/// Parents-first topological order of the requires_grad subgraph under root.
inline std::vector<Var> topo_order(const Var& root) {
  std::vector<Var> order;
  if (!root.requires_grad()) return order;
  std::unordered_set<Node*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Var, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    Var node = stack.back().first;
    const auto& parents = node.parents();
    bool descended = false;
    while (stack.back().second < parents.size()) {
      const Var& p = parents[stack.back().second++];
      if (p.requires_grad() && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.emplace_back(p, 0);  // invalidates references into stack
        descended = true;
        break;
      }
    }
    if (!descended) {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

/// Reverse-mode differentiation of a scalar root with respect to `leaves`,
/// returned as graph nodes so the result can be differentiated again.
/// Leaves not reached by the graph get zero gradients of matching shape.
inline std::vector<Var> gradient_vars(const Var& root, const std::vector<Var>& leaves) {
  if (!root.defined()) throw contract_error("gradient: undefined graph root");
  if (root.value().size() != 1)
    throw contract_error("gradient: root must be scalar, got [" +
                         std::to_string(root.value().rows()) + "x" +
                         std::to_string(root.value().cols()) + "]");

  std::vector<Var> order = detail::topo_order(root);
  std::unordered_map<Node*, Var> adjoint;
  adjoint.emplace(root.get(), constant(Tensor::full(1, 1, 1.0)));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Var& node = *it;
    auto found = adjoint.find(node.get());
    if (found == adjoint.end()) continue;  // not on a path from the root
    if (node.parents().empty()) continue;
    std::vector<Var> contribs = node.get()->vjp(node, found->second);
    for (std::size_t i = 0; i < node.parents().size(); ++i) {
      const Var& p = node.parents()[i];
      if (!p.requires_grad()) continue;
      auto [slot, inserted] = adjoint.emplace(p.get(), contribs[i]);
      if (!inserted) slot->second = add(slot->second, contribs[i]);
    }
  }

  std::vector<Var> grads;
  grads.reserve(leaves.size());
  for (const Var& l : leaves) {
    auto found = adjoint.find(l.get());
    if (found != adjoint.end())
      grads.push_back(found->second);
    else
      grads.push_back(constant(Tensor::zeros(l.value().rows(), l.value().cols())));
  }
  return grads;
}

/// First-order gradients as plain tensors.
inline std::vector<Tensor> gradient(const Var& root, const std::vector<Var>& leaves) {
  std::vector<Var> g = gradient_vars(root, leaves);
  std::vector<Tensor> out;
  out.reserve(g.size());
  for (const Var& v : g) out.push_back(v.value());
  return out;
}

namespace detail {
inline void require_second_order(const Var& root) {
  std::unordered_set<Node*> seen;
  std::vector<Var> stack{root};
  seen.insert(root.get());
  std::string offenders;
  while (!stack.empty()) {
    Var n = stack.back();
    stack.pop_back();
    if (!n.get()->second_order_ok) offenders += (offenders.empty() ? "" : ", ") + n.op();
    for (const Var& p : n.parents())
      if (!seen.count(p.get())) {
        seen.insert(p.get());
        stack.push_back(p);
      }
  }
  if (!offenders.empty())
    throw second_order_error("second-order unsupported op '" + offenders + "'");
}
}  // namespace detail

/// Gradient of a map's output with respect to its input, as a graph node.
/// `f_apply` must be built from engine ops. For a map whose rows are
/// independent (a batched critic), the result holds each row's input
/// gradient. The returned node participates in further backward passes, so
/// norms of it can be differentiated with respect to the map's parameters.
inline Var input_gradient(const std::function<Var(const Var&)>& f_apply, const Var& x) {
  if (!x.requires_grad())
    throw contract_error("input_gradient: x must require gradients");
  Var y = f_apply(x);
  detail::require_second_order(y);
  Var root = y.value().size() == 1 ? y : sum(y);
  return gradient_vars(root, {x})[0];
}

inline Var input_gradient(const std::function<Var(const Var&)>& f_apply, const Tensor& x) {
  return input_gradient(f_apply, leaf(x, true));
}

}  // namespace softdice
