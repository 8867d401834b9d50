#include "gancircle/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_set>

namespace gancircle::ad {

Value make_node(Tensor val, std::vector<Value> parents,
                std::function<std::vector<Value>(Node&, const Value&, const std::vector<bool>&)> vjp,
                const char* op) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  n->vjp = std::move(vjp);
  n->op = op;
  for (const auto& p : n->parents)
    if (p && p->requires_grad) n->requires_grad = true;
  return n;
}

Value leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->requires_grad = requires_grad;
  return n;
}

Value constant(Tensor t) { return leaf(std::move(t), false); }
Value constant_scalar(double x) { return constant(Tensor::scalar(x)); }

// ---------------------------------------------------------------- pointwise

Value add(const Value& a, const Value& b) {
  check_same_shape(a->val, b->val, "add");
  Tensor out(a->shape());
  const auto& av = a->val.v;
  const auto& bv = b->val.v;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = av[i] + bv[i];
  return make_node(std::move(out), {a, b},
                   [](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? g : nullptr, needs[1] ? g : nullptr};
                   },
                   "add");
}

Value sub(const Value& a, const Value& b) {
  check_same_shape(a->val, b->val, "sub");
  Tensor out(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a->val.v[i] - b->val.v[i];
  return make_node(std::move(out), {a, b},
                   [](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? g : nullptr,
                                               needs[1] ? neg(g) : nullptr};
                   },
                   "sub");
}

Value mul(const Value& a, const Value& b) {
  check_same_shape(a->val, b->val, "mul");
  Tensor out(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a->val.v[i] * b->val.v[i];
  return make_node(std::move(out), {a, b},
                   [](Node& self, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? mul(g, self.parents[1]) : nullptr,
                                               needs[1] ? mul(g, self.parents[0]) : nullptr};
                   },
                   "mul");
}

Value neg(const Value& a) {
  Tensor out(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = -a->val.v[i];
  return make_node(std::move(out), {a},
                   [](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? neg(g) : nullptr};
                   },
                   "neg");
}

Value add_scalar(const Value& a, double s) {
  Tensor out(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a->val.v[i] + s;
  return make_node(std::move(out), {a},
                   [](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? g : nullptr};
                   },
                   "add_scalar");
}

Value mul_scalar(const Value& a, double s) {
  Tensor out(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a->val.v[i] * s;
  return make_node(std::move(out), {a},
                   [s](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? mul_scalar(g, s) : nullptr};
                   },
                   "mul_scalar");
}

Value abs_val(const Value& a) {
  Tensor out(a->shape());
  Tensor sign(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) {
    double x = a->val.v[i];
    out.v[i] = std::abs(x);
    sign.v[i] = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  }
  // the sign mask is frozen: second derivative is zero a.e., as usual for L1
  auto mask = constant(std::move(sign));
  return make_node(std::move(out), {a},
                   [mask](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? mul(g, mask) : nullptr};
                   },
                   "abs");
}

Value pow_scalar(const Value& a, double p) {
  Tensor out(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::pow(a->val.v[i], p);
  return make_node(std::move(out), {a},
                   [p](Node& self, const Value& g, const std::vector<bool>& needs) {
                     if (!needs[0]) return std::vector<Value>{nullptr};
                     Value d = mul_scalar(pow_scalar(self.parents[0], p - 1.0), p);
                     return std::vector<Value>{mul(g, d)};
                   },
                   "pow_scalar");
}

Value leaky_relu(const Value& a, double slope) {
  Tensor out(a->shape());
  Tensor m(a->shape());
  for (size_t i = 0; i < out.v.size(); ++i) {
    double x = a->val.v[i];
    bool pos = x > 0.0;
    out.v[i] = pos ? x : slope * x;
    m.v[i] = pos ? 1.0 : slope;
  }
  auto mask = constant(std::move(m));
  return make_node(std::move(out), {a},
                   [mask](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? mul(g, mask) : nullptr};
                   },
                   "leaky_relu");
}

Value apply_mask(const Value& x, const Value& mask) {
  if (!mask) return x;
  return mul(x, mask);
}

// ------------------------------------------------------------ shape / reduce

Value broadcast_to(const Value& a, Shape target) {
  const Shape& s = a->shape();
  std::array<bool, 4> bcast{};
  for (int i = 0; i < 4; ++i) {
    if (s[i] == target[i])
      bcast[i] = false;
    else if (s[i] == 1)
      bcast[i] = true;
    else
      throw std::invalid_argument("broadcast_to: cannot map " + s.str() + " onto " + target.str());
  }
  Tensor out(target);
  const auto& sv = a->val.v;
  std::int64_t sc = s.c(), sh = s.h(), sw = s.w();
  for (std::int64_t n = 0; n < target.n(); ++n)
    for (std::int64_t c = 0; c < target.c(); ++c)
      for (std::int64_t h = 0; h < target.h(); ++h)
        for (std::int64_t w = 0; w < target.w(); ++w) {
          std::int64_t idx =
              ((std::min(n, s.n() - 1) * sc + std::min(c, sc - 1)) * sh + std::min(h, sh - 1)) * sw +
              std::min(w, sw - 1);
          out.at(n, c, h, w) = sv[static_cast<size_t>(idx)];
        }
  return make_node(std::move(out), {a},
                   [bcast](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? reduce_sum(g, bcast) : nullptr};
                   },
                   "broadcast_to");
}

Value reduce_sum(const Value& a, std::array<bool, 4> axes) {
  const Shape& s = a->shape();
  Shape out_shape = s;
  for (int i = 0; i < 4; ++i)
    if (axes[i]) out_shape.d[i] = 1;
  Tensor out(out_shape);
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c)
      for (std::int64_t h = 0; h < s.h(); ++h)
        for (std::int64_t w = 0; w < s.w(); ++w)
          out.at(axes[0] ? 0 : n, axes[1] ? 0 : c, axes[2] ? 0 : h, axes[3] ? 0 : w) +=
              a->val.at(n, c, h, w);
  Shape in_shape = s;
  return make_node(std::move(out), {a},
                   [in_shape](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? broadcast_to(g, in_shape) : nullptr};
                   },
                   "reduce_sum");
}

Value reshape(const Value& a, Shape target) {
  if (a->val.numel() != target.numel())
    throw std::invalid_argument("reshape: numel mismatch " + a->shape().str() + " -> " +
                                target.str());
  Tensor out(target);
  out.v = a->val.v;
  Shape in_shape = a->shape();
  return make_node(std::move(out), {a},
                   [in_shape](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? reshape(g, in_shape) : nullptr};
                   },
                   "reshape");
}

Value sum_all(const Value& a) { return reduce_sum(a, {true, true, true, true}); }

Value mean_all(const Value& a) {
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a->val.numel()));
}

// ------------------------------------------------------------ concat / slice

Value concat_ch(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_ch: empty input");
  const Shape& s0 = xs[0]->shape();
  std::int64_t ctot = 0;
  for (const auto& x : xs) {
    const Shape& s = x->shape();
    if (s.n() != s0.n() || s.h() != s0.h() || s.w() != s0.w())
      throw std::invalid_argument("concat_ch: spatial/batch mismatch " + s.str() + " vs " +
                                  s0.str());
    ctot += s.c();
  }
  Tensor out(Shape(s0.n(), ctot, s0.h(), s0.w()));
  std::int64_t off = 0;
  for (const auto& x : xs) {
    const Shape& s = x->shape();
    for (std::int64_t n = 0; n < s.n(); ++n)
      for (std::int64_t c = 0; c < s.c(); ++c)
        for (std::int64_t h = 0; h < s.h(); ++h)
          for (std::int64_t w = 0; w < s.w(); ++w)
            out.at(n, off + c, h, w) = x->val.at(n, c, h, w);
    off += s.c();
  }
  std::vector<std::int64_t> offsets;
  std::int64_t o = 0;
  for (const auto& x : xs) {
    offsets.push_back(o);
    o += x->shape().c();
  }
  std::vector<Value> parents(xs.begin(), xs.end());
  return make_node(std::move(out), std::move(parents),
                   [offsets](Node& self, const Value& g, const std::vector<bool>& needs) {
                     std::vector<Value> gs(self.parents.size());
                     for (size_t i = 0; i < self.parents.size(); ++i) {
                       if (!needs[i]) continue;
                       std::int64_t c0 = offsets[i];
                       std::int64_t c1 = c0 + self.parents[i]->shape().c();
                       gs[i] = slice_ch(g, c0, c1);
                     }
                     return gs;
                   },
                   "concat_ch");
}

static Value embed_ch(const Value& a, std::int64_t c_total, std::int64_t c0);

Value slice_ch(const Value& a, std::int64_t c0, std::int64_t c1) {
  const Shape& s = a->shape();
  if (c0 < 0 || c1 > s.c() || c0 >= c1) throw std::invalid_argument("slice_ch: bad range");
  Tensor out(Shape(s.n(), c1 - c0, s.h(), s.w()));
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = c0; c < c1; ++c)
      for (std::int64_t h = 0; h < s.h(); ++h)
        for (std::int64_t w = 0; w < s.w(); ++w) out.at(n, c - c0, h, w) = a->val.at(n, c, h, w);
  std::int64_t c_total = s.c();
  return make_node(std::move(out), {a},
                   [c_total, c0](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? embed_ch(g, c_total, c0) : nullptr};
                   },
                   "slice_ch");
}

static Value embed_ch(const Value& a, std::int64_t c_total, std::int64_t c0) {
  const Shape& s = a->shape();
  Tensor out(Shape(s.n(), c_total, s.h(), s.w()));
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c)
      for (std::int64_t h = 0; h < s.h(); ++h)
        for (std::int64_t w = 0; w < s.w(); ++w) out.at(n, c0 + c, h, w) = a->val.at(n, c, h, w);
  std::int64_t c0_ = c0, c1_ = c0 + s.c();
  return make_node(std::move(out), {a},
                   [c0_, c1_](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? slice_ch(g, c0_, c1_) : nullptr};
                   },
                   "embed_ch");
}

static Value embed_hw(const Value& a, std::int64_t H, std::int64_t W, std::int64_t r0,
                      std::int64_t c0);

Value slice_hw(const Value& a, std::int64_t r0, std::int64_t c0, std::int64_t h, std::int64_t w) {
  const Shape& s = a->shape();
  if (r0 < 0 || c0 < 0 || r0 + h > s.h() || c0 + w > s.w() || h <= 0 || w <= 0)
    throw std::invalid_argument("slice_hw: bad range");
  Tensor out(Shape(s.n(), s.c(), h, w));
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) out.at(n, c, y, x) = a->val.at(n, c, r0 + y, c0 + x);
  std::int64_t H = s.h(), W = s.w();
  return make_node(std::move(out), {a},
                   [H, W, r0, c0](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? embed_hw(g, H, W, r0, c0) : nullptr};
                   },
                   "slice_hw");
}

static Value embed_hw(const Value& a, std::int64_t H, std::int64_t W, std::int64_t r0,
                      std::int64_t c0) {
  const Shape& s = a->shape();
  Tensor out(Shape(s.n(), s.c(), H, W));
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c)
      for (std::int64_t y = 0; y < s.h(); ++y)
        for (std::int64_t x = 0; x < s.w(); ++x) out.at(n, c, r0 + y, c0 + x) = a->val.at(n, c, y, x);
  std::int64_t h = s.h(), w = s.w(), r0_ = r0, c0_ = c0;
  return make_node(std::move(out), {a},
                   [h, w, r0_, c0_](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? slice_hw(g, r0_, c0_, h, w) : nullptr};
                   },
                   "embed_hw");
}

// -------------------------------------------------------------- composites

Value instance_norm(const Value& x, const Value& gamma, const Value& beta, double eps) {
  const Shape& s = x->shape();
  double inv_hw = 1.0 / static_cast<double>(s.h() * s.w());
  // built from smooth primitives so second-order backprop needs no extra code
  Value mu = mul_scalar(reduce_sum(x, {false, false, true, true}), inv_hw);
  Value xc = sub(x, broadcast_to(mu, s));
  Value var = mul_scalar(reduce_sum(mul(xc, xc), {false, false, true, true}), inv_hw);
  Value inv_std = pow_scalar(add_scalar(var, eps), -0.5);
  Value xn = mul(xc, broadcast_to(inv_std, s));
  Shape param_shape(1, s.c(), 1, 1);
  Value gs = broadcast_to(reshape(gamma, param_shape), s);
  Value bs = broadcast_to(reshape(beta, param_shape), s);
  return add(mul(xn, gs), bs);
}

// ----------------------------------------------------------------- backward

Value GradMap::at(const Value& x) const {
  auto it = m_.find(x.get());
  if (it != m_.end()) return it->second;
  return constant(Tensor::zeros(x->shape()));
}

GradMap backward(const Value& root) {
  if (root->val.numel() != 1)
    throw std::logic_error("backward: root must be scalar, got " + root->shape().str());

  // iterative post-order topological sort over grad-requiring subgraph
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::unordered_map<Node*, Value> keepalive;
  {
    std::vector<std::pair<Node*, size_t>> stack;
    if (root->requires_grad) {
      stack.push_back({root.get(), 0});
      keepalive[root.get()] = root;
      seen.insert(root.get());
    }
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Value p = node->parents[idx++];
        if (p && p->requires_grad && !seen.count(p.get())) {
          seen.insert(p.get());
          keepalive[p.get()] = p;
          stack.push_back({p.get(), 0});
        }
      } else {
        topo.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node*, Value> grads;
  grads[root.get()] = constant(Tensor::full(root->shape(), 1.0));

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    auto git = grads.find(n);
    if (git == grads.end() || n->parents.empty()) continue;
    std::vector<bool> needs(n->parents.size(), false);
    bool any = false;
    for (size_t i = 0; i < n->parents.size(); ++i) {
      needs[i] = n->parents[i] && n->parents[i]->requires_grad;
      any = any || needs[i];
    }
    if (!any || !n->vjp) continue;
    std::vector<Value> pg = n->vjp(*n, git->second, needs);
    for (size_t i = 0; i < n->parents.size(); ++i) {
      if (!needs[i] || !pg[i]) continue;
      Node* p = n->parents[i].get();
      auto pit = grads.find(p);
      if (pit == grads.end())
        grads[p] = pg[i];
      else
        pit->second = add(pit->second, pg[i]);
    }
  }
  return GradMap(std::move(grads));
}

void release_graph(const std::vector<Value>& roots) {
  // flatten ownership before letting shared_ptrs die, so node destructors
  // never recurse through long parent chains
  std::vector<Value> pool;
  std::unordered_set<Node*> seen;
  for (const auto& r : roots)
    if (r && seen.insert(r.get()).second) pool.push_back(r);
  for (size_t i = 0; i < pool.size(); ++i) {
    for (auto& p : pool[i]->parents)
      if (p && seen.insert(p.get()).second) pool.push_back(p);
  }
  for (auto& v : pool) {
    v->parents.clear();
    v->vjp = nullptr;  // drops values captured by closures as well
  }
}

}  // namespace gancircle::ad
