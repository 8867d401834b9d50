#pragma once

#include <array>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gancircle/tensor.hpp"

namespace gancircle::ad {

struct Node;
using Value = std::shared_ptr<Node>;

// Reverse-mode autodiff over a define-by-run DAG. Every vjp builds its result
// out of graph ops again, so gradients are themselves differentiable values;
// that is what makes the WGAN gradient penalty (a loss on input gradients)
// trainable without any special casing.
struct Node {
  Tensor val;
  bool requires_grad = false;
  std::vector<Value> parents;
  // grads wrt parents given grad wrt self; entries may be null when the
  // corresponding `needs` flag is false.
  std::function<std::vector<Value>(Node& self, const Value& grad,
                                   const std::vector<bool>& needs)>
      vjp;
  const char* op = "leaf";

  const Shape& shape() const { return val.shape; }
};

Value make_node(Tensor val, std::vector<Value> parents,
                std::function<std::vector<Value>(Node&, const Value&, const std::vector<bool>&)> vjp,
                const char* op);

Value leaf(Tensor t, bool requires_grad = true);
Value constant(Tensor t);
Value constant_scalar(double x);

// ---- pointwise / shape ----
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value neg(const Value& a);
Value add_scalar(const Value& a, double s);
Value mul_scalar(const Value& a, double s);
Value abs_val(const Value& a);
Value pow_scalar(const Value& a, double p);  // a must stay positive for fractional p
Value leaky_relu(const Value& a, double slope);

Value broadcast_to(const Value& a, Shape target);
Value reduce_sum(const Value& a, std::array<bool, 4> axes);  // keeps reduced dims as 1
Value reshape(const Value& a, Shape target);
Value sum_all(const Value& a);
Value mean_all(const Value& a);

Value concat_ch(const std::vector<Value>& xs);
Value slice_ch(const Value& a, std::int64_t c0, std::int64_t c1);
Value slice_hw(const Value& a, std::int64_t r0, std::int64_t c0, std::int64_t h, std::int64_t w);

// ---- convolution family ----
struct ConvGeom {
  int stride = 1;
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
};

// x:(N,Cin,H,W) w:(Cout,Cin,kh,kw) -> (N,Cout,Ho,Wo), cross-correlation with
// zero padding.
Value conv2d(const Value& x, const Value& w, ConvGeom geom);
// Transposed convolution / adjoint of conv2d for the same geometry. Maps
// u:(N,Cout,Hu,Wu) with w:(Cout,Cin,kh,kw) to (N,Cin,out_h,out_w).
Value conv2d_transpose(const Value& u, const Value& w, ConvGeom geom, std::int64_t out_h,
                       std::int64_t out_w);
// Weight gradient of conv2d: accumulates x against gy. Exposed because the
// conv vjps are expressed in terms of each other.
Value conv2d_wgrad(const Value& x, const Value& gy, std::int64_t kh, std::int64_t kw,
                   ConvGeom geom);

Value avg_pool2(const Value& x);
Value bicubic_up2(const Value& x);  // fixed Catmull-Rom kernel, exact x2, clamped edges

// ---- composites ----
Value instance_norm(const Value& x, const Value& gamma, const Value& beta, double eps = 1e-5);
// inverted dropout with an externally drawn mask; identity when mask is null
Value apply_mask(const Value& x, const Value& mask);

// ---- backward ----
class GradMap {
 public:
  explicit GradMap(std::unordered_map<Node*, Value> m) : m_(std::move(m)) {}
  // grad wrt x; zeros when x does not influence the root
  Value at(const Value& x) const;
  bool contains(const Value& x) const { return m_.count(x.get()) != 0; }

 private:
  std::unordered_map<Node*, Value> m_;
};

// Reverse sweep from a scalar root. Gradients are graph values and can be
// differentiated again by calling backward on anything built from them.
GradMap backward(const Value& root);

// Breaks deep recursive shared_ptr destruction on big graphs. Call once a
// step's graphs (losses and their GradMaps) are no longer needed.
void release_graph(const std::vector<Value>& roots);

}  // namespace gancircle::ad
