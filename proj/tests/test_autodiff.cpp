#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gancircle/autodiff.hpp"
#include "gancircle/resample.hpp"
#include "gancircle/rng.hpp"
#include "support/gradcheck.hpp"

using namespace gancircle;
using gancircle::testsupport::gradcheck;
using gancircle::testsupport::random_tensor;
namespace gad = gancircle::ad;

TEST_CASE("pointwise and reduction gradients") {
  Rng rng(7);
  Tensor a = random_tensor(Shape(2, 3, 4, 4), rng);
  Tensor b = random_tensor(Shape(2, 3, 4, 4), rng, 0.2, 1.5);  // keep positive for pow

  CHECK(gradcheck([](const auto& l) { return gad::mean_all(gad::mul(l[0], l[1])); }, {a, b}) <= 1.0);
  CHECK(gradcheck([](const auto& l) { return gad::sum_all(gad::pow_scalar(l[0], -0.5)); }, {b}) <= 1.0);
  CHECK(gradcheck([](const auto& l) { return gad::mean_all(gad::leaky_relu(l[0], 0.1)); }, {a}) <= 1.0);
  CHECK(gradcheck([](const auto& l) { return gad::mean_all(gad::abs_val(l[0])); }, {a}) <= 1.0);
  CHECK(gradcheck(
            [](const auto& l) {
              auto r = gad::reduce_sum(l[0], {false, true, false, true});
              return gad::sum_all(gad::mul(r, r));
            },
            {a}) <= 1.0);
  CHECK(gradcheck(
            [](const auto& l) {
              auto s = gad::broadcast_to(l[0], Shape(2, 3, 4, 4));
              return gad::mean_all(gad::mul(s, s));
            },
            {random_tensor(Shape(2, 3, 1, 1), rng)}) <= 1.0);
}

TEST_CASE("conv family gradients incl. asymmetric padding and stride") {
  Rng rng(11);
  Tensor x = random_tensor(Shape(2, 3, 6, 7), rng);
  Tensor w = random_tensor(Shape(4, 3, 3, 3), rng);

  for (gad::ConvGeom g : {gad::ConvGeom{1, 1, 1, 1, 1}, gad::ConvGeom{2, 1, 1, 1, 1},
                          gad::ConvGeom{1, 1, 2, 1, 2}, gad::ConvGeom{2, 0, 1, 1, 0}}) {
    double err = gradcheck(
        [g](const auto& l) { return gad::mean_all(gad::mul(gad::conv2d(l[0], l[1], g),
                                                           gad::conv2d(l[0], l[1], g))); },
        {x, w});
    CAPTURE(g.stride);
    CHECK(err <= 1.0);
  }

  // transposed conv as a standalone layer
  Tensor u = random_tensor(Shape(2, 4, 3, 3), rng);
  Tensor wt = random_tensor(Shape(4, 2, 4, 4), rng);
  double err = gradcheck(
      [](const auto& l) {
        auto y = gad::conv2d_transpose(l[0], l[1], gad::ConvGeom{2, 1, 1, 1, 1}, 6, 6);
        return gad::mean_all(gad::mul(y, y));
      },
      {u, wt});
  CHECK(err <= 1.0);
}

TEST_CASE("concat, slice, pooling, instance norm gradients") {
  Rng rng(13);
  Tensor a = random_tensor(Shape(2, 2, 4, 4), rng);
  Tensor b = random_tensor(Shape(2, 3, 4, 4), rng);
  CHECK(gradcheck(
            [](const auto& l) {
              auto c = gad::concat_ch({l[0], l[1]});
              auto s = gad::slice_ch(c, 1, 4);
              return gad::mean_all(gad::mul(s, s));
            },
            {a, b}) <= 1.0);
  CHECK(gradcheck(
            [](const auto& l) {
              auto s = gad::slice_hw(l[0], 1, 0, 2, 3);
              return gad::mean_all(gad::abs_val(s));
            },
            {a}) <= 1.0);
  CHECK(gradcheck(
            [](const auto& l) {
              auto p = gad::avg_pool2(l[0]);
              return gad::mean_all(gad::mul(p, p));
            },
            {a}) <= 1.0);

  Tensor g = random_tensor(Shape(1, 2, 1, 1), rng, 0.5, 1.5);
  Tensor be = random_tensor(Shape(1, 2, 1, 1), rng);
  CHECK(gradcheck(
            [](const auto& l) {
              auto y = gad::instance_norm(l[0], l[1], l[2]);
              return gad::mean_all(gad::mul(y, y));
            },
            {a, g, be}) <= 1.0);
}

TEST_CASE("bicubic up2 matches the shared resampler and is a proper adjoint") {
  Rng rng(17);
  Tensor x = random_tensor(Shape(1, 1, 5, 6), rng);
  auto v = gad::bicubic_up2(gad::constant(x));

  Array2D plane(5, 6);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c) plane.at(r, c) = x.at(0, 0, r, c);
  Array2D up = upsample2x(plane, ResampleMethod::bicubic);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 12; ++c) CHECK(v->val.at(0, 0, r, c) == doctest::Approx(up.at(r, c)).epsilon(1e-12));

  // <A x, y> == <x, A^T y>
  Array2D y(10, 12);
  for (auto& e : y.v) e = rng.uniform(-1, 1);
  double lhs = 0;
  for (size_t i = 0; i < y.v.size(); ++i) lhs += up.v[i] * y.v[i];
  Array2D xt = bicubic_up2_adjoint(y, 5, 6);
  double rhs = 0;
  for (size_t i = 0; i < xt.v.size(); ++i) rhs += xt.v[i] * plane.v[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  CHECK(gradcheck(
            [](const auto& l) {
              auto u2 = gad::bicubic_up2(l[0]);
              return gad::mean_all(gad::mul(u2, u2));
            },
            {x}) <= 1.0);
}

TEST_CASE("second-order backprop through a conv+instance-norm+lrelu stack") {
  // trains-the-gradient scenario: loss built from d(net)/d(input)
  Rng rng(23);
  Tensor x = random_tensor(Shape(2, 1, 5, 5), rng);
  Tensor w = random_tensor(Shape(2, 1, 3, 3), rng);
  Tensor gm = random_tensor(Shape(1, 2, 1, 1), rng, 0.5, 1.5);
  Tensor bt = random_tensor(Shape(1, 2, 1, 1), rng);

  auto grad_norm_loss = [](const std::vector<gad::Value>& l) {
    auto xin = gad::make_node(
        l[0]->val, {l[0]},
        [](gad::Node&, const gad::Value& g, const std::vector<bool>& needs) {
          return std::vector<gad::Value>{needs[0] ? g : nullptr};
        },
        "probe");
    xin->requires_grad = true;
    auto y = gad::conv2d(xin, l[1], gad::ConvGeom{1, 1, 1, 1, 1});
    y = gad::instance_norm(y, l[2], l[3]);
    y = gad::leaky_relu(y, 0.1);
    auto score = gad::sum_all(y);
    auto grads = gad::backward(score);
    auto gx = grads.at(xin);
    auto n2 = gad::reduce_sum(gad::mul(gx, gx), {false, true, true, true});
    auto dev = gad::add_scalar(gad::pow_scalar(n2, 0.5), -1.0);
    return gad::mean_all(gad::mul(dev, dev));
  };

  // finite differences at looser h because the value itself is a derivative
  double err = gradcheck(grad_norm_loss, {x, w, gm, bt}, 1e-5);
  CHECK(err <= 1.0);
}

TEST_CASE("determinism: same graph twice gives identical bits") {
  Rng rng(29);
  Tensor x = random_tensor(Shape(2, 3, 8, 8), rng);
  Tensor w = random_tensor(Shape(4, 3, 3, 3), rng);
  auto run = [&] {
    auto y = gad::conv2d(gad::leaf(x, true), gad::leaf(w, true), gad::ConvGeom{1, 1, 1, 1, 1});
    return gad::mean_all(gad::mul(y, y))->val.item();
  };
  CHECK(run() == run());
}
