#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gancircle/autodiff.hpp"
#include "gancircle/rng.hpp"

namespace gancircle::testsupport {

// Central-difference check of d(f)/d(inputs). `build` must construct the
// scalar loss from the given leaves from scratch on every call (the graph is
// define-by-run). Returns the worst excess |fd - analytic| / (atol + rtol *
// max(|fd|, |analytic|)); values <= 1 pass. atol absorbs plain fp noise on
// near-zero entries, rtol is the relative tolerance proper.
inline double gradcheck(
    const std::function<ad::Value(const std::vector<ad::Value>&)>& build,
    std::vector<Tensor> inputs, double h = 1e-6, double rtol = 1e-4, double atol = 1e-8) {
  auto make_leaves = [&](const std::vector<Tensor>& ts) {
    std::vector<ad::Value> ls;
    for (const auto& t : ts) ls.push_back(ad::leaf(t, true));
    return ls;
  };

  std::vector<ad::Value> leaves = make_leaves(inputs);
  ad::Value root = build(leaves);
  ad::GradMap grads = ad::backward(root);

  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor analytic = grads.at(leaves[k])->val;
    for (size_t i = 0; i < inputs[k].v.size(); ++i) {
      double orig = inputs[k].v[i];
      inputs[k].v[i] = orig + h;
      double fp = build(make_leaves(inputs))->val.item();
      inputs[k].v[i] = orig - h;
      double fm = build(make_leaves(inputs))->val.item();
      inputs[k].v[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double an = analytic.v[i];
      double excess = std::abs(fd - an) / (atol + rtol * std::max(std::abs(fd), std::abs(an)));
      worst = std::max(worst, excess);
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace gancircle::testsupport
