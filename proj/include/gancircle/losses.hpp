#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gancircle/autodiff.hpp"
#include "gancircle/models.hpp"

namespace gancircle {

struct LossWeights {
  double lambda1 = 1.0;    // cycle
  double lambda2 = 0.5;    // identity
  double lambda3 = 0.001;  // joint sparsifying transform
  double lambda_gp = 10.0;
  double tau = 0.5;

  void validate() const;
};

// Named scalar loss components of one step plus the weighted total.
struct LossBundle {
  double adv_G = 0, adv_F = 0, gp_X = 0, gp_Y = 0;
  double cyc = 0, idt = 0, jst = 0, sup = 0;
  double total = 0;

  static std::string csv_header();  // adv_G,...,total (no step column)
  std::string csv_row() const;
};

struct LossComponents {
  std::optional<double> adv_G, adv_F, gp_X, gp_Y, cyc, idt, jst, sup;
};

// Eq. 9 combination: total = adv_G + adv_F + l1*cyc + l2*idt + l3*jst, plus
// sup (weight 1) outside the unsupervised mode. Throws if a component the
// mode requires is missing.
LossBundle total_objective(const LossComponents& c, const LossWeights& w, Mode mode);

namespace losses {

using ad::Value;

// critic side of the WGAN-GP objective: -mean(real) + mean(fake) + gp_weight*gp
Value critic_loss(const Value& real_scores, const Value& fake_scores, const Value& gp,
                  double lambda_gp);

// E[(||grad_t critic(t)||_2 - 1)^2] with t = u*real + (1-u)*fake per sample.
// `uniform_draws` holds one u in [0,1] per batch element. The critic must be
// an autodiff-differentiable functional; the gradient is taken with respect
// to the interpolated images, never the parameters.
Value gradient_penalty(const std::function<Value(const Value&)>& critic, const Value& real_batch,
                       const Value& fake_batch, const std::vector<double>& uniform_draws);

Value generator_adv_loss(const Value& fake_scores);  // -mean(fake)

// L1(FGx, x) + L1(GFy, y)
Value cycle_loss(const Value& x, const Value& fgx, const Value& y, const Value& gfy);

// L1(Gy, y) + L1(Fx, x); both generators are size-preserving here
Value identity_loss(const Value& gy, const Value& y, const Value& fx, const Value& x);

// anisotropic TV (forward differences), normalized by element count
Value tv(const Value& image);

// tau*tv(Gx) + (1-tau)*tv(y - Gx)
Value jst_loss(const Value& gx, const Value& y, double tau);

// L1(Gx, y) + L1(Fy, x)
Value supervision_loss(const Value& gx, const Value& y, const Value& fy, const Value& x);

Value l1_mean(const Value& a, const Value& b);

}  // namespace losses

}  // namespace gancircle
