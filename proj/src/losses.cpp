#include "gancircle/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gancircle {

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda_gp < 0)
    throw std::invalid_argument("LossWeights: lambdas must be nonnegative");
  if (!(tau >= 0.0 && tau <= 1.0))
    throw std::invalid_argument("LossWeights: tau must be in [0,1], got " + std::to_string(tau));
}

std::string LossBundle::csv_header() { return "adv_G,adv_F,gp_X,gp_Y,cyc,idt,jst,sup,total"; }

static std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string LossBundle::csv_row() const {
  return fmt(adv_G) + "," + fmt(adv_F) + "," + fmt(gp_X) + "," + fmt(gp_Y) + "," + fmt(cyc) + "," +
         fmt(idt) + "," + fmt(jst) + "," + fmt(sup) + "," + fmt(total);
}

LossBundle total_objective(const LossComponents& c, const LossWeights& w, Mode mode) {
  auto need = [&](const std::optional<double>& x, const char* name) {
    if (!x) throw std::invalid_argument(std::string("total_objective: missing component ") + name);
    return *x;
  };
  LossBundle b;
  b.adv_G = need(c.adv_G, "adv_G");
  b.adv_F = need(c.adv_F, "adv_F");
  b.cyc = need(c.cyc, "cyc");
  b.idt = need(c.idt, "idt");
  b.jst = need(c.jst, "jst");
  b.gp_X = c.gp_X.value_or(0.0);
  b.gp_Y = c.gp_Y.value_or(0.0);
  b.total = b.adv_G + b.adv_F + w.lambda1 * b.cyc + w.lambda2 * b.idt + w.lambda3 * b.jst;
  if (mode != Mode::unsupervised) {
    b.sup = need(c.sup, "sup");
    b.total += b.sup;
  }
  return b;
}

namespace losses {

Value l1_mean(const Value& a, const Value& b) {
  check_same_shape(a->val, b->val, "l1_mean");
  return ad::mean_all(ad::abs_val(ad::sub(a, b)));
}

Value critic_loss(const Value& real_scores, const Value& fake_scores, const Value& gp,
                  double lambda_gp) {
  if (real_scores->val.numel() == 0 || fake_scores->val.numel() == 0)
    throw std::invalid_argument("critic_loss: empty score batch");
  Value w = ad::sub(ad::mean_all(fake_scores), ad::mean_all(real_scores));
  return ad::add(w, ad::mul_scalar(gp, lambda_gp));
}

Value generator_adv_loss(const Value& fake_scores) {
  if (fake_scores->val.numel() == 0)
    throw std::invalid_argument("generator_adv_loss: empty score batch");
  return ad::neg(ad::mean_all(fake_scores));
}

Value gradient_penalty(const std::function<Value(const Value&)>& critic, const Value& real_batch,
                       const Value& fake_batch, const std::vector<double>& uniform_draws) {
  check_same_shape(real_batch->val, fake_batch->val, "gradient_penalty");
  const Shape& s = real_batch->shape();
  if (static_cast<std::int64_t>(uniform_draws.size()) != s.n())
    throw std::invalid_argument("gradient_penalty: need one uniform draw per sample");

  Tensor u(Shape(s.n(), 1, 1, 1));
  Tensor one_minus_u(Shape(s.n(), 1, 1, 1));
  for (std::int64_t i = 0; i < s.n(); ++i) {
    double d = uniform_draws[static_cast<size_t>(i)];
    u.v[static_cast<size_t>(i)] = d;
    one_minus_u.v[static_cast<size_t>(i)] = 1.0 - d;
  }
  Value t = ad::add(ad::mul(real_batch, ad::broadcast_to(ad::constant(std::move(u)), s)),
                    ad::mul(fake_batch, ad::broadcast_to(ad::constant(std::move(one_minus_u)), s)));
  // force a grad path even when real/fake are plain constants
  t = ad::make_node(
      t->val, {t},
      [](ad::Node&, const Value& g, const std::vector<bool>& needs) {
        return std::vector<Value>{needs[0] ? g : nullptr};
      },
      "interp");
  t->requires_grad = true;

  Value scores = critic(t);
  if (scores->val.numel() != s.n())
    throw std::invalid_argument("gradient_penalty: critic must emit one score per sample, got " +
                                scores->shape().str());
  // non-differentiable critics surface as op errors out of backward; a critic
  // that ignores its input legitimately has zero gradient (gp = 1)
  ad::GradMap grads = ad::backward(ad::sum_all(scores));
  Value g = grads.at(t);

  Value norm2 = ad::reduce_sum(ad::mul(g, g), {false, true, true, true});
  Value norm = ad::pow_scalar(norm2, 0.5);
  Value dev = ad::add_scalar(norm, -1.0);
  return ad::mean_all(ad::mul(dev, dev));
}

Value cycle_loss(const Value& x, const Value& fgx, const Value& y, const Value& gfy) {
  return ad::add(l1_mean(fgx, x), l1_mean(gfy, y));
}

Value identity_loss(const Value& gy, const Value& y, const Value& fx, const Value& x) {
  return ad::add(l1_mean(gy, y), l1_mean(fx, x));
}

Value tv(const Value& image) {
  const Shape& s = image->shape();
  if (s.h() < 2 || s.w() < 2)
    throw std::invalid_argument("tv: image must be at least 2x2, got " + s.str());
  Value dh = ad::sub(ad::slice_hw(image, 0, 1, s.h(), s.w() - 1),
                     ad::slice_hw(image, 0, 0, s.h(), s.w() - 1));
  Value dv = ad::sub(ad::slice_hw(image, 1, 0, s.h() - 1, s.w()),
                     ad::slice_hw(image, 0, 0, s.h() - 1, s.w()));
  Value total = ad::add(ad::sum_all(ad::abs_val(dh)), ad::sum_all(ad::abs_val(dv)));
  return ad::mul_scalar(total, 1.0 / static_cast<double>(s.numel()));
}

Value jst_loss(const Value& gx, const Value& y, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("jst_loss: tau must be in [0,1]");
  if (tau == 1.0) return tv(gx);  // plain TV, y unused
  check_same_shape(gx->val, y->val, "jst_loss");
  Value t1 = ad::mul_scalar(tv(gx), tau);
  Value t2 = ad::mul_scalar(tv(ad::sub(y, gx)), 1.0 - tau);
  return ad::add(t1, t2);
}

Value supervision_loss(const Value& gx, const Value& y, const Value& fy, const Value& x) {
  return ad::add(l1_mean(gx, y), l1_mean(fy, x));
}

}  // namespace losses

}  // namespace gancircle
