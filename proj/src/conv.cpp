#include <Eigen/Dense>
#include <cstring>
#include <stdexcept>

#include "gancircle/autodiff.hpp"
#include "gancircle/resample.hpp"

namespace gancircle::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, int stride, int pad_lo, int pad_hi,
                          const char* dim_name) {
  std::int64_t span = in + pad_lo + pad_hi - k;
  if (span < 0)
    throw std::invalid_argument(std::string("conv2d: input ") + dim_name + "=" +
                                std::to_string(in) + " too small for kernel " + std::to_string(k));
  return span / stride + 1;
}

// gathers the kh*kw*Cin input window of every output position of one sample
// into a (Ho*Wo) x (Cin*kh*kw) row-major matrix
void im2col(const Tensor& x, std::int64_t n, std::int64_t kh, std::int64_t kw, ConvGeom g,
            std::int64_t Ho, std::int64_t Wo, double* col) {
  const std::int64_t C = x.shape.c(), H = x.shape.h(), W = x.shape.w();
  const std::int64_t ckk = C * kh * kw;
  for (std::int64_t oy = 0; oy < Ho; ++oy) {
    for (std::int64_t ox = 0; ox < Wo; ++ox) {
      double* row = col + (oy * Wo + ox) * ckk;
      for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          std::int64_t iy = oy * g.stride + ky - g.pad_top;
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            std::int64_t ix = ox * g.stride + kx - g.pad_left;
            double v = 0.0;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W) v = x.at(n, c, iy, ix);
            row[(c * kh + ky) * kw + kx] = v;
          }
        }
      }
    }
  }
}

// scatter-add of columns back into the padded input grid (adjoint of im2col)
void col2im_add(const double* col, std::int64_t kh, std::int64_t kw, ConvGeom g, std::int64_t Ho,
                std::int64_t Wo, Tensor& x, std::int64_t n) {
  const std::int64_t C = x.shape.c(), H = x.shape.h(), W = x.shape.w();
  const std::int64_t ckk = C * kh * kw;
  for (std::int64_t oy = 0; oy < Ho; ++oy) {
    for (std::int64_t ox = 0; ox < Wo; ++ox) {
      const double* row = col + (oy * Wo + ox) * ckk;
      for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          std::int64_t iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= H) continue;
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            std::int64_t ix = ox * g.stride + kx - g.pad_left;
            if (ix < 0 || ix >= W) continue;
            x.at(n, c, iy, ix) += row[(c * kh + ky) * kw + kx];
          }
        }
      }
    }
  }
}

Tensor conv2d_fwd(const Tensor& x, const Tensor& w, ConvGeom g) {
  const std::int64_t N = x.shape.n(), Cin = x.shape.c(), H = x.shape.h(), W = x.shape.w();
  const std::int64_t Cout = w.shape.n(), kh = w.shape.h(), kw = w.shape.w();
  if (w.shape.c() != Cin)
    throw std::invalid_argument("conv2d: channel mismatch, input C=" + std::to_string(Cin) +
                                " vs kernel C=" + std::to_string(w.shape.c()));
  const std::int64_t Ho = conv_out_dim(H, kh, g.stride, g.pad_top, g.pad_bottom, "H");
  const std::int64_t Wo = conv_out_dim(W, kw, g.stride, g.pad_left, g.pad_right, "W");
  Tensor out(Shape(N, Cout, Ho, Wo));
  const std::int64_t ckk = Cin * kh * kw;
  std::vector<double> col(static_cast<size_t>(Ho * Wo * ckk));
  CMapMat wm(w.v.data(), Cout, ckk);
  for (std::int64_t n = 0; n < N; ++n) {
    im2col(x, n, kh, kw, g, Ho, Wo, col.data());
    CMapMat cm(col.data(), Ho * Wo, ckk);
    MapMat om(out.v.data() + n * Cout * Ho * Wo, Cout, Ho * Wo);
    om.noalias() = wm * cm.transpose();
  }
  return out;
}

Tensor conv2d_transpose_fwd(const Tensor& u, const Tensor& w, ConvGeom g, std::int64_t out_h,
                            std::int64_t out_w) {
  const std::int64_t N = u.shape.n(), Cout = u.shape.c(), Hu = u.shape.h(), Wu = u.shape.w();
  const std::int64_t Cin = w.shape.c(), kh = w.shape.h(), kw = w.shape.w();
  if (w.shape.n() != Cout)
    throw std::invalid_argument("conv2d_transpose: channel mismatch, input C=" +
                                std::to_string(Cout) + " vs kernel Cout=" +
                                std::to_string(w.shape.n()));
  // the geometry must be the adjoint of a conv that maps (out_h,out_w)->(Hu,Wu)
  if (conv_out_dim(out_h, kh, g.stride, g.pad_top, g.pad_bottom, "H") != Hu ||
      conv_out_dim(out_w, kw, g.stride, g.pad_left, g.pad_right, "W") != Wu)
    throw std::invalid_argument("conv2d_transpose: output size " + std::to_string(out_h) + "x" +
                                std::to_string(out_w) + " inconsistent with input " +
                                std::to_string(Hu) + "x" + std::to_string(Wu));
  Tensor out(Shape(N, Cin, out_h, out_w));
  const std::int64_t ckk = Cin * kh * kw;
  std::vector<double> col(static_cast<size_t>(Hu * Wu * ckk));
  CMapMat wm(w.v.data(), Cout, ckk);
  for (std::int64_t n = 0; n < N; ++n) {
    CMapMat um(u.v.data() + n * Cout * Hu * Wu, Cout, Hu * Wu);
    MapMat cm(col.data(), Hu * Wu, ckk);
    cm.noalias() = um.transpose() * wm;
    col2im_add(col.data(), kh, kw, g, Hu, Wu, out, n);
  }
  return out;
}

Tensor conv2d_wgrad_fwd(const Tensor& x, const Tensor& gy, std::int64_t kh, std::int64_t kw,
                        ConvGeom g) {
  const std::int64_t N = x.shape.n(), Cin = x.shape.c(), H = x.shape.h(), W = x.shape.w();
  const std::int64_t Cout = gy.shape.c(), Ho = gy.shape.h(), Wo = gy.shape.w();
  if (gy.shape.n() != N) throw std::invalid_argument("conv2d_wgrad: batch mismatch");
  if (conv_out_dim(H, kh, g.stride, g.pad_top, g.pad_bottom, "H") != Ho ||
      conv_out_dim(W, kw, g.stride, g.pad_left, g.pad_right, "W") != Wo)
    throw std::invalid_argument("conv2d_wgrad: grad spatial size inconsistent with input");
  Tensor out(Shape(Cout, Cin, kh, kw));
  const std::int64_t ckk = Cin * kh * kw;
  std::vector<double> col(static_cast<size_t>(Ho * Wo * ckk));
  MapMat om(out.v.data(), Cout, ckk);
  for (std::int64_t n = 0; n < N; ++n) {
    im2col(x, n, kh, kw, g, Ho, Wo, col.data());
    CMapMat cm(col.data(), Ho * Wo, ckk);
    CMapMat gm(gy.v.data() + n * Cout * Ho * Wo, Cout, Ho * Wo);
    om.noalias() += gm * cm;
  }
  return out;
}

}  // namespace

Value conv2d(const Value& x, const Value& w, ConvGeom geom) {
  Tensor out = conv2d_fwd(x->val, w->val, geom);
  std::int64_t kh = w->shape().h(), kw = w->shape().w();
  std::int64_t xh = x->shape().h(), xw = x->shape().w();
  return make_node(std::move(out), {x, w},
                   [geom, kh, kw, xh, xw](Node& self, const Value& g, const std::vector<bool>& needs) {
                     std::vector<Value> gs(2);
                     if (needs[0]) gs[0] = conv2d_transpose(g, self.parents[1], geom, xh, xw);
                     if (needs[1]) gs[1] = conv2d_wgrad(self.parents[0], g, kh, kw, geom);
                     return gs;
                   },
                   "conv2d");
}

Value conv2d_transpose(const Value& u, const Value& w, ConvGeom geom, std::int64_t out_h,
                       std::int64_t out_w) {
  Tensor out = conv2d_transpose_fwd(u->val, w->val, geom, out_h, out_w);
  std::int64_t kh = w->shape().h(), kw = w->shape().w();
  return make_node(std::move(out), {u, w},
                   [geom, kh, kw](Node& self, const Value& g, const std::vector<bool>& needs) {
                     std::vector<Value> gs(2);
                     if (needs[0]) gs[0] = conv2d(g, self.parents[1], geom);
                     if (needs[1]) gs[1] = conv2d_wgrad(g, self.parents[0], kh, kw, geom);
                     return gs;
                   },
                   "conv2d_transpose");
}

Value conv2d_wgrad(const Value& x, const Value& gy, std::int64_t kh, std::int64_t kw,
                   ConvGeom geom) {
  Tensor out = conv2d_wgrad_fwd(x->val, gy->val, kh, kw, geom);
  std::int64_t xh = x->shape().h(), xw = x->shape().w();
  return make_node(std::move(out), {x, gy},
                   [geom, kh, kw, xh, xw](Node& self, const Value& g, const std::vector<bool>& needs) {
                     // bilinear in (x, gy); g plays the role of the kernel
                     std::vector<Value> gs(2);
                     if (needs[0]) gs[0] = conv2d_transpose(self.parents[1], g, geom, xh, xw);
                     if (needs[1]) gs[1] = conv2d(self.parents[0], g, geom);
                     return gs;
                   },
                   "conv2d_wgrad");
}

// ------------------------------------------------------------------- pooling

static Value avg_unpool2(const Value& u, std::int64_t out_h, std::int64_t out_w);

Value avg_pool2(const Value& x) {
  const Shape& s = x->shape();
  if (s.h() % 2 || s.w() % 2)
    throw std::invalid_argument("avg_pool2: odd spatial size " + s.str());
  Tensor out(Shape(s.n(), s.c(), s.h() / 2, s.w() / 2));
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c)
      for (std::int64_t y = 0; y < s.h() / 2; ++y)
        for (std::int64_t xx = 0; xx < s.w() / 2; ++xx)
          out.at(n, c, y, xx) =
              0.25 * (x->val.at(n, c, 2 * y, 2 * xx) + x->val.at(n, c, 2 * y, 2 * xx + 1) +
                      x->val.at(n, c, 2 * y + 1, 2 * xx) + x->val.at(n, c, 2 * y + 1, 2 * xx + 1));
  std::int64_t H = s.h(), W = s.w();
  return make_node(std::move(out), {x},
                   [H, W](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? avg_unpool2(g, H, W) : nullptr};
                   },
                   "avg_pool2");
}

static Value avg_unpool2(const Value& u, std::int64_t out_h, std::int64_t out_w) {
  const Shape& s = u->shape();
  Tensor out(Shape(s.n(), s.c(), out_h, out_w));
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c)
      for (std::int64_t y = 0; y < s.h(); ++y)
        for (std::int64_t xx = 0; xx < s.w(); ++xx) {
          double q = 0.25 * u->val.at(n, c, y, xx);
          out.at(n, c, 2 * y, 2 * xx) = q;
          out.at(n, c, 2 * y, 2 * xx + 1) = q;
          out.at(n, c, 2 * y + 1, 2 * xx) = q;
          out.at(n, c, 2 * y + 1, 2 * xx + 1) = q;
        }
  return make_node(std::move(out), {u},
                   [](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? avg_pool2(g) : nullptr};
                   },
                   "avg_unpool2");
}

// ------------------------------------------------------------------- bicubic

static Value bicubic_adj(const Value& u, std::int64_t in_h, std::int64_t in_w);

Value bicubic_up2(const Value& x) {
  const Shape& s = x->shape();
  Tensor out(Shape(s.n(), s.c(), s.h() * 2, s.w() * 2));
  Array2D plane(s.h(), s.w());
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c) {
      for (std::int64_t y = 0; y < s.h(); ++y)
        for (std::int64_t xx = 0; xx < s.w(); ++xx) plane.at(y, xx) = x->val.at(n, c, y, xx);
      Array2D up = upsample2x(plane, ResampleMethod::bicubic);
      for (std::int64_t y = 0; y < up.rows; ++y)
        for (std::int64_t xx = 0; xx < up.cols; ++xx) out.at(n, c, y, xx) = up.at(y, xx);
    }
  std::int64_t H = s.h(), W = s.w();
  return make_node(std::move(out), {x},
                   [H, W](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? bicubic_adj(g, H, W) : nullptr};
                   },
                   "bicubic_up2");
}

static Value bicubic_adj(const Value& u, std::int64_t in_h, std::int64_t in_w) {
  const Shape& s = u->shape();
  Tensor out(Shape(s.n(), s.c(), in_h, in_w));
  Array2D plane(s.h(), s.w());
  for (std::int64_t n = 0; n < s.n(); ++n)
    for (std::int64_t c = 0; c < s.c(); ++c) {
      for (std::int64_t y = 0; y < s.h(); ++y)
        for (std::int64_t xx = 0; xx < s.w(); ++xx) plane.at(y, xx) = u->val.at(n, c, y, xx);
      Array2D down = bicubic_up2_adjoint(plane, in_h, in_w);
      for (std::int64_t y = 0; y < down.rows; ++y)
        for (std::int64_t xx = 0; xx < down.cols; ++xx) out.at(n, c, y, xx) = down.at(y, xx);
    }
  return make_node(std::move(out), {u},
                   [](Node&, const Value& g, const std::vector<bool>& needs) {
                     return std::vector<Value>{needs[0] ? bicubic_up2(g) : nullptr};
                   },
                   "bicubic_adj");
}

}  // namespace gancircle::ad
