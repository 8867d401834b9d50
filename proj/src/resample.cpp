#include "gancircle/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gancircle {

ResampleMethod parse_resample_method(const std::string& name) {
  if (name == "nearest") return ResampleMethod::nearest;
  if (name == "bilinear") return ResampleMethod::bilinear;
  if (name == "bicubic") return ResampleMethod::bicubic;
  if (name == "lanczos") return ResampleMethod::lanczos;
  throw std::invalid_argument("unknown resample method: " + name);
}

std::string resample_method_name(ResampleMethod m) {
  switch (m) {
    case ResampleMethod::nearest: return "nearest";
    case ResampleMethod::bilinear: return "bilinear";
    case ResampleMethod::bicubic: return "bicubic";
    case ResampleMethod::lanczos: return "lanczos";
  }
  return "?";
}

namespace {

double keys_cubic(double t) {  // a = -0.5
  t = std::abs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

double lanczos3(double t) {
  t = std::abs(t);
  if (t < 1e-12) return 1.0;
  if (t >= 3.0) return 0.0;
  double pt = M_PI * t;
  return 3.0 * std::sin(pt) * std::sin(pt / 3.0) / (pt * pt);
}

// Per-phase taps of a separable x2 kernel. Output sample 2m+phase reads input
// samples m+offset[k] (clamped) with weight w[k].
struct Phase {
  std::vector<int> offset;
  std::vector<double> w;
};

struct Kernel1D {
  Phase even, odd;
};

Kernel1D make_kernel(ResampleMethod method) {
  Kernel1D k;
  auto fill = [&](Phase& ph, double frac, int radius, double (*f)(double), bool normalize) {
    // input coordinate of the output sample is m + frac
    double sum = 0.0;
    for (int j = -radius; j <= radius; ++j) {
      double wgt = f(frac - j);
      if (wgt == 0.0 && j != 0) continue;
      ph.offset.push_back(j);
      ph.w.push_back(wgt);
      sum += wgt;
    }
    if (normalize && sum != 0.0)
      for (double& x : ph.w) x /= sum;
  };
  switch (method) {
    case ResampleMethod::nearest:
      k.even = {{0}, {1.0}};
      k.odd = {{0}, {1.0}};
      break;
    case ResampleMethod::bilinear: {
      auto tri = [](double t) { return std::max(0.0, 1.0 - std::abs(t)); };
      fill(k.even, -0.25, 1, +tri, false);
      fill(k.odd, +0.25, 1, +tri, false);
      break;
    }
    case ResampleMethod::bicubic:
      fill(k.even, -0.25, 2, &keys_cubic, false);
      fill(k.odd, +0.25, 2, &keys_cubic, false);
      break;
    case ResampleMethod::lanczos:
      fill(k.even, -0.25, 3, &lanczos3, true);
      fill(k.odd, +0.25, 3, &lanczos3, true);
      break;
  }
  return k;
}

// rows stay, columns double
Array2D upsample_cols(const Array2D& in, const Kernel1D& k) {
  Array2D out(in.rows, in.cols * 2);
  for (std::int64_t r = 0; r < in.rows; ++r) {
    for (std::int64_t m = 0; m < in.cols; ++m) {
      for (int phase = 0; phase < 2; ++phase) {
        const Phase& ph = phase == 0 ? k.even : k.odd;
        double acc = 0.0;
        for (size_t t = 0; t < ph.w.size(); ++t) {
          std::int64_t j = std::clamp<std::int64_t>(m + ph.offset[t], 0, in.cols - 1);
          acc += ph.w[t] * in.at(r, j);
        }
        out.at(r, 2 * m + phase) = acc;
      }
    }
  }
  return out;
}

Array2D transpose(const Array2D& in) {
  Array2D out(in.cols, in.rows);
  for (std::int64_t r = 0; r < in.rows; ++r)
    for (std::int64_t c = 0; c < in.cols; ++c) out.at(c, r) = in.at(r, c);
  return out;
}

// adjoint of upsample_cols: scatter upstream back onto the narrow grid
Array2D upsample_cols_adjoint(const Array2D& up, std::int64_t in_cols, const Kernel1D& k) {
  Array2D out(up.rows, in_cols);
  for (std::int64_t r = 0; r < up.rows; ++r) {
    for (std::int64_t m = 0; m < in_cols; ++m) {
      for (int phase = 0; phase < 2; ++phase) {
        const Phase& ph = phase == 0 ? k.even : k.odd;
        double u = up.at(r, 2 * m + phase);
        for (size_t t = 0; t < ph.w.size(); ++t) {
          std::int64_t j = std::clamp<std::int64_t>(m + ph.offset[t], 0, in_cols - 1);
          out.at(r, j) += ph.w[t] * u;
        }
      }
    }
  }
  return out;
}

}  // namespace

Array2D upsample2x(const Array2D& img, ResampleMethod method) {
  Kernel1D k = make_kernel(method);
  // separable: widen columns, transpose, widen the other axis, transpose back
  Array2D a = upsample_cols(img, k);
  Array2D b = upsample_cols(transpose(a), k);
  return transpose(b);
}

Array2D bicubic_up2_adjoint(const Array2D& upstream, std::int64_t in_rows, std::int64_t in_cols) {
  Kernel1D k = make_kernel(ResampleMethod::bicubic);
  // reverse order of the forward passes
  Array2D b = upsample_cols_adjoint(transpose(upstream), in_rows, k);
  Array2D a = upsample_cols_adjoint(transpose(b), in_cols, k);
  return a;
}

Array2D downsample2x_mean(const Array2D& img) {
  if (img.rows % 2 || img.cols % 2)
    throw std::invalid_argument("downsample2x: odd dimensions " + std::to_string(img.rows) + "x" +
                                std::to_string(img.cols));
  Array2D out(img.rows / 2, img.cols / 2);
  for (std::int64_t r = 0; r < out.rows; ++r)
    for (std::int64_t c = 0; c < out.cols; ++c)
      out.at(r, c) = 0.25 * (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) +
                             img.at(2 * r + 1, 2 * c) + img.at(2 * r + 1, 2 * c + 1));
  return out;
}

Array2D downsample2x_decimate(const Array2D& img) {
  if (img.rows % 2 || img.cols % 2)
    throw std::invalid_argument("downsample2x: odd dimensions " + std::to_string(img.rows) + "x" +
                                std::to_string(img.cols));
  Array2D out(img.rows / 2, img.cols / 2);
  for (std::int64_t r = 0; r < out.rows; ++r)
    for (std::int64_t c = 0; c < out.cols; ++c) out.at(r, c) = img.at(2 * r, 2 * c);
  return out;
}

}  // namespace gancircle
