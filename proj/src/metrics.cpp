#include "gancircle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gancircle {

double psnr(const Array2D& ref, const Array2D& test, double peak) {
  if (!ref.same_shape(test))
    throw std::invalid_argument("psnr: shape mismatch " + std::to_string(ref.rows) + "x" +
                                std::to_string(ref.cols) + " vs " + std::to_string(test.rows) +
                                "x" + std::to_string(test.cols));
  if (!(peak > 0)) throw std::invalid_argument("psnr: peak must be positive");
  double mse = 0;
  for (size_t i = 0; i < ref.v.size(); ++i) {
    double d = ref.v[i] - test.v[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.numel());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Array2D& ref, const Array2D& test, const SsimParams& p) {
  if (!ref.same_shape(test)) throw std::invalid_argument("ssim: shape mismatch");
  const int W = p.window;
  if (ref.rows < W || ref.cols < W)
    throw std::invalid_argument("ssim: image smaller than the " + std::to_string(W) + "x" +
                                std::to_string(W) + " window");
  // normalized separable gaussian window
  std::vector<double> g(static_cast<size_t>(W));
  double gsum = 0;
  for (int i = 0; i < W; ++i) {
    double d = i - (W - 1) / 2.0;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2 * p.sigma * p.sigma));
    gsum += g[static_cast<size_t>(i)];
  }
  for (double& x : g) x /= gsum;

  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

  double acc = 0;
  std::int64_t count = 0;
  for (std::int64_t r = 0; r + W <= ref.rows; ++r) {
    for (std::int64_t c = 0; c + W <= ref.cols; ++c) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < W; ++i) {
        for (int j = 0; j < W; ++j) {
          double w = g[static_cast<size_t>(i)] * g[static_cast<size_t>(j)];
          double a = ref.at(r + i, c + j);
          double b = test.at(r + i, c + j);
          mx += w * a;
          my += w * b;
          xx += w * a * a;
          yy += w * b * b;
          xy += w * a * b;
        }
      }
      double vx = xx - mx * mx;
      double vy = yy - my * my;
      double cov = xy - mx * my;
      double num = (2 * mx * my + c1) * (2 * cov + c2);
      double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      acc += num / den;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

namespace {

// binomial [1 4 6 4 1]/16 blur + decimate, clamped borders
Array2D pyramid_down(const Array2D& img) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Array2D tmp(img.rows, img.cols);
  for (std::int64_t r = 0; r < img.rows; ++r)
    for (std::int64_t c = 0; c < img.cols; ++c) {
      double a = 0;
      for (int t = -2; t <= 2; ++t)
        a += k[t + 2] * img.at(r, std::clamp<std::int64_t>(c + t, 0, img.cols - 1));
      tmp.at(r, c) = a;
    }
  Array2D blur(img.rows, img.cols);
  for (std::int64_t r = 0; r < img.rows; ++r)
    for (std::int64_t c = 0; c < img.cols; ++c) {
      double a = 0;
      for (int t = -2; t <= 2; ++t)
        a += k[t + 2] * tmp.at(std::clamp<std::int64_t>(r + t, 0, img.rows - 1), c);
      blur.at(r, c) = a;
    }
  Array2D out(img.rows / 2, img.cols / 2);
  for (std::int64_t r = 0; r < out.rows; ++r)
    for (std::int64_t c = 0; c < out.cols; ++c) out.at(r, c) = blur.at(2 * r, 2 * c);
  return out;
}

Array2D valid_conv3(const Array2D& img, const double k[3][3]) {
  Array2D out(img.rows - 2, img.cols - 2);
  for (std::int64_t r = 0; r < out.rows; ++r)
    for (std::int64_t c = 0; c < out.cols; ++c) {
      double a = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a += k[i][j] * img.at(r + i, c + j);
      out.at(r, c) = a;
    }
  return out;
}

// information in one subband pair: gain+noise model on sliding 3x3 windows
double subband_information(const Array2D& C, const Array2D& D) {
  constexpr double kEps = 1e-10;
  double info = 0;
  for (std::int64_t r = 0; r + 3 <= C.rows; ++r) {
    for (std::int64_t c = 0; c + 3 <= C.cols; ++c) {
      double mc = 0, md = 0, cc = 0, dd = 0, cd = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double a = C.at(r + i, c + j);
          double b = D.at(r + i, c + j);
          mc += a;
          md += b;
          cc += a * a;
          dd += b * b;
          cd += a * b;
        }
      mc /= 9;
      md /= 9;
      double var_c = std::max(cc / 9 - mc * mc, 0.0);
      double var_d = std::max(dd / 9 - md * md, 0.0);
      double cov = cd / 9 - mc * md;
      double gain = cov / (var_c + kEps);
      double noise = std::max(var_d - gain * cov, kEps);
      info += std::log2(1.0 + gain * gain * var_c / noise);
    }
  }
  return info;
}

}  // namespace

double ifc(const Array2D& ref, const Array2D& test) {
  if (!ref.same_shape(test)) throw std::invalid_argument("ifc: shape mismatch");
  if (ref.rows < 32 || ref.cols < 32)
    throw std::invalid_argument("ifc: image too small for the 3-scale decomposition (min 32)");

  // transpose-closed oriented derivative bands
  static const double kH[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const double kV[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  static const double kD1[3][3] = {{0, 1, 2}, {-1, 0, 1}, {-2, -1, 0}};
  static const double kD2[3][3] = {{0, -1, -2}, {1, 0, -1}, {2, 1, 0}};

  Array2D r = ref, t = test;
  double total = 0;
  for (int scale = 0; scale < 3; ++scale) {
    if (scale > 0) {
      r = pyramid_down(r);
      t = pyramid_down(t);
    }
    for (const auto& k : {kH, kV, kD1, kD2})
      total += subband_information(valid_conv3(r, k), valid_conv3(t, k));
  }
  return total;
}

Array2D baseline_upsample(const Array2D& lr, ResampleMethod method) {
  return upsample2x(lr, method);
}

// ------------------------------------------------------------------ reports

MetricAggregate MetricReport::aggregate() const {
  MetricAggregate a;
  if (rows.empty()) return a;
  double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    a.mean_psnr += r.psnr_db;
    a.mean_ssim += r.ssim;
    a.mean_ifc += r.ifc;
  }
  a.mean_psnr /= n;
  a.mean_ssim /= n;
  a.mean_ifc /= n;
  for (const auto& r : rows) {
    a.std_psnr += (r.psnr_db - a.mean_psnr) * (r.psnr_db - a.mean_psnr);
    a.std_ssim += (r.ssim - a.mean_ssim) * (r.ssim - a.mean_ssim);
    a.std_ifc += (r.ifc - a.mean_ifc) * (r.ifc - a.mean_ifc);
  }
  a.std_psnr = std::sqrt(a.std_psnr / n);
  a.std_ssim = std::sqrt(a.std_ssim / n);
  a.std_ifc = std::sqrt(a.std_ifc / n);
  return a;
}

static std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string MetricReport::csv() const {
  std::string out = "image_id,method,psnr_db,ssim,ifc\n";
  for (const auto& r : rows)
    out += r.image_id + "," + method + "," + fmt(r.psnr_db) + "," + fmt(r.ssim) + "," +
           fmt(r.ifc) + "\n";
  return out;
}

MetricReport evaluate(const std::vector<std::pair<std::string, Array2D>>& ref,
                      const std::vector<std::pair<std::string, Array2D>>& test,
                      const std::string& method_label, double psnr_peak) {
  if (ref.empty()) throw std::invalid_argument("evaluate: empty reference set");
  std::map<std::string, const Array2D*> ref_by_id;
  for (const auto& [id, img] : ref) ref_by_id[id] = &img;

  MetricReport rep;
  rep.method = method_label;
  for (const auto& [id, img] : test) {
    auto it = ref_by_id.find(id);
    if (it == ref_by_id.end()) {
      rep.errors.push_back(id + ": no matching reference image");
      continue;
    }
    try {
      MetricRow row;
      row.image_id = id;
      row.psnr_db = psnr(*it->second, img, psnr_peak);
      row.ssim = ssim(*it->second, img);
      row.ifc = ifc(*it->second, img);
      rep.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      rep.errors.push_back(id + ": " + e.what());
    }
  }
  return rep;
}

std::string summary_table(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %12s %12s %12s %8s\n", "method", "psnr_db", "ssim",
                "ifc", "images");
  os << line;
  for (const auto& rep : reports) {
    MetricAggregate a = rep.aggregate();
    std::snprintf(line, sizeof line, "%-16s %6.3f±%-5.3f %6.4f±%-5.4f %6.3f±%-5.3f %8zu\n",
                  rep.method.c_str(), a.mean_psnr, a.std_psnr, a.mean_ssim, a.std_ssim, a.mean_ifc,
                  a.std_ifc, rep.rows.size());
    os << line;
  }
  return os.str();
}

}  // namespace gancircle
