#pragma once

#include <string>
#include <vector>

#include "gancircle/image.hpp"
#include "gancircle/resample.hpp"

namespace gancircle {

// 10*log10(peak^2/MSE), capped at the 100 dB sentinel (identical images
// report exactly 100).
double psnr(const Array2D& ref, const Array2D& test, double peak = 1.0);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01, k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean local SSIM over valid (fully interior) Gaussian windows.
double ssim(const Array2D& ref, const Array2D& test, const SsimParams& params = {});

// Information fidelity under a Gaussian scale mixture view of oriented
// subband coefficients. Decomposition is fixed for this toolkit: 3 scales of
// a binomial pyramid, 4 oriented 3x3 derivative bands per scale, gain+noise
// fitted on sliding 3x3 coefficient neighborhoods. Scores are comparable
// across runs of this implementation only.
double ifc(const Array2D& ref, const Array2D& test);

// x2 upsampling baselines; same kernels as the data pipeline.
Array2D baseline_upsample(const Array2D& lr, ResampleMethod method);

struct MetricRow {
  std::string image_id;
  double psnr_db = 0, ssim = 0, ifc = 0;
};

struct MetricAggregate {
  double mean_psnr = 0, std_psnr = 0;
  double mean_ssim = 0, std_ssim = 0;
  double mean_ifc = 0, std_ifc = 0;
};

struct MetricReport {
  std::string method;
  std::vector<MetricRow> rows;
  std::vector<std::string> errors;  // per-image failures; evaluation continues

  MetricAggregate aggregate() const;  // population mean/std recomputed from rows
  std::string csv() const;            // image_id,method,psnr_db,ssim,ifc
};

// Scores every (id, image) in `test` against the same id in `ref`. Missing
// ids or shape mismatches are recorded in errors without aborting the batch.
MetricReport evaluate(const std::vector<std::pair<std::string, Array2D>>& ref,
                      const std::vector<std::pair<std::string, Array2D>>& test,
                      const std::string& method_label, double psnr_peak = 1.0);

// Table II style summary: one line per method on stdout-bound text.
std::string summary_table(const std::vector<MetricReport>& reports);

}  // namespace gancircle
