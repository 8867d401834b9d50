#pragma once

#include <string>

#include "gancircle/image.hpp"

namespace gancircle {

enum class ResampleMethod { nearest, bilinear, bicubic, lanczos };

ResampleMethod parse_resample_method(const std::string& name);  // throws on unknown
std::string resample_method_name(ResampleMethod m);

// x2 upsampling, one implementation shared by the data pipeline, the metric
// baselines and the generator's bicubic skip path.
//
// Conventions (fixed): nearest duplicates every pixel into a 2x2 block; the
// other kernels sample at half-pixel-aligned positions (output o maps to
// input coordinate o/2 - 0.25), with clamped (replicated) borders. Bicubic is
// the Keys kernel with a = -0.5; Lanczos is 3-lobed with per-phase weights
// normalized to sum 1 so constants are reproduced exactly.
Array2D upsample2x(const Array2D& img, ResampleMethod method);

// Adjoint of the bicubic x2 operator (needed for backprop through the skip).
Array2D bicubic_up2_adjoint(const Array2D& upstream, std::int64_t in_rows, std::int64_t in_cols);

// 2x2 area average ("detector binning") and plain decimation, used by the
// LR simulator.
Array2D downsample2x_mean(const Array2D& img);
Array2D downsample2x_decimate(const Array2D& img);

}  // namespace gancircle
