#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gancircle {

struct Array2D {
  std::int64_t rows = 0, cols = 0;
  std::vector<double> v;

  Array2D() = default;
  Array2D(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<size_t>(r * c), fill) {}

  double& at(std::int64_t r, std::int64_t c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(std::int64_t r, std::int64_t c) const { return v[static_cast<size_t>(r * cols + c)]; }
  std::int64_t numel() const { return rows * cols; }
  bool same_shape(const Array2D& o) const { return rows == o.rows && cols == o.cols; }
};

using HuWindow = std::pair<double, double>;  // (low, high) in Hounsfield units

// One 2D CT slice in normalized [0,1] intensity plus provenance metadata.
struct ImageSlice {
  Array2D pixels;
  std::optional<HuWindow> hu_window;
  std::pair<double, double> spacing{1.0, 1.0};
  std::string slice_id;
  char domain = 'Y';                      // 'X' = LR, 'Y' = HR
  std::optional<std::string> pairing_id;  // shared by paired X/Y slices
};

// Affine HU -> [0,1] map, clamped at the window ends. Throws on low >= high.
Array2D hu_to_unit(const Array2D& raw_hu, HuWindow window);
// Inverse map, for re-expanding outputs into the recorded HU window.
Array2D unit_to_hu(const Array2D& unit, HuWindow window);

// 16-bit grayscale image IO. `.pgm` is binary P5 with maxval 65535 (big-endian
// samples, per the netpbm spec); `.raw` is little-endian uint16 with a
// `<path>.dims` sidecar holding "rows cols". Intensities map linearly between
// [0,1] and [0,65535]; round-tripping a written file is bit-exact.
void write_image_u16(const std::string& path, const Array2D& img);
Array2D read_image_u16(const std::string& path);

// Raw little-endian int16 HU output with the same `.dims` sidecar.
void write_raw_hu_i16(const std::string& path, const Array2D& hu);

}  // namespace gancircle
