#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gancircle {

// Dense row-major tensor of doubles, canonical NCHW layout.
// Rank-2 data (e.g. score matrices) uses trailing singleton dims.
struct Shape {
  std::array<std::int64_t, 4> d{1, 1, 1, 1};

  Shape() = default;
  Shape(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) : d{n, c, h, w} {}

  std::int64_t n() const { return d[0]; }
  std::int64_t c() const { return d[1]; }
  std::int64_t h() const { return d[2]; }
  std::int64_t w() const { return d[3]; }
  std::int64_t numel() const { return d[0] * d[1] * d[2] * d[3]; }
  std::int64_t operator[](int i) const { return d[i]; }

  bool operator==(const Shape& o) const { return d == o.d; }
  bool operator!=(const Shape& o) const { return d != o.d; }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < 4; ++i) s += std::to_string(d[i]) + (i < 3 ? "," : "]");
    return s;
  }
};

struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(static_cast<size_t>(s.numel()), 0.0) {}
  Tensor(Shape s, double fill) : shape(s), v(static_cast<size_t>(s.numel()), fill) {}

  std::int64_t numel() const { return shape.numel(); }

  double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return v[static_cast<size_t>(((n * shape.c() + c) * shape.h() + h) * shape.w() + w)];
  }
  double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return v[static_cast<size_t>(((n * shape.c() + c) * shape.h() + h) * shape.w() + w)];
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, double x) { return Tensor(s, x); }
  static Tensor scalar(double x) { return Tensor(Shape(1, 1, 1, 1), x); }

  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item on non-scalar " + shape.str());
    return v[0];
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape.str() +
                                " vs " + b.shape.str());
}

}  // namespace gancircle
