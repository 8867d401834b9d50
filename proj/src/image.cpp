#include "gancircle/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gancircle {

Array2D hu_to_unit(const Array2D& raw_hu, HuWindow window) {
  auto [low, high] = window;
  if (!(low < high))
    throw std::invalid_argument("hu_to_unit: degenerate window [" + std::to_string(low) + "," +
                                std::to_string(high) + "]");
  Array2D out(raw_hu.rows, raw_hu.cols);
  double scale = 1.0 / (high - low);
  for (size_t i = 0; i < raw_hu.v.size(); ++i)
    out.v[i] = std::clamp((raw_hu.v[i] - low) * scale, 0.0, 1.0);
  return out;
}

Array2D unit_to_hu(const Array2D& unit, HuWindow window) {
  auto [low, high] = window;
  if (!(low < high)) throw std::invalid_argument("unit_to_hu: degenerate window");
  Array2D out(unit.rows, unit.cols);
  for (size_t i = 0; i < unit.v.size(); ++i) out.v[i] = low + unit.v[i] * (high - low);
  return out;
}

static bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

static std::uint16_t to_u16(double x) {
  double c = std::clamp(x, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

static void write_pgm16(const std::string& path, const Array2D& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P5\n" << img.cols << " " << img.rows << "\n65535\n";
  std::vector<unsigned char> buf(static_cast<size_t>(img.numel()) * 2);
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    std::uint16_t u = to_u16(img.v[static_cast<size_t>(i)]);
    buf[2 * i] = static_cast<unsigned char>(u >> 8);  // big-endian per PGM spec
    buf[2 * i + 1] = static_cast<unsigned char>(u & 0xff);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

static Array2D read_pgm16(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error("not a binary PGM: " + path);
  auto next_int = [&](const char* what) {
    // skip whitespace and '#' comment lines
    int c = f.peek();
    while (c == '#' || std::isspace(c)) {
      if (c == '#') f.ignore(1 << 20, '\n');
      else f.get();
      c = f.peek();
    }
    std::int64_t x;
    if (!(f >> x)) throw std::runtime_error(std::string("bad PGM ") + what + ": " + path);
    return x;
  };
  std::int64_t w = next_int("width"), h = next_int("height"), maxv = next_int("maxval");
  if (maxv != 65535) throw std::runtime_error("PGM must be 16-bit (maxval 65535): " + path);
  f.get();  // single whitespace after maxval
  Array2D img(h, w);
  std::vector<unsigned char> buf(static_cast<size_t>(img.numel()) * 2);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated PGM: " + path);
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    std::uint16_t u = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    img.v[static_cast<size_t>(i)] = static_cast<double>(u) / 65535.0;
  }
  return img;
}

static void write_raw16(const std::string& path, const Array2D& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  std::vector<unsigned char> buf(static_cast<size_t>(img.numel()) * 2);
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    std::uint16_t u = to_u16(img.v[static_cast<size_t>(i)]);
    buf[2 * i] = static_cast<unsigned char>(u & 0xff);  // little-endian
    buf[2 * i + 1] = static_cast<unsigned char>(u >> 8);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  std::ofstream d(path + ".dims");
  d << img.rows << " " << img.cols << "\n";
  if (!f || !d) throw std::runtime_error("short write: " + path);
}

static Array2D read_raw16(const std::string& path) {
  std::ifstream d(path + ".dims");
  if (!d) throw std::runtime_error("missing sidecar: " + path + ".dims");
  std::int64_t rows, cols;
  if (!(d >> rows >> cols)) throw std::runtime_error("bad sidecar: " + path + ".dims");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  Array2D img(rows, cols);
  std::vector<unsigned char> buf(static_cast<size_t>(img.numel()) * 2);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated raw file: " + path);
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    std::uint16_t u = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    img.v[static_cast<size_t>(i)] = static_cast<double>(u) / 65535.0;
  }
  return img;
}

void write_image_u16(const std::string& path, const Array2D& img) {
  if (ends_with(path, ".pgm"))
    write_pgm16(path, img);
  else if (ends_with(path, ".raw"))
    write_raw16(path, img);
  else
    throw std::invalid_argument("unsupported image extension (want .pgm or .raw): " + path);
}

Array2D read_image_u16(const std::string& path) {
  if (ends_with(path, ".pgm")) return read_pgm16(path);
  if (ends_with(path, ".raw")) return read_raw16(path);
  throw std::invalid_argument("unsupported image extension (want .pgm or .raw): " + path);
}

void write_raw_hu_i16(const std::string& path, const Array2D& hu) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  std::vector<unsigned char> buf(static_cast<size_t>(hu.numel()) * 2);
  for (std::int64_t i = 0; i < hu.numel(); ++i) {
    double c = std::clamp(hu.v[static_cast<size_t>(i)], -32768.0, 32767.0);
    std::int16_t s = static_cast<std::int16_t>(std::lround(c));
    std::uint16_t u = static_cast<std::uint16_t>(s);
    buf[2 * i] = static_cast<unsigned char>(u & 0xff);
    buf[2 * i + 1] = static_cast<unsigned char>(u >> 8);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  std::ofstream d(path + ".dims");
  d << hu.rows << " " << hu.cols << "\n";
  if (!f || !d) throw std::runtime_error("short write: " + path);
}

}  // namespace gancircle
