#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "docparse/error.hpp"

namespace docparse {

/// Half-open pixel rectangle [x1, x2) x [y1, y2).
struct Rect {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  bool valid() const { return x1 < x2 && y1 < y2; }
  long long area() const { return valid() ? static_cast<long long>(width()) * height() : 0; }

  Rect clamped_to(const Rect& bounds) const {
    return Rect{std::clamp(x1, bounds.x1, bounds.x2), std::clamp(y1, bounds.y1, bounds.y2),
                std::clamp(x2, bounds.x1, bounds.x2), std::clamp(y2, bounds.y1, bounds.y2)};
  }
  Rect intersect(const Rect& o) const {
    return Rect{std::max(x1, o.x1), std::max(y1, o.y1), std::min(x2, o.x2), std::min(y2, o.y2)};
  }
  Rect translated(int dx, int dy) const { return Rect{x1 + dx, y1 + dy, x2 + dx, y2 + dy}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Interleaved 8-bit RGB buffer, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {}) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill.r;
      data[i + 1] = fill.g;
      data[i + 2] = fill.b;
    }
  }

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return Rgb{data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    data[i] = c.r;
    data[i + 1] = c.g;
    data[i + 2] = c.b;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline RgbImage crop(const RgbImage& img, const Rect& rect) {
  const Rect r = rect.clamped_to(Rect{0, 0, img.width, img.height});
  RgbImage out(std::max(r.width(), 0), std::max(r.height(), 0));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.set(x, y, img.at(r.x1 + x, r.y1 + y));
  return out;
}

/// Rotates clockwise by a multiple of 90 degrees.
inline RgbImage rotate_clockwise(const RgbImage& img, int degrees) {
  const int quarter = ((degrees % 360) + 360) % 360 / 90;
  if (quarter == 0) return img;
  const bool swap = quarter % 2 == 1;
  RgbImage out(swap ? img.height : img.width, swap ? img.width : img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      int nx = x, ny = y;
      switch (quarter) {
        case 1: nx = img.height - 1 - y; ny = x; break;
        case 2: nx = img.width - 1 - x; ny = img.height - 1 - y; break;
        case 3: nx = y; ny = img.width - 1 - x; break;
      }
      out.set(nx, ny, img.at(x, y));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Binary PPM (P6, maxval 255).

inline RgbImage read_ppm(std::istream& in) {
  const auto fail = [](const std::string& why) -> RgbImage { throw Error(ErrorCode::IoError, "PPM: " + why); };
  const auto token = [&in]() {
    std::string t;
    char c = 0;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P6") return fail("missing P6 magic");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    return fail("bad header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) return fail("unsupported dimensions or maxval");
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) return fail("truncated pixel data");
  return img;
}

inline void write_ppm(std::ostream& out, const RgbImage& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

inline RgbImage read_ppm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_ppm(in);
}

inline void write_ppm_file(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_ppm(out, img);
}

}  // namespace docparse
