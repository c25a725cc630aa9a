#pragma once

// 8-bit RGB image buffer and binary PPM (P6) I/O.

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major interleaved RGB, 8 bits per channel.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, Rgb fill = {}) : width(w), height(h) {
    if (w < 0 || h < 0) throw std::invalid_argument("ImageBuffer: negative size");
    data.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill.r;
      data[i + 1] = fill.g;
      data[i + 2] = fill.b;
    }
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
           static_cast<std::size_t>(c);
  }
  std::uint8_t& at(int x, int y, int c) { return data[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return data[index(x, y, c)]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  void set(int x, int y, Rgb color) {
    const auto i = index(x, y);
    data[i] = color.r;
    data[i + 1] = color.g;
    data[i + 2] = color.b;
  }
  Rgb get(int x, int y) const {
    const auto i = index(x, y);
    return {data[i], data[i + 1], data[i + 2]};
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

namespace detail {

inline void skip_ppm_whitespace(std::istream& in) {
  while (true) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline long read_ppm_int(std::istream& in) {
  skip_ppm_whitespace(in);
  long value = -1;
  if (!(in >> value)) throw std::runtime_error("PPM: malformed header");
  return value;
}

}  // namespace detail

/// Reads a binary P6 PPM with maxval 255.
inline ImageBuffer read_ppm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') {
    throw std::runtime_error("PPM: expected P6 magic");
  }
  const long w = detail::read_ppm_int(in);
  const long h = detail::read_ppm_int(in);
  const long maxval = detail::read_ppm_int(in);
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) throw std::runtime_error("PPM: bad dimensions");
  if (maxval != 255) throw std::runtime_error("PPM: only maxval 255 is supported");
  // exactly one whitespace byte separates header and raster
  const int sep = in.get();
  if (sep != ' ' && sep != '\n' && sep != '\t' && sep != '\r') throw std::runtime_error("PPM: malformed header");
  ImageBuffer img(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw std::runtime_error("PPM: truncated raster");
  }
  return img;
}

inline void write_ppm(std::ostream& out, const ImageBuffer& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

inline ImageBuffer load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image '" + path + "'");
  return read_ppm(in);
}

inline void save_ppm(const std::string& path, const ImageBuffer& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image '" + path + "'");
  write_ppm(out, img);
  if (!out) throw std::runtime_error("error writing image '" + path + "'");
}

}  // namespace posekit
