#include "rmfn/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rmfn/error.hpp"

namespace rmfn {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_io("short write to " + path);
}

std::string encode_pgm(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) throw_shape("pgm: pixel count does not match size");
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

GrayImage decode_pgm(const std::string& bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  auto number = [&](const char* what) -> std::size_t {
    const std::string t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw_format(origin + ": bad PGM " + what);
    return std::stoul(t);
  };
  if (token() != "P5") throw_format(origin + ": not a binary PGM");
  GrayImage img;
  img.width = number("width");
  img.height = number("height");
  if (number("maxval") != 255) throw_format(origin + ": only 8-bit PGM is supported");
  ++pos;  // single whitespace before the raster
  if (img.width == 0 || img.height == 0 || pos > bytes.size() || bytes.size() - pos != img.width * img.height)
    throw_format(origin + ": PGM raster size mismatch");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_pgm(const std::string& path, const GrayImage& image) { write_file(path, encode_pgm(image)); }

GrayImage read_pgm(const std::string& path) { return decode_pgm(read_file(path), path); }

Tensor to_tensor(const GrayImage& image) {
  Tensor t({1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = image.pixels[i] / 255.0;
  return t;
}

GrayImage to_gray(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 1) throw_shape("to_gray: expected 1xHxW, got " + shape_str(t.shape()));
  GrayImage img{t.dim(2), t.dim(1), std::vector<std::uint8_t>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(t[i], 0.0, 1.0) * 255.0));
  return img;
}

}  // namespace rmfn
