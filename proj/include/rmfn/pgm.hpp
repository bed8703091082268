#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmfn/tensor.hpp"

namespace rmfn {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& image);
GrayImage decode_pgm(const std::string& bytes, const std::string& origin = "pgm");
void write_pgm(const std::string& path, const GrayImage& image);
GrayImage read_pgm(const std::string& path);

/// 1 x H x W tensor with values pixel / 255.
Tensor to_tensor(const GrayImage& image);
/// Quantizes a 1 x H x W tensor: round(clamp(v, 0, 1) * 255).
GrayImage to_gray(const Tensor& t);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace rmfn
