#pragma once

#include "deepam/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace deepam {

// Single-channel image with real values, nominally in [0,1]. Row index is y.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, double fill = 0.0);
  explicit GrayImage(Matrix pixels);

  int height() const { return static_cast<int>(pixels_.rows()); }
  int width() const { return static_cast<int>(pixels_.cols()); }
  bool empty() const { return pixels_.size() == 0; }

  double& operator()(int r, int c) { return pixels_(r, c); }
  double operator()(int r, int c) const { return pixels_(r, c); }

  const Matrix& pixels() const { return pixels_; }
  Matrix& pixels() { return pixels_; }

 private:
  Matrix pixels_;
};

// 8-bit interleaved image with 1 (gray) or 3 (RGB) channels.
struct ByteImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
};

struct YCbCrImage {
  GrayImage y, cb, cr;
};

/// BT.601 luma in [0,1] following the Matlab rgb2ycbcr convention:
/// Y = (65.481 R + 128.553 G + 24.966 B) / 255 + 16, divided by 255.
/// Gray inputs are treated as R = G = B.
GrayImage to_luminance(const ByteImage& img);

YCbCrImage to_ycbcr(const ByteImage& rgb);
ByteImage from_ycbcr(const YCbCrImage& ycc);

/// Bicubic resampling matching Matlab imresize: Keys kernel with a = -0.5,
/// kernel stretched by 1/scale (antialiasing) when downscaling, symmetric
/// boundary extension. Output dims are round(input dims * scale).
GrayImage resize_bicubic(const GrayImage& img, double scale);

/// Crops the bottom/right so both dimensions are multiples of `factor`.
GrayImage modcrop(const GrayImage& img, int factor);

/// Adds i.i.d. N(0, sigma^2) noise. No clipping.
GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed);

/// Rounds to the 8-bit grid (values clipped to [0,1] first).
GrayImage quantize8(const GrayImage& img);

/// PSNR in dB of 8-bit-scaled values after clipping to [0,1].
/// Returns +infinity for identical inputs.
double psnr(const GrayImage& a, const GrayImage& b);

double mean_squared_error_255(const GrayImage& a, const GrayImage& b);

ByteImage read_image(const std::string& path);
void write_png(const std::string& path, const ByteImage& img);
void write_png(const std::string& path, const GrayImage& img);
ByteImage to_bytes(const GrayImage& img);

}  // namespace deepam
