#include "deepam/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace deepam {

GrayImage::GrayImage(int height, int width, double fill) {
  if (height < 1 || width < 1) throw DataError("image dimensions must be positive");
  pixels_ = Matrix::Constant(height, width, fill);
}

GrayImage::GrayImage(Matrix pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rows() < 1 || pixels_.cols() < 1) throw DataError("image dimensions must be positive");
  if (!pixels_.allFinite()) throw DataError("image contains non-finite pixels");
}

namespace {

// Matlab rgb2ycbcr coefficients, rows Y/Cb/Cr, for RGB in [0,1] and output in [0,255].
const Eigen::Matrix3d& ycbcr_matrix() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 65.481, 128.553, 24.966,  //
                                    -37.797, -74.203, 112.0,                       //
                                    112.0, -93.786, -18.214)
                                       .finished();
  return m;
}

const Eigen::Vector3d kYCbCrOffset(16.0, 128.0, 128.0);

void require_channels(const ByteImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("expected a 1- or 3-channel image, got " + std::to_string(img.channels));
  if (img.height < 1 || img.width < 1) throw DataError("empty image");
  if (img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels)
    throw DataError("image buffer size does not match its dimensions");
}

Eigen::Vector3d rgb_at(const ByteImage& img, int r, int c) {
  if (img.channels == 1) {
    const double v = img.at(r, c, 0);
    return {v, v, v};
  }
  return {double(img.at(r, c, 0)), double(img.at(r, c, 1)), double(img.at(r, c, 2))};
}

// Keys cubic convolution kernel with a = -0.5.
double cubic(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

struct Contribution {
  std::vector<int> index;
  std::vector<double> weight;
};

// Per-output-sample taps, laid out as in Matlab's imresize contributions().
std::vector<Contribution> contributions(int in_len, int out_len, double scale) {
  const bool antialias = scale < 1.0;
  const double kernel_width = antialias ? 4.0 / scale : 4.0;
  const int taps = static_cast<int>(std::ceil(kernel_width)) + 2;
  const int period = 2 * in_len;

  std::vector<Contribution> out(out_len);
  for (int x = 1; x <= out_len; ++x) {
    const double u = x / scale + 0.5 * (1.0 - 1.0 / scale);
    const double left = std::floor(u - kernel_width / 2.0);
    Contribution& c = out[x - 1];
    double sum = 0.0;
    for (int k = 0; k < taps; ++k) {
      const double j = left + k;
      const double d = u - j;
      const double w = antialias ? scale * cubic(scale * d) : cubic(d);
      if (w == 0.0) continue;
      // symmetric extension: 1..n, n..1, repeating
      int m = static_cast<int>(std::fmod(j - 1.0, double(period)));
      if (m < 0) m += period;
      const int idx = m < in_len ? m : period - 1 - m;
      c.index.push_back(idx);
      c.weight.push_back(w);
      sum += w;
    }
    for (double& w : c.weight) w /= sum;
  }
  return out;
}

}  // namespace

GrayImage to_luminance(const ByteImage& img) {
  require_channels(img);
  GrayImage out(img.height, img.width);
  const Eigen::RowVector3d coef = ycbcr_matrix().row(0);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      out(r, c) = (coef.dot(rgb_at(img, r, c)) / 255.0 + 16.0) / 255.0;
  return out;
}

YCbCrImage to_ycbcr(const ByteImage& rgb) {
  require_channels(rgb);
  YCbCrImage out{GrayImage(rgb.height, rgb.width), GrayImage(rgb.height, rgb.width),
                 GrayImage(rgb.height, rgb.width)};
  for (int r = 0; r < rgb.height; ++r) {
    for (int c = 0; c < rgb.width; ++c) {
      const Eigen::Vector3d v = (ycbcr_matrix() * rgb_at(rgb, r, c) / 255.0 + kYCbCrOffset) / 255.0;
      out.y(r, c) = v[0];
      out.cb(r, c) = v[1];
      out.cr(r, c) = v[2];
    }
  }
  return out;
}

ByteImage from_ycbcr(const YCbCrImage& ycc) {
  const int h = ycc.y.height(), w = ycc.y.width();
  if (ycc.cb.height() != h || ycc.cr.height() != h || ycc.cb.width() != w || ycc.cr.width() != w)
    throw DataError("YCbCr planes differ in size");
  const Eigen::Matrix3d inv = ycbcr_matrix().inverse();
  ByteImage out{h, w, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w * 3)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Vector3d v(ycc.y(r, c), ycc.cb(r, c), ycc.cr(r, c));
      const Eigen::Vector3d rgb01 = inv * (v * 255.0 - kYCbCrOffset);
      for (int ch = 0; ch < 3; ++ch) {
        const double q = std::round(std::clamp(rgb01[ch], 0.0, 1.0) * 255.0);
        out.data[(static_cast<std::size_t>(r) * w + c) * 3 + ch] = static_cast<std::uint8_t>(q);
      }
    }
  }
  return out;
}

GrayImage resize_bicubic(const GrayImage& img, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("resize scale must be positive");
  if (img.empty()) throw DataError("cannot resize an empty image");
  const int out_h = static_cast<int>(std::lround(img.height() * scale));
  const int out_w = static_cast<int>(std::lround(img.width() * scale));
  if (out_h < 1 || out_w < 1) throw DataError("resized image would have a zero dimension");

  const Matrix& in = img.pixels();
  // Height first, then width (Matlab's order for equal per-dimension scales).
  const auto rows = contributions(img.height(), out_h, scale);
  Matrix tmp(out_h, img.width());
  for (int r = 0; r < out_h; ++r) {
    tmp.row(r).setZero();
    for (std::size_t k = 0; k < rows[r].index.size(); ++k)
      tmp.row(r) += rows[r].weight[k] * in.row(rows[r].index[k]);
  }
  const auto cols = contributions(img.width(), out_w, scale);
  Matrix out(out_h, out_w);
  for (int c = 0; c < out_w; ++c) {
    out.col(c).setZero();
    for (std::size_t k = 0; k < cols[c].index.size(); ++k)
      out.col(c) += cols[c].weight[k] * tmp.col(cols[c].index[k]);
  }
  return GrayImage(std::move(out));
}

GrayImage modcrop(const GrayImage& img, int factor) {
  if (factor < 1) throw ConfigError("modcrop factor must be >= 1");
  const int h = img.height() - img.height() % factor;
  const int w = img.width() - img.width() % factor;
  if (h < 1 || w < 1) throw DataError("image smaller than the scale factor");
  return GrayImage(Matrix(img.pixels().topLeftCorner(h, w)));
}

GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (sigma == 0.0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix out = img.pixels();
  // column-major walk keeps the draw order tied to the storage order
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += dist(rng);
  return GrayImage(std::move(out));
}

GrayImage quantize8(const GrayImage& img) {
  Matrix out = img.pixels().unaryExpr([](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; });
  return GrayImage(std::move(out));
}

double mean_squared_error_255(const GrayImage& a, const GrayImage& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DataError("PSNR inputs differ in size: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                    " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
  const auto clip = [](double v) { return std::clamp(v, 0.0, 1.0) * 255.0; };
  const Matrix diff = a.pixels().unaryExpr(clip) - b.pixels().unaryExpr(clip);
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

double psnr(const GrayImage& a, const GrayImage& b) {
  const double mse = mean_squared_error_255(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

ByteImage read_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot read image '" + path + "'");
  if (m.depth() != CV_8U) throw DataError("'" + path + "' is not an 8-bit image");
  int channels = m.channels();
  if (channels == 4) {
    // drop alpha
    std::vector<cv::Mat> planes;
    cv::split(m, planes);
    planes.pop_back();
    cv::merge(planes, m);
    channels = 3;
  }
  if (channels != 1 && channels != 3) throw DataError("'" + path + "' has unsupported channel count");
  ByteImage out{m.rows, m.cols, channels, std::vector<std::uint8_t>(static_cast<std::size_t>(m.rows) * m.cols * channels)};
  for (int r = 0; r < m.rows; ++r) {
    const std::uint8_t* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < m.cols; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        // OpenCV stores BGR
        const int src = channels == 3 ? 2 - ch : 0;
        out.data[(static_cast<std::size_t>(r) * m.cols + c) * channels + ch] = row[c * channels + src];
      }
    }
  }
  return out;
}

void write_png(const std::string& path, const ByteImage& img) {
  require_channels(img);
  cv::Mat m(img.height, img.width, img.channels == 3 ? CV_8UC3 : CV_8UC1);
  for (int r = 0; r < img.height; ++r) {
    std::uint8_t* row = m.ptr<std::uint8_t>(r);
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) {
        const int dst = img.channels == 3 ? 2 - ch : 0;
        row[c * img.channels + dst] = img.at(r, c, ch);
      }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path, m);
  } catch (const cv::Exception& e) {
    throw DataError("cannot write '" + path + "': " + e.what());
  }
  if (!ok) throw DataError("cannot write '" + path + "'");
}

ByteImage to_bytes(const GrayImage& img) {
  ByteImage out{img.height(), img.width(), 1,
                std::vector<std::uint8_t>(static_cast<std::size_t>(img.height()) * img.width())};
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      out.data[static_cast<std::size_t>(r) * img.width() + c] =
          static_cast<std::uint8_t>(std::round(std::clamp(img(r, c), 0.0, 1.0) * 255.0));
  return out;
}

void write_png(const std::string& path, const GrayImage& img) { write_png(path, to_bytes(img)); }

}  // namespace deepam
