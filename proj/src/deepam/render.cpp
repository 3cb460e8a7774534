#include "deepam/render.hpp"

#include <algorithm>
#include <cmath>

namespace deepam {

Matrix effective_dictionary(const DeepAMModel& model, int layer) {
  const int L = static_cast<int>(model.layers.size());
  if (layer < 1 || layer > L) throw ConfigError("layer index " + std::to_string(layer) + " outside 1.." + std::to_string(L));
  Matrix prod = model.layers[0].omega;
  for (int i = 1; i < layer; ++i) prod = model.layers[static_cast<std::size_t>(i)].omega * prod;
  return prod;
}

namespace {

int ceil_sqrt(Eigen::Index n) {
  int r = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while (static_cast<Eigen::Index>(r) * r < n) ++r;
  while (r > 0 && static_cast<Eigen::Index>(r - 1) * (r - 1) >= n) --r;
  return r;
}

void fill_rect(ByteImage& img, int r0, int c0, int h, int w, std::uint8_t v) {
  for (int r = std::max(r0, 0); r < std::min(r0 + h, img.height); ++r)
    for (int c = std::max(c0, 0); c < std::min(c0 + w, img.width); ++c)
      for (int ch = 0; ch < 3; ++ch) img.data[(static_cast<std::size_t>(r) * img.width + c) * 3 + ch] = v;
}

void set_rgb(ByteImage& img, int r, int c, std::uint8_t R, std::uint8_t G, std::uint8_t B) {
  if (r < 0 || c < 0 || r >= img.height || c >= img.width) return;
  auto* px = &img.data[(static_cast<std::size_t>(r) * img.width + c) * 3];
  px[0] = R;
  px[1] = G;
  px[2] = B;
}

}  // namespace

ByteImage render_dictionary(const DeepAMModel& model, int layer, const MosaicOptions& options) {
  model.validate();
  if (options.zoom < 1 || options.gap < 0) throw ConfigError("mosaic zoom must be >= 1 and gap >= 0");
  const int L = static_cast<int>(model.layers.size());
  Matrix atoms;  // one atom per row
  int n_ipad = 0;
  if (layer == L + 1) {
    atoms = model.D.transpose();
    n_ipad = L > 0 ? model.layers.back().d_ipad : static_cast<int>(atoms.rows());
  } else {
    atoms = effective_dictionary(model, layer);
    n_ipad = model.layers[static_cast<std::size_t>(layer - 1)].d_ipad;
  }
  const auto count = static_cast<int>(atoms.rows());
  const int n_cad = count - n_ipad;
  const int side = ceil_sqrt(atoms.cols());
  const int cols = std::max(1, ceil_sqrt(count));
  const int ipad_rows = (n_ipad + cols - 1) / cols;
  const int cad_rows = (n_cad + cols - 1) / cols;
  const int cell = side * options.zoom + options.gap;
  const int margin = options.gap + 2;  // room for the CAD box
  ByteImage img;
  img.channels = 3;
  img.width = cols * cell + options.gap + 2 * margin;
  img.height = (ipad_rows + cad_rows) * cell + options.gap + 2 * margin + (n_cad > 0 && n_ipad > 0 ? 2 : 0);
  img.data.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
  fill_rect(img, 0, 0, img.height, img.width, 64);

  auto origin = [&](int k) {
    const bool cad = k >= n_ipad;
    const int idx = cad ? k - n_ipad : k;
    int row = idx / cols + (cad ? ipad_rows : 0);
    const int extra = cad && n_ipad > 0 ? 2 : 0;
    return std::pair<int, int>{margin + options.gap + row * cell + extra, margin + options.gap + (idx % cols) * cell};
  };

  for (int k = 0; k < count; ++k) {
    const Eigen::RowVectorXd a = atoms.row(k);
    const double lo = a.minCoeff();
    const double hi = a.maxCoeff();
    const auto [r0, c0] = origin(k);
    for (int j = 0; j < side * side; ++j) {
      double v = 0.0;
      if (j < a.size()) v = hi > lo ? (a[j] - lo) / (hi - lo) : 0.5;
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
      // column-major patch vectorisation
      fill_rect(img, r0 + (j % side) * options.zoom, c0 + (j / side) * options.zoom, options.zoom, options.zoom, g);
    }
  }

  if (n_cad > 0) {
    const int top = origin(n_ipad).first - options.gap - 1;
    const int bottom = top + cad_rows * cell + options.gap + 1;
    const int left = margin - 1;
    const int right = img.width - margin;
    for (int c = left; c <= right; ++c) {
      set_rgb(img, top, c, 0, 0, 255);
      set_rgb(img, bottom, c, 0, 0, 255);
    }
    for (int r = top; r <= bottom; ++r) {
      set_rgb(img, r, left, 0, 0, 255);
      set_rgb(img, r, right, 0, 0, 255);
    }
  }
  return img;
}

}  // namespace deepam
