#include "deepam/patches.hpp"

#include <string>

namespace deepam {

void PatchGeometry::validate() const {
  if (p < 1 || s < 1) throw ConfigError("patch side and scale must be positive");
  if (crop < 1 || crop > hr_side()) throw ConfigError("crop side must be in [1, s*p]");
  if ((hr_side() - crop) % 2 != 0) throw ConfigError("s*p - crop must be even so the crop is centred");
  if (stride < 1) throw ConfigError("stride must be >= 1");
}

namespace {

std::vector<PatchPosition> grid_positions(int height, int width, int p, int stride) {
  std::vector<PatchPosition> out;
  if (height < p || width < p) return out;
  // Column-major ordering of positions; the last row/column is always included
  // so the whole image is covered even when stride does not divide evenly.
  auto axis = [&](int len) {
    std::vector<int> v;
    for (int i = 0; i + p <= len; i += stride) v.push_back(i);
    if (v.back() != len - p) v.push_back(len - p);
    return v;
  };
  const auto rows = axis(height);
  const auto cols = axis(width);
  out.reserve(rows.size() * cols.size());
  for (int c : cols)
    for (int r : rows) out.push_back({r, c});
  return out;
}

}  // namespace

PatchDataset extract_lr_patches(const GrayImage& lr, const PatchGeometry& geom, int stride) {
  geom.validate();
  if (stride < 1) throw ConfigError("stride must be >= 1");
  const int p = geom.p;
  if (lr.height() < p || lr.width() < p)
    throw DataError("image " + std::to_string(lr.height()) + "x" + std::to_string(lr.width()) +
                    " is smaller than one " + std::to_string(p) + "x" + std::to_string(p) + " patch");
  PatchDataset ds;
  ds.positions = grid_positions(lr.height(), lr.width(), p, stride);
  const auto n = static_cast<Eigen::Index>(ds.positions.size());
  ds.X0.resize(geom.lr_dim(), n);
  ds.lr_means.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto [r, c] = ds.positions[k];
    // column-major vectorisation of the p x p block
    Matrix block = lr.pixels().block(r, c, p, p);
    const double mean = block.mean();
    block.array() = (block.array() - mean) * kPatchUnits;
    ds.X0.col(k) = Eigen::Map<const Vector>(block.data(), block.size());
    ds.lr_means[k] = mean;
  }
  return ds;
}

PatchDataset extract_pairs(const GrayImage& lr, const GrayImage& hr, const PatchGeometry& geom, int stride) {
  PatchDataset ds = extract_lr_patches(lr, geom, stride);
  if (hr.height() != geom.s * lr.height() || hr.width() != geom.s * lr.width())
    throw DataError("HR image must be exactly s times the LR image");
  const int hs = geom.hr_side();
  ds.Y.resize(geom.hr_dim(), ds.size());
  for (Eigen::Index k = 0; k < ds.size(); ++k) {
    const auto [r, c] = ds.positions[k];
    Matrix block = hr.pixels().block(geom.s * r, geom.s * c, hs, hs);
    block.array() = (block.array() - ds.lr_means[k]) * kPatchUnits;
    ds.Y.col(k) = Eigen::Map<const Vector>(block.data(), block.size());
  }
  return ds;
}

PatchDataset extract_pairs(const GrayImage& hr, const PatchGeometry& geom, int stride) {
  geom.validate();
  const GrayImage cropped = modcrop(hr, geom.s);
  const GrayImage lr = resize_bicubic(cropped, 1.0 / geom.s);
  return extract_pairs(lr, cropped, geom, stride);
}

PatchDataset concatenate(const std::vector<PatchDataset>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  PatchDataset out;
  if (parts.empty()) return out;
  out.X0.resize(parts.front().X0.rows(), total);
  out.Y.resize(parts.front().Y.rows(), total);
  out.lr_means.resize(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.X0.rows() != out.X0.rows() || p.Y.rows() != out.Y.rows())
      throw DataError("cannot concatenate datasets with different patch geometry");
    out.X0.middleCols(at, p.size()) = p.X0;
    out.Y.middleCols(at, p.size()) = p.Y;
    out.lr_means.segment(at, p.size()) = p.lr_means;
    at += p.size();
  }
  return out;
}

GrayImage reconstruct(const Matrix& hr_patches, const Vector& lr_means, const std::vector<PatchPosition>& positions,
                      const PatchGeometry& geom, const GrayImage& border_fill) {
  geom.validate();
  const auto n = hr_patches.cols();
  if (lr_means.size() != n || static_cast<Eigen::Index>(positions.size()) != n)
    throw DataError("patch, mean and position counts differ");
  const int hs = geom.hr_side();
  const int cs = geom.crop;
  bool full = false;
  if (hr_patches.rows() == hs * hs) {
    full = true;
  } else if (hr_patches.rows() != cs * cs) {
    throw DataError("HR patch length " + std::to_string(hr_patches.rows()) + " matches neither s*p nor crop");
  }
  const int out_h = border_fill.height();
  const int out_w = border_fill.width();
  const int off = geom.crop_offset();

  Matrix sum = Matrix::Zero(out_h, out_w);
  Matrix count = Matrix::Zero(out_h, out_w);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int top = geom.s * positions[k].row + off;
    const int left = geom.s * positions[k].col + off;
    if (top < 0 || left < 0 || top + cs > out_h || left + cs > out_w)
      throw DataError("patch " + std::to_string(k) + " crop lies outside the output image");
    if (full) {
      Eigen::Map<const Matrix> patch(hr_patches.col(k).data(), hs, hs);
      sum.block(top, left, cs, cs) += patch.block(off, off, cs, cs) / kPatchUnits;
    } else {
      Eigen::Map<const Matrix> patch(hr_patches.col(k).data(), cs, cs);
      sum.block(top, left, cs, cs) += patch / kPatchUnits;
    }
    sum.block(top, left, cs, cs).array() += lr_means[k];
    count.block(top, left, cs, cs).array() += 1.0;
  }
  Matrix out = border_fill.pixels();
  for (int c = 0; c < out_w; ++c)
    for (int r = 0; r < out_h; ++r)
      if (count(r, c) > 0) out(r, c) = sum(r, c) / count(r, c);
  return GrayImage(std::move(out));
}

}  // namespace deepam
