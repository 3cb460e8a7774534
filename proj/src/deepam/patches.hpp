#pragma once

#include "deepam/common.hpp"
#include "deepam/image.hpp"

#include <vector>

namespace deepam {

struct PatchGeometry {
  int p = 6;       // LR patch side
  int s = 2;       // upscaling factor
  int crop = 8;    // side of the central HR patch written at inference
  int stride = 1;  // LR sampling step at inference

  int hr_side() const { return s * p; }
  int lr_dim() const { return p * p; }
  int hr_dim() const { return hr_side() * hr_side(); }
  int crop_offset() const { return (hr_side() - crop) / 2; }

  void validate() const;
};

// Patch vectors are expressed in 8-bit grey levels, i.e. 255 times the
// mean-removed [0,1] pixel values. Threshold grids and the unit ridge of the
// synthesis step are calibrated for this range.
inline constexpr double kPatchUnits = 255.0;

// Top-left corner of an LR patch, in LR pixel coordinates.
struct PatchPosition {
  int row = 0;
  int col = 0;
};

// Column-per-patch training or inference data. X0 columns are LR patches with
// their mean removed; Y columns are HR patches minus the same LR mean. Both
// are in kPatchUnits; lr_means stay in [0,1].
struct PatchDataset {
  Matrix X0;
  Matrix Y;
  Vector lr_means;
  std::vector<PatchPosition> positions;

  Eigen::Index size() const { return X0.cols(); }
};

/// LR patches of `lr` on a `stride` grid (Y left empty).
PatchDataset extract_lr_patches(const GrayImage& lr, const PatchGeometry& geom, int stride);

/// Paired patches from an explicit LR/HR pair; hr must be s times lr in size.
PatchDataset extract_pairs(const GrayImage& lr, const GrayImage& hr, const PatchGeometry& geom, int stride);

/// Paired patches from an HR image: modcrop to s, downsample by 1/s, extract.
PatchDataset extract_pairs(const GrayImage& hr, const PatchGeometry& geom, int stride);

/// Concatenates datasets column-wise; positions are dropped.
PatchDataset concatenate(const std::vector<PatchDataset>& parts);

/// Overlap-averages predicted HR patches into an image of `border_fill`'s size.
/// `hr_patches` rows are either hr_side^2 (central crop is taken) or crop^2.
/// Pixels covered by no crop are copied from `border_fill`, which is normally
/// the bicubic upscale of the LR input.
GrayImage reconstruct(const Matrix& hr_patches, const Vector& lr_means, const std::vector<PatchPosition>& positions,
                      const PatchGeometry& geom, const GrayImage& border_fill);

}  // namespace deepam
