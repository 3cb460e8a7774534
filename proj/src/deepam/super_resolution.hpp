#pragma once

#include "deepam/image.hpp"
#include "deepam/model.hpp"
#include "deepam/patches.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deepam {

/// Luminance in [0,1]: single-channel images are used as is, RGB goes
/// through the BT.601 transform.
GrayImage luma_of(const ByteImage& img);

/// Removes `border` pixels from every side.
GrayImage shave(const GrayImage& img, int border);

/// Upscales a luminance image by the model's factor with full patch overlap.
/// `stride` 0 uses the model's stride.
GrayImage super_resolve_luma(const DeepAMModel& model, const GrayImage& lr, int stride = 0);

struct SrOptions {
  std::optional<double> sigma_T;  // rescale first-layer thresholds for this test noise level
  int stride = 0;
};

/// Gray in, gray out; RGB in, RGB out with chroma upscaled bicubically.
ByteImage super_resolve(const DeepAMModel& model, const ByteImage& lr, const SrOptions& options = {});

// ---- training data ----------------------------------------------------------

/// Image files (png, bmp, jpg, jpeg, tif, tiff) directly inside `dir`, sorted by name.
std::vector<std::string> list_images(const std::string& dir);

struct PatchSource {
  PatchGeometry geom;
  int stride = 1;
  double noise_sigma = 0.0;    // Gaussian noise added to the LR images
  std::uint64_t seed = 1;
  std::int64_t max_samples = 0;  // 0 keeps all pairs, otherwise a seeded random subset
};

/// Training pairs from HR images: luminance on the 8-bit grid, modcrop,
/// bicubic downsampling, optional LR noise, then patch extraction.
PatchDataset training_patches(const std::vector<std::string>& paths, const PatchSource& source);

/// HR luminance and its bicubic LR counterpart, the way the test protocol builds them.
struct TestPair {
  GrayImage hr;  // 8-bit grid, modcropped
  GrayImage lr;  // not quantised; noise added when requested
};
TestPair make_test_pair(const ByteImage& img, int scale, double noise_sigma, std::uint64_t seed);

// ---- self-example SR --------------------------------------------------------

struct SelfSrOptions {
  std::vector<LayerArch> arch;
  TrainOptions train;  // single_batch_iters defaults to 5000 via self_sr_defaults()
  int stride = 0;
};

SelfSrOptions self_sr_defaults();

struct SelfSrResult {
  GrayImage hr;
  DeepAMModel model;
  TrainReport report;
};

/// Trains on (downsampled LR, LR) pairs taken from `lr` alone, then upscales `lr`.
SelfSrResult self_super_resolve_luma(const GrayImage& lr, const SelfSrOptions& options);
ByteImage self_super_resolve(const ByteImage& lr, const SelfSrOptions& options, TrainReport* report = nullptr);

// ---- evaluation -------------------------------------------------------------

enum class EvalMode { Model, Bicubic, SelfExample };

struct EvalOptions {
  EvalMode mode = EvalMode::Model;
  std::optional<double> sigma_T;  // noise added to the LR input
  bool rescale_thresholds = true; // with sigma_T, adapt the model's first-layer thresholds
  std::uint64_t seed = 1;
  int shave = 0;                  // border excluded from PSNR
  int stride = 0;
  int scale = 2;                  // when there is no model to take it from
  std::string output_dir;         // write each output luminance as <name>.png when set
  SelfSrOptions self;             // used in SelfExample mode
  Logger log;
};

struct EvalRow {
  std::string name;
  double psnr = 0.0;
  double bicubic_psnr = 0.0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0;
  double mean_bicubic_psnr = 0.0;
};

/// `model` may be null in Bicubic and SelfExample modes.
EvalResult evaluate_dir(const std::string& dir, const DeepAMModel* model, const EvalOptions& options);

std::string format_csv(const EvalResult& result);
std::string format_text(const EvalResult& result);

}  // namespace deepam
