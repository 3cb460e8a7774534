#include "deepam/super_resolution.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace deepam {

GrayImage luma_of(const ByteImage& img) {
  if (img.channels == 3) return to_luminance(img);
  if (img.channels != 1) throw DataError("expected a gray or RGB image");
  GrayImage out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out(r, c) = img.at(r, c, 0) / 255.0;
  return out;
}

GrayImage shave(const GrayImage& img, int border) {
  if (border < 0) throw ConfigError("shave must be non-negative");
  if (border == 0) return img;
  if (2 * border >= img.height() || 2 * border >= img.width()) throw DataError("shave removes the whole image");
  return GrayImage(Matrix(img.pixels().block(border, border, img.height() - 2 * border, img.width() - 2 * border)));
}

GrayImage super_resolve_luma(const DeepAMModel& model, const GrayImage& lr, int stride) {
  model.validate();
  const PatchGeometry& geom = model.geom;
  const PatchDataset ds = extract_lr_patches(lr, geom, stride > 0 ? stride : geom.stride);
  constexpr Eigen::Index chunk = 20000;
  // Only the central crop is needed downstream.
  const int off = geom.crop_offset();
  const int hs = geom.hr_side();
  Matrix crops(geom.crop * geom.crop, ds.size());
  for (Eigen::Index start = 0; start < ds.size(); start += chunk) {
    const Eigen::Index len = std::min(chunk, ds.size() - start);
    const Matrix pred = forward_batch(model, ds.X0.middleCols(start, len));
    for (Eigen::Index k = 0; k < len; ++k) {
      Eigen::Map<const Matrix> patch(pred.col(k).data(), hs, hs);
      Matrix c = patch.block(off, off, geom.crop, geom.crop);
      crops.col(start + k) = Eigen::Map<const Vector>(c.data(), c.size());
    }
  }
  return reconstruct(crops, ds.lr_means, ds.positions, geom, resize_bicubic(lr, geom.s));
}

ByteImage super_resolve(const DeepAMModel& model, const ByteImage& lr, const SrOptions& options) {
  const DeepAMModel* use = &model;
  DeepAMModel rescaled;
  if (options.sigma_T) {
    rescaled = rescale_for_noise(model, *options.sigma_T);
    use = &rescaled;
  }
  if (lr.channels == 1) return to_bytes(super_resolve_luma(*use, luma_of(lr), options.stride));
  YCbCrImage ycc = to_ycbcr(lr);
  const int s = model.geom.s;
  ycc.y = super_resolve_luma(*use, ycc.y, options.stride);
  ycc.cb = resize_bicubic(ycc.cb, s);
  ycc.cr = resize_bicubic(ycc.cr, s);
  return from_ycbcr(ycc);
}

std::vector<std::string> list_images(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("'" + dir + "' is not a directory");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff")
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

TestPair make_test_pair(const ByteImage& img, int scale, double noise_sigma, std::uint64_t seed) {
  TestPair t;
  t.hr = modcrop(quantize8(luma_of(img)), scale);
  t.lr = resize_bicubic(t.hr, 1.0 / scale);
  if (noise_sigma > 0.0) t.lr = add_gaussian_noise(t.lr, noise_sigma, seed);
  return t;
}

PatchDataset training_patches(const std::vector<std::string>& paths, const PatchSource& source) {
  source.geom.validate();
  if (paths.empty()) throw DataError("no training images");
  if (source.stride < 1) throw ConfigError("stride must be >= 1");
  if (!(source.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  std::vector<PatchDataset> parts;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const TestPair pair = make_test_pair(read_image(paths[i]), source.geom.s, source.noise_sigma, source.seed + i);
    if (pair.lr.height() < source.geom.p || pair.lr.width() < source.geom.p) continue;
    parts.push_back(extract_pairs(pair.lr, pair.hr, source.geom, source.stride));
    parts.back().positions.clear();
  }
  if (parts.empty()) throw DataError("training images are too small for a single patch");
  PatchDataset all = concatenate(parts);
  if (source.max_samples <= 0 || source.max_samples >= all.size()) return all;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(all.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(source.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(source.max_samples));
  std::sort(idx.begin(), idx.end());
  PatchDataset sub;
  sub.X0.resize(all.X0.rows(), source.max_samples);
  sub.Y.resize(all.Y.rows(), source.max_samples);
  sub.lr_means.resize(source.max_samples);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    sub.X0.col(j) = all.X0.col(idx[k]);
    sub.Y.col(j) = all.Y.col(idx[k]);
    sub.lr_means[j] = all.lr_means[idx[k]];
  }
  return sub;
}

SelfSrOptions self_sr_defaults() {
  SelfSrOptions o;
  o.arch = {{256, -1}, {256, -1}, {256, -1}};
  o.train.single_batch_iters = 5000;
  return o;
}

SelfSrResult self_super_resolve_luma(const GrayImage& lr, const SelfSrOptions& options) {
  const PatchGeometry& geom = options.train.geom;
  geom.validate();
  if (lr.height() < 4 * geom.p || lr.width() < 4 * geom.p)
    throw DataError("self-example SR needs at least " + std::to_string(4 * geom.p) + " pixels per side, got " +
                    std::to_string(lr.height()) + "x" + std::to_string(lr.width()));
  const PatchDataset data = extract_pairs(lr, geom, 1);
  SelfSrResult out;
  TrainResult trained = train(data, options.arch, options.train);
  out.model = std::move(trained.model);
  out.report = std::move(trained.report);
  out.hr = super_resolve_luma(out.model, lr, options.stride);
  return out;
}

ByteImage self_super_resolve(const ByteImage& lr, const SelfSrOptions& options, TrainReport* report) {
  const int s = options.train.geom.s;
  if (lr.channels == 1) {
    SelfSrResult r = self_super_resolve_luma(luma_of(lr), options);
    if (report) *report = std::move(r.report);
    return to_bytes(r.hr);
  }
  YCbCrImage ycc = to_ycbcr(lr);
  SelfSrResult r = self_super_resolve_luma(ycc.y, options);
  if (report) *report = std::move(r.report);
  ycc.y = std::move(r.hr);
  ycc.cb = resize_bicubic(ycc.cb, s);
  ycc.cr = resize_bicubic(ycc.cr, s);
  return from_ycbcr(ycc);
}

EvalResult evaluate_dir(const std::string& dir, const DeepAMModel* model, const EvalOptions& options) {
  if (options.mode == EvalMode::Model && model == nullptr) throw ConfigError("evaluation needs a model");
  const std::vector<std::string> paths = list_images(dir);
  if (paths.empty()) throw DataError("no images in '" + dir + "'");
  if (options.sigma_T && !(*options.sigma_T >= 0.0)) throw ConfigError("test noise sigma must be non-negative");

  int scale = options.scale;
  DeepAMModel adapted;
  const DeepAMModel* use = model;
  if (options.mode == EvalMode::Model) {
    model->validate();
    scale = model->geom.s;
    if (options.sigma_T && options.rescale_thresholds && model->training_noise_sigma > 0.0) {
      adapted = rescale_for_noise(*model, *options.sigma_T);
      use = &adapted;
    }
  } else if (options.mode == EvalMode::SelfExample) {
    scale = options.self.train.geom.s;
  } else if (model != nullptr) {
    scale = model->geom.s;
  }
  if (!options.output_dir.empty()) fs::create_directories(options.output_dir);

  EvalResult result;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::string name = fs::path(paths[i]).stem().string();
    const TestPair pair = make_test_pair(read_image(paths[i]), scale, options.sigma_T.value_or(0.0), options.seed + i);
    const GrayImage bicubic = quantize8(resize_bicubic(pair.lr, scale));
    GrayImage out;
    switch (options.mode) {
      case EvalMode::Bicubic:
        out = bicubic;
        break;
      case EvalMode::Model:
        out = quantize8(super_resolve_luma(*use, pair.lr, options.stride));
        break;
      case EvalMode::SelfExample: {
        SelfSrOptions self = options.self;
        if (self.stride == 0) self.stride = options.stride;
        out = quantize8(self_super_resolve_luma(pair.lr, self).hr);
        break;
      }
    }
    EvalRow row;
    row.name = name;
    row.psnr = psnr(shave(out, options.shave), shave(pair.hr, options.shave));
    row.bicubic_psnr = psnr(shave(bicubic, options.shave), shave(pair.hr, options.shave));
    if (!options.output_dir.empty()) write_png((fs::path(options.output_dir) / (name + ".png")).string(), out);
    log_line(options.log, name + ": " + std::to_string(row.psnr) + " dB (bicubic " + std::to_string(row.bicubic_psnr) + ")");
    result.rows.push_back(std::move(row));
  }
  for (const auto& r : result.rows) {
    result.mean_psnr += r.psnr;
    result.mean_bicubic_psnr += r.bicubic_psnr;
  }
  result.mean_psnr /= static_cast<double>(result.rows.size());
  result.mean_bicubic_psnr /= static_cast<double>(result.rows.size());
  return result;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string format_csv(const EvalResult& result) {
  std::ostringstream os;
  os << "image,psnr_db,bicubic_psnr_db\n";
  for (const auto& r : result.rows) os << r.name << ',' << fixed(r.psnr, 4) << ',' << fixed(r.bicubic_psnr, 4) << '\n';
  os << "average," << fixed(result.mean_psnr, 4) << ',' << fixed(result.mean_bicubic_psnr, 4) << '\n';
  return os.str();
}

std::string format_text(const EvalResult& result) {
  std::size_t width = std::string("average").size();
  for (const auto& r : result.rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "image" << "  " << std::right << std::setw(10) << "PSNR"
     << "  " << std::setw(10) << "bicubic" << '\n';
  auto line = [&](const std::string& name, double a, double b) {
    os << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right << std::setw(10) << fixed(a, 2)
       << "  " << std::setw(10) << fixed(b, 2) << '\n';
  };
  for (const auto& r : result.rows) line(r.name, r.psnr, r.bicubic_psnr);
  line("average", result.mean_psnr, result.mean_bicubic_psnr);
  return os.str();
}

}  // namespace deepam
