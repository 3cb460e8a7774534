#include "deepam/deepam.h"

#include "deepam/model.hpp"
#include "deepam/render.hpp"
#include "deepam/serialize.hpp"
#include "deepam/super_resolution.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

struct deepam_model {
  deepam::DeepAMModel model;
};

struct deepam_eval_result {
  deepam::EvalResult result;
  std::string csv;
  std::string text;
};

namespace {

thread_local std::string g_last_error;

deepam_status fail(deepam_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class F>
deepam_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return DEEPAM_OK;
  } catch (const deepam::Error& e) {
    return fail(static_cast<deepam_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DEEPAM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DEEPAM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DEEPAM_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw deepam::ConfigError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

deepam::Logger make_logger(deepam_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

deepam::PatchGeometry geometry(const deepam_train_options& o) {
  deepam::PatchGeometry g;
  g.p = o.patch_size;
  g.s = o.scale;
  g.crop = o.crop;
  g.stride = o.inference_stride;
  g.validate();
  return g;
}

deepam::TrainOptions train_options(const deepam_train_options& o) {
  deepam::TrainOptions t;
  t.geom = geometry(o);
  t.training_noise_sigma = o.sigma_n;
  t.seed = o.seed;
  t.batch_size = o.batch_size;
  t.num_batches = o.num_batches;
  t.iters_per_batch = o.iters_per_batch;
  t.single_batch_iters = o.single_batch_iters;
  t.grid = deepam::ThresholdSearchGrid::between(o.grid_min, o.grid_max);
  t.research_thresholds_per_batch = o.research_thresholds_per_batch != 0;
  t.log = make_logger(o.log, o.log_user);
  t.validate();
  return t;
}

std::vector<deepam::LayerArch> arch_of(const deepam_train_options& o) {
  return deepam::parse_arch(o.arch ? o.arch : "");
}

}  // namespace

extern "C" {

const char* deepam_last_error(void) { return g_last_error.c_str(); }

const char* deepam_version(void) { return "1.0.0"; }

void deepam_string_free(char* s) { std::free(s); }

deepam_status deepam_model_load(const char* path, deepam_model** out) {
  return guarded([&] {
    require(path && out, "path and out");
    *out = nullptr;
    auto* m = new deepam_model{deepam::load_model(path)};
    *out = m;
  });
}

deepam_status deepam_model_from_bytes(const uint8_t* data, size_t size, deepam_model** out) {
  return guarded([&] {
    require((data || size == 0) && out, "data and out");
    *out = nullptr;
    std::vector<std::uint8_t> bytes(data, data + size);
    *out = new deepam_model{deepam::model_from_bytes(bytes)};
  });
}

deepam_status deepam_model_save(const deepam_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path");
    deepam::save_model(model->model, path);
  });
}

void deepam_model_free(deepam_model* model) { delete model; }

deepam_status deepam_model_info_get(const deepam_model* model, deepam_model_info* info) {
  return guarded([&] {
    require(model && info, "model and info");
    const auto& m = model->model;
    info->num_layers = static_cast<int>(m.layers.size());
    info->patch_size = m.geom.p;
    info->scale = m.geom.s;
    info->crop = m.geom.crop;
    info->stride = m.geom.stride;
    info->input_dim = m.input_dim();
    info->output_dim = m.output_dim();
    info->training_noise_sigma = m.training_noise_sigma;
  });
}

deepam_status deepam_model_layer_info(const deepam_model* model, int layer, int* d_in, int* d_out, int* d_ipad) {
  return guarded([&] {
    require(model, "model");
    const auto& layers = model->model.layers;
    if (layer < 1 || layer > static_cast<int>(layers.size()))
      throw deepam::ConfigError("layer index " + std::to_string(layer) + " out of range");
    const auto& l = layers[static_cast<std::size_t>(layer - 1)];
    if (d_in) *d_in = l.d_in();
    if (d_out) *d_out = l.d_out();
    if (d_ipad) *d_ipad = l.d_ipad;
  });
}

deepam_status deepam_model_forward(const deepam_model* model, const double* x, size_t n, double* y) {
  return guarded([&] {
    require(model && (x || n == 0) && (y || n == 0), "model, x and y");
    const auto& m = model->model;
    const auto cols = static_cast<Eigen::Index>(n);
    Eigen::Map<const deepam::Matrix> X(x, m.input_dim(), cols);
    Eigen::Map<deepam::Matrix> Y(y, m.output_dim(), cols);
    Y = deepam::forward_batch(m, X);
  });
}

deepam_status deepam_model_rescale(const deepam_model* model, double sigma_t, deepam_model** out) {
  return guarded([&] {
    require(model && out, "model and out");
    *out = nullptr;
    *out = new deepam_model{deepam::rescale_for_noise(model->model, sigma_t)};
  });
}

deepam_status deepam_model_export_relu(const deepam_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path");
    deepam::save_relu(model->model, path);
  });
}

deepam_status deepam_model_atom_correlation(const deepam_model* model, double* values, int* is_ipad, size_t capacity,
                                            size_t* count) {
  return guarded([&] {
    require(model && count, "model and count");
    const auto corr = deepam::atom_correlation_diagnostic(model->model);
    *count = corr.size();
    if (!values) return;
    if (capacity < corr.size()) throw deepam::ConfigError("output buffer holds fewer entries than there are atoms");
    for (std::size_t k = 0; k < corr.size(); ++k) {
      values[k] = corr[k].value;
      if (is_ipad) is_ipad[k] = corr[k].ipad ? 1 : 0;
    }
  });
}

deepam_status deepam_render_dict(const deepam_model* model, int layer, const char* png_path) {
  return guarded([&] {
    require(model && png_path, "model and png_path");
    deepam::write_png(png_path, deepam::render_dictionary(model->model, layer));
  });
}

void deepam_train_options_init(deepam_train_options* options) {
  if (!options) return;
  *options = deepam_train_options{};
  options->arch = "256,256,256";
  options->sigma_n = 0.0;
  options->seed = 1;
  options->patch_size = 6;
  options->scale = 2;
  options->crop = 8;
  options->stride = 1;
  options->inference_stride = 1;
  options->max_samples = 0;
  options->batch_size = 40000;
  options->num_batches = 15;
  options->iters_per_batch = 100;
  options->single_batch_iters = 500;
  options->grid_min = 1e-4;
  options->grid_max = 9e1;
  options->research_thresholds_per_batch = 0;
}

deepam_status deepam_train_from_dir(const char* dir, const deepam_train_options* options, deepam_model** out,
                                    char** report_json) {
  return guarded([&] {
    require(dir && options && out, "dir, options and out");
    *out = nullptr;
    if (report_json) *report_json = nullptr;
    const auto arch = arch_of(*options);
    const auto topts = train_options(*options);
    deepam::PatchSource src;
    src.geom = topts.geom;
    src.stride = options->stride;
    src.noise_sigma = options->sigma_n;
    src.seed = options->seed;
    src.max_samples = options->max_samples;
    const auto paths = deepam::list_images(dir);
    if (paths.empty()) throw deepam::DataError("no training images in '" + std::string(dir) + "'");
    deepam::log_line(topts.log, "extracting patches from " + std::to_string(paths.size()) + " images");
    const auto data = deepam::training_patches(paths, src);
    deepam::log_line(topts.log, std::to_string(data.size()) + " training pairs");
    auto trained = deepam::train(data, arch, topts);
    auto* m = new deepam_model{std::move(trained.model)};
    if (report_json) {
      try {
        *report_json = dup_string(trained.report.to_json());
      } catch (...) {
        delete m;
        throw;
      }
    }
    *out = m;
  });
}

deepam_status deepam_sr_image(const deepam_model* model, const char* in_path, const char* out_path, int has_sigma_t,
                              double sigma_t, int stride, const char* reference_path, double* psnr_out) {
  return guarded([&] {
    require(model && in_path && out_path, "model, in_path and out_path");
    if (stride < 0) throw deepam::ConfigError("stride must be non-negative");
    deepam::SrOptions o;
    if (has_sigma_t) o.sigma_T = sigma_t;
    o.stride = stride;
    const deepam::ByteImage out = deepam::super_resolve(model->model, deepam::read_image(in_path), o);
    deepam::write_png(out_path, out);
    if (reference_path && psnr_out) {
      const deepam::GrayImage ref = deepam::luma_of(deepam::read_image(reference_path));
      *psnr_out = deepam::psnr(deepam::luma_of(out), ref);
    }
  });
}

deepam_status deepam_self_sr_image(const char* in_path, const char* out_path, const deepam_train_options* options,
                                   char** report_json) {
  return guarded([&] {
    require(in_path && out_path && options, "in_path, out_path and options");
    if (report_json) *report_json = nullptr;
    deepam::SelfSrOptions self;
    self.arch = arch_of(*options);
    self.train = train_options(*options);
    self.stride = options->inference_stride;
    deepam::TrainReport report;
    const deepam::ByteImage out = deepam::self_super_resolve(deepam::read_image(in_path), self, &report);
    deepam::write_png(out_path, out);
    if (report_json) *report_json = dup_string(report.to_json());
  });
}

deepam_status deepam_psnr_files(const char* a_path, const char* b_path, int shave, double* psnr_out) {
  return guarded([&] {
    require(a_path && b_path && psnr_out, "a_path, b_path and psnr_out");
    const auto a = deepam::shave(deepam::luma_of(deepam::read_image(a_path)), shave);
    const auto b = deepam::shave(deepam::luma_of(deepam::read_image(b_path)), shave);
    *psnr_out = deepam::psnr(a, b);
  });
}

void deepam_eval_options_init(deepam_eval_options* options) {
  if (!options) return;
  *options = deepam_eval_options{};
  options->mode = DEEPAM_EVAL_MODEL;
  options->rescale_thresholds = 1;
  options->seed = 1;
  options->scale = 2;
}

deepam_status deepam_eval_dir(const char* dir, const deepam_model* model, const deepam_eval_options* options,
                              deepam_eval_result** out) {
  return guarded([&] {
    require(dir && options && out, "dir, options and out");
    *out = nullptr;
    deepam::EvalOptions o;
    switch (options->mode) {
      case DEEPAM_EVAL_MODEL: o.mode = deepam::EvalMode::Model; break;
      case DEEPAM_EVAL_BICUBIC: o.mode = deepam::EvalMode::Bicubic; break;
      case DEEPAM_EVAL_SELF: o.mode = deepam::EvalMode::SelfExample; break;
      default: throw deepam::ConfigError("unknown evaluation mode");
    }
    if (options->has_sigma_t) o.sigma_T = options->sigma_t;
    o.rescale_thresholds = options->rescale_thresholds != 0;
    o.seed = options->seed;
    o.shave = options->shave;
    o.stride = options->stride;
    o.scale = options->scale;
    if (o.scale < 1) throw deepam::ConfigError("scale must be positive");
    if (options->output_dir) o.output_dir = options->output_dir;
    if (o.mode == deepam::EvalMode::SelfExample) {
      require(options->self_options, "self_options");
      o.self.arch = arch_of(*options->self_options);
      o.self.train = train_options(*options->self_options);
      o.self.stride = options->self_options->inference_stride;
    }
    o.log = make_logger(options->log, options->log_user);
    auto* r = new deepam_eval_result;
    try {
      r->result = deepam::evaluate_dir(dir, model ? &model->model : nullptr, o);
      r->csv = deepam::format_csv(r->result);
      r->text = deepam::format_text(r->result);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

size_t deepam_eval_count(const deepam_eval_result* result) { return result ? result->result.rows.size() : 0; }

deepam_status deepam_eval_row(const deepam_eval_result* result, size_t index, const char** name, double* psnr,
                              double* bicubic_psnr) {
  return guarded([&] {
    require(result, "result");
    if (index >= result->result.rows.size()) throw deepam::ConfigError("row index out of range");
    const auto& row = result->result.rows[index];
    if (name) *name = row.name.c_str();
    if (psnr) *psnr = row.psnr;
    if (bicubic_psnr) *bicubic_psnr = row.bicubic_psnr;
  });
}

void deepam_eval_mean(const deepam_eval_result* result, double* psnr, double* bicubic_psnr) {
  if (!result) return;
  if (psnr) *psnr = result->result.mean_psnr;
  if (bicubic_psnr) *bicubic_psnr = result->result.mean_bicubic_psnr;
}

const char* deepam_eval_format(const deepam_eval_result* result, int csv) {
  if (!result) return "";
  return csv ? result->csv.c_str() : result->text.c_str();
}

void deepam_eval_free(deepam_eval_result* result) { delete result; }

}  // extern "C"
