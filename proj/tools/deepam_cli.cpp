// deepam: train and apply deep analysis dictionary models for image super-resolution.

#include "deepam/deepam.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Failure {
  int code;
};

void check(deepam_status st) {
  if (st == DEEPAM_OK) return;
  std::cerr << "error: " << deepam_last_error() << "\n";
  throw Failure{st == DEEPAM_ERR_INTERNAL ? 1 : static_cast<int>(st)};
}

void log_stderr(const char* line, void*) { std::cerr << line << "\n"; }

struct ModelHandle {
  deepam_model* ptr = nullptr;
  ~ModelHandle() { deepam_model_free(ptr); }
};

struct TrainFlags {
  std::string arch = "256,256,256";
  double sigma_n = 0.0;
  std::uint64_t seed = 1;
  int patch = 6;
  int scale = 2;
  int crop = 8;
  int stride = 1;
  int inference_stride = 1;
  std::int64_t max_samples = 0;
  int batch_size = 40000;
  int batches = 15;
  int iters = 100;
  int single_iters = 500;
  double grid_min = 1e-4;
  double grid_max = 9e1;
  bool per_batch = false;

  void add_to(CLI::App* cmd, bool with_extraction) {
    cmd->add_option("--arch", arch, "Layer sizes d[:ipad],...; 0 for a linear model")->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--patch", patch, "LR patch side")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--scale", scale, "Upscaling factor")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--crop", crop, "Side of the central HR patch kept at inference")->capture_default_str();
    cmd->add_option("--grid-min", grid_min, "Smallest threshold multiplier searched")->capture_default_str();
    cmd->add_option("--grid-max", grid_max, "Largest threshold multiplier searched")->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Samples per training batch")->capture_default_str();
    cmd->add_option("--batches", batches, "Number of training batches")->capture_default_str();
    cmd->add_option("--iters", iters, "Optimizer iterations per batch")->capture_default_str();
    cmd->add_option("--single-batch-iters", single_iters, "Iterations when all samples fit one batch")
        ->capture_default_str();
    cmd->add_flag("--per-batch-thresholds", per_batch, "Re-search thresholds after every batch");
    if (with_extraction) {
      cmd->add_option("--sigma-n", sigma_n, "Gaussian noise added to LR training images")->capture_default_str();
      cmd->add_option("--train-stride", stride, "LR step between training patches")->capture_default_str();
      cmd->add_option("--max-samples", max_samples, "Random subset of training pairs (0 keeps all)")
          ->capture_default_str();
    }
    cmd->add_option("--stride", inference_stride, "LR step between patches at inference")->capture_default_str();
  }

  deepam_train_options to_c(bool verbose) const {
    deepam_train_options o;
    deepam_train_options_init(&o);
    o.arch = arch.c_str();
    o.sigma_n = sigma_n;
    o.seed = seed;
    o.patch_size = patch;
    o.scale = scale;
    o.crop = crop;
    o.stride = stride;
    o.inference_stride = inference_stride;
    o.max_samples = max_samples;
    o.batch_size = batch_size;
    o.num_batches = batches;
    o.iters_per_batch = iters;
    o.single_batch_iters = single_iters;
    o.grid_min = grid_min;
    o.grid_max = grid_max;
    o.research_thresholds_per_batch = per_batch ? 1 : 0;
    if (verbose) o.log = log_stderr;
    return o;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    throw Failure{3};
  }
  out << text;
}

void take_report(char* json, const std::string& path) {
  if (!json) return;
  std::string text(json);
  deepam_string_free(json);
  if (!path.empty()) write_text(path, text + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep analysis dictionary models for single-image super-resolution"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  // train
  TrainFlags train_flags;
  std::string train_dir, train_out, train_report;
  auto* train = app.add_subcommand("train", "Learn a model from a directory of HR images");
  train->add_option("--data", train_dir, "Directory of HR training images")->required();
  train->add_option("-o,--out", train_out, "Output model file")->required();
  train->add_option("--report", train_report, "Write the training report (JSON) here");
  train_flags.add_to(train, true);

  // sr
  std::string sr_model, sr_in, sr_out, sr_ref;
  std::optional<double> sr_sigma_t;
  int sr_stride = 0;
  auto* sr = app.add_subcommand("sr", "Upscale an image with a trained model");
  sr->add_option("--model", sr_model, "Model file")->required();
  sr->add_option("-i,--in", sr_in, "LR input image")->required();
  sr->add_option("-o,--out", sr_out, "HR output image (PNG)")->required();
  sr->add_option("--sigma-t", sr_sigma_t, "Test noise level; rescales first-layer thresholds");
  sr->add_option("--stride", sr_stride, "LR step between patches (0: model default)")->capture_default_str();
  sr->add_option("--reference", sr_ref, "HR reference image; prints PSNR");

  // self-sr
  TrainFlags self_flags;
  self_flags.single_iters = 5000;
  std::string self_in, self_out, self_ref, self_report;
  auto* self = app.add_subcommand("self-sr", "Upscale an image using a model trained on the image itself");
  self->add_option("-i,--in", self_in, "LR input image")->required();
  self->add_option("-o,--out", self_out, "HR output image (PNG)")->required();
  self->add_option("--reference", self_ref, "HR reference image; prints PSNR");
  self->add_option("--report", self_report, "Write the training report (JSON) here");
  self_flags.add_to(self, false);

  // eval
  std::string eval_dir, eval_model, eval_outdir, eval_report = "text", eval_csv;
  bool eval_bicubic = false, eval_self = false, eval_no_rescale = false;
  std::optional<double> eval_sigma_t;
  int eval_shave = 0;
  std::uint64_t eval_seed = 1;
  TrainFlags eval_self_flags;
  eval_self_flags.single_iters = 5000;
  auto* eval = app.add_subcommand("eval", "PSNR of a model (or bicubic) over a directory of HR test images");
  eval->add_option("--data", eval_dir, "Directory of HR test images")->required();
  auto* eval_model_opt = eval->add_option("--model", eval_model, "Model file");
  auto* eval_bicubic_opt = eval->add_flag("--bicubic", eval_bicubic, "Evaluate plain bicubic upscaling");
  auto* eval_self_opt = eval->add_flag("--self", eval_self, "Self-example SR on every image");
  eval_model_opt->excludes(eval_bicubic_opt)->excludes(eval_self_opt);
  eval_bicubic_opt->excludes(eval_self_opt);
  eval->add_option("--sigma-t", eval_sigma_t, "Add Gaussian noise of this level to the LR inputs");
  eval->add_flag("--no-rescale", eval_no_rescale, "Keep the trained thresholds under test noise");
  eval->add_option("--shave", eval_shave, "Border pixels ignored by PSNR")->capture_default_str();
  eval->add_option("--noise-seed", eval_seed, "Seed for test noise")->capture_default_str();
  eval->add_option("--output-dir", eval_outdir, "Write each output luminance image here");
  eval->add_option("--report", eval_report, "Table format printed to stdout")
      ->check(CLI::IsMember({"csv", "text"}))
      ->capture_default_str();
  eval->add_option("--csv-out", eval_csv, "Also write the CSV table to this file");
  eval_self_flags.add_to(eval, false);

  // render-dict
  std::string render_model, render_out;
  int render_layer = 1;
  auto* render = app.add_subcommand("render-dict", "Render a layer's atoms as a PNG mosaic");
  render->add_option("--model", render_model, "Model file")->required();
  render->add_option("--layer", render_layer, "1..L for analysis layers, L+1 for the synthesis dictionary")
      ->capture_default_str();
  render->add_option("-o,--out", render_out, "Output PNG")->required();

  // export-relu
  std::string relu_model, relu_out;
  auto* relu = app.add_subcommand("export-relu", "Write the equivalent rectifier network");
  relu->add_option("--model", relu_model, "Model file")->required();
  relu->add_option("-o,--out", relu_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!quiet) {
    CLI::App* active = app.get_subcommands().front();
    std::cerr << "# resolved configuration\n[" << active->get_name() << "]\n" << active->config_to_str(true, false)
              << std::flush;
  }

  try {
    if (*train) {
      ModelHandle m;
      char* report = nullptr;
      const auto opts = train_flags.to_c(!quiet);
      check(deepam_train_from_dir(train_dir.c_str(), &opts, &m.ptr, &report));
      check(deepam_model_save(m.ptr, train_out.c_str()));
      take_report(report, train_report);
      std::cout << "model written to " << train_out << "\n";
    } else if (*sr) {
      ModelHandle m;
      check(deepam_model_load(sr_model.c_str(), &m.ptr));
      double value = 0.0;
      check(deepam_sr_image(m.ptr, sr_in.c_str(), sr_out.c_str(), sr_sigma_t ? 1 : 0, sr_sigma_t.value_or(0.0),
                            sr_stride, sr_ref.empty() ? nullptr : sr_ref.c_str(), &value));
      if (!sr_ref.empty()) std::printf("PSNR %.4f dB\n", value);
    } else if (*self) {
      char* report = nullptr;
      const auto opts = self_flags.to_c(!quiet);
      check(deepam_self_sr_image(self_in.c_str(), self_out.c_str(), &opts, &report));
      take_report(report, self_report);
      if (!self_ref.empty()) {
        double value = 0.0;
        check(deepam_psnr_files(self_out.c_str(), self_ref.c_str(), 0, &value));
        std::printf("PSNR %.4f dB\n", value);
      }
    } else if (*eval) {
      if (eval_model.empty() && !eval_bicubic && !eval_self) {
        std::cerr << "error: eval needs --model, --bicubic or --self\n";
        return 2;
      }
      ModelHandle m;
      if (!eval_model.empty()) check(deepam_model_load(eval_model.c_str(), &m.ptr));
      deepam_eval_options o;
      deepam_eval_options_init(&o);
      o.mode = eval_bicubic ? DEEPAM_EVAL_BICUBIC : eval_self ? DEEPAM_EVAL_SELF : DEEPAM_EVAL_MODEL;
      o.has_sigma_t = eval_sigma_t ? 1 : 0;
      o.sigma_t = eval_sigma_t.value_or(0.0);
      o.rescale_thresholds = eval_no_rescale ? 0 : 1;
      o.seed = eval_seed;
      o.shave = eval_shave;
      o.stride = eval_self_flags.inference_stride;
      o.scale = eval_self_flags.scale;
      o.output_dir = eval_outdir.empty() ? nullptr : eval_outdir.c_str();
      const auto self_opts = eval_self_flags.to_c(!quiet);
      o.self_options = &self_opts;
      if (!quiet) o.log = log_stderr;
      deepam_eval_result* r = nullptr;
      check(deepam_eval_dir(eval_dir.c_str(), m.ptr, &o, &r));
      std::cout << deepam_eval_format(r, eval_report == "csv" ? 1 : 0);
      if (!eval_csv.empty()) write_text(eval_csv, deepam_eval_format(r, 1));
      deepam_eval_free(r);
    } else if (*render) {
      ModelHandle m;
      check(deepam_model_load(render_model.c_str(), &m.ptr));
      check(deepam_render_dict(m.ptr, render_layer, render_out.c_str()));
    } else if (*relu) {
      ModelHandle m;
      check(deepam_model_load(relu_model.c_str(), &m.ptr));
      check(deepam_model_export_relu(m.ptr, relu_out.c_str()));
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
