#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "deepam/deepam.h"
#include "deepam/image.hpp"
#include "deepam/model.hpp"
#include "deepam/serialize.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

deepam::DeepAMModel sample_model(std::uint64_t seed, std::vector<int> widths) {
  oracle::Rng rng(seed);
  deepam::DeepAMModel m = oracle::random_model(widths, 144, rng);
  return m;
}

struct Handle {
  deepam_model* ptr = nullptr;
  ~Handle() { deepam_model_free(ptr); }
};

Handle from_model(const deepam::DeepAMModel& m) {
  const auto bytes = deepam::to_bytes(m);
  Handle h;
  REQUIRE(deepam_model_from_bytes(bytes.data(), bytes.size(), &h.ptr) == DEEPAM_OK);
  return h;
}

}  // namespace

TEST_CASE("version and null arguments") {
  CHECK(std::string(deepam_version()) == "1.0.0");
  deepam_model* m = nullptr;
  CHECK(deepam_model_load(nullptr, &m) == DEEPAM_ERR_CONFIG);
  CHECK(std::strlen(deepam_last_error()) > 0);
  CHECK(deepam_model_from_bytes(nullptr, 8, &m) == DEEPAM_ERR_CONFIG);
  CHECK(deepam_model_info_get(nullptr, nullptr) == DEEPAM_ERR_CONFIG);
  CHECK(deepam_model_forward(nullptr, nullptr, 0, nullptr) == DEEPAM_ERR_CONFIG);
  CHECK(deepam_train_from_dir(nullptr, nullptr, &m, nullptr) == DEEPAM_ERR_CONFIG);
  CHECK(deepam_eval_dir(nullptr, nullptr, nullptr, nullptr) == DEEPAM_ERR_CONFIG);
  CHECK(m == nullptr);
  deepam_model_free(nullptr);
  deepam_eval_free(nullptr);
  deepam_string_free(nullptr);
}

TEST_CASE("malformed model bytes") {
  const std::vector<std::uint8_t> junk(64, 0xAB);
  deepam_model* m = nullptr;
  CHECK(deepam_model_from_bytes(junk.data(), junk.size(), &m) == DEEPAM_ERR_DATA);
  CHECK(std::string(deepam_last_error()).find("magic") != std::string::npos);
  CHECK(m == nullptr);
  CHECK(deepam_model_load("/nonexistent/deepam/model.dam", &m) == DEEPAM_ERR_DATA);
}

TEST_CASE("info, layers and forward") {
  const deepam::DeepAMModel src = sample_model(1, {36, 10, 8});
  Handle h = from_model(src);
  deepam_model_info info;
  REQUIRE(deepam_model_info_get(h.ptr, &info) == DEEPAM_OK);
  CHECK(info.num_layers == 2);
  CHECK(info.input_dim == 36);
  CHECK(info.output_dim == 144);
  CHECK(info.patch_size == 6);
  CHECK(info.scale == 2);

  int din = 0, dout = 0, dipad = 0;
  REQUIRE(deepam_model_layer_info(h.ptr, 2, &din, &dout, &dipad) == DEEPAM_OK);
  CHECK(din == 10);
  CHECK(dout == 8);
  CHECK(dipad == src.layers[1].d_ipad);
  CHECK(deepam_model_layer_info(h.ptr, 0, &din, &dout, &dipad) == DEEPAM_ERR_CONFIG);
  CHECK(deepam_model_layer_info(h.ptr, 3, &din, &dout, &dipad) == DEEPAM_ERR_CONFIG);

  oracle::Rng rng(2);
  const oracle::MatrixXd X = oracle::gaussian(36, 5, rng);
  std::vector<double> y(144 * 5);
  REQUIRE(deepam_model_forward(h.ptr, X.data(), 5, y.data()) == DEEPAM_OK);
  const oracle::MatrixXd ref = deepam::forward_batch(src, X);
  for (int i = 0; i < 5; ++i)
    for (int r = 0; r < 144; ++r) CHECK(y[i * 144 + r] == doctest::Approx(ref(r, i)).epsilon(1e-14));
}

TEST_CASE("rescaling needs a noisy-trained model") {
  Handle h = from_model(sample_model(3, {36, 12}));
  deepam_model* out = nullptr;
  CHECK(deepam_model_rescale(h.ptr, 0.1, &out) == DEEPAM_ERR_CONFIG);
  CHECK(out == nullptr);

  deepam::DeepAMModel noisy = sample_model(4, {36, 12});
  noisy.training_noise_sigma = 0.05;
  Handle n = from_model(noisy);
  REQUIRE(deepam_model_rescale(n.ptr, 0.1, &out) == DEEPAM_OK);
  deepam_model_info info;
  deepam_model_info_get(out, &info);
  CHECK(info.training_noise_sigma == 0.1);
  deepam_model_free(out);
}

TEST_CASE("atom correlation count query") {
  Handle h = from_model(sample_model(5, {36, 12}));
  size_t count = 0;
  REQUIRE(deepam_model_atom_correlation(h.ptr, nullptr, nullptr, 0, &count) == DEEPAM_OK);
  CHECK(count == 12);
  std::vector<double> v(count);
  std::vector<int> ipad(count);
  CHECK(deepam_model_atom_correlation(h.ptr, v.data(), ipad.data(), 3, &count) == DEEPAM_ERR_CONFIG);
  REQUIRE(deepam_model_atom_correlation(h.ptr, v.data(), ipad.data(), v.size(), &count) == DEEPAM_OK);
  for (double c : v) CHECK(std::abs(c) <= 1.0 + 1e-12);

  Handle deep = from_model(sample_model(6, {36, 10, 8}));
  CHECK(deepam_model_atom_correlation(deep.ptr, nullptr, nullptr, 0, &count) == DEEPAM_ERR_CONFIG);
}

TEST_CASE("linear training, inference and evaluation through the C API") {
  TempDir train("deepam_capi_train"), test("deepam_capi_test"), empty("deepam_capi_empty");
  deepam::write_png((train.path / "a.png").string(), testsupport::synthetic_image(60, 60, 1));
  deepam::write_png((test.path / "b.png").string(), testsupport::synthetic_image(40, 40, 2));

  deepam_train_options o;
  deepam_train_options_init(&o);
  o.arch = "0";
  Handle h;
  char* report = nullptr;
  REQUIRE(deepam_train_from_dir(train.path.string().c_str(), &o, &h.ptr, &report) == DEEPAM_OK);
  REQUIRE(report != nullptr);
  CHECK(std::string(report).find("\"k_lr\"") != std::string::npos);
  deepam_string_free(report);

  const std::string model_path = (train.path / "m.dam").string();
  REQUIRE(deepam_model_save(h.ptr, model_path.c_str()) == DEEPAM_OK);
  Handle back;
  REQUIRE(deepam_model_load(model_path.c_str(), &back.ptr) == DEEPAM_OK);

  deepam_eval_options e;
  deepam_eval_options_init(&e);
  e.shave = 2;
  deepam_eval_result* r = nullptr;
  REQUIRE(deepam_eval_dir(test.path.string().c_str(), back.ptr, &e, &r) == DEEPAM_OK);
  REQUIRE(deepam_eval_count(r) == 1);
  const char* name = nullptr;
  double p = 0, pb = 0;
  REQUIRE(deepam_eval_row(r, 0, &name, &p, &pb) == DEEPAM_OK);
  CHECK(std::string(name) == "b");
  CHECK(p > pb);
  CHECK(deepam_eval_row(r, 1, &name, &p, &pb) == DEEPAM_ERR_CONFIG);
  CHECK(std::string(deepam_eval_format(r, 1)).rfind("image,", 0) == 0);
  deepam_eval_free(r);

  r = nullptr;
  CHECK(deepam_eval_dir(empty.path.string().c_str(), back.ptr, &e, &r) == DEEPAM_ERR_DATA);
  CHECK(r == nullptr);

  const std::string in = (test.path / "b.png").string(), out = (train.path / "b_x2.png").string();
  double psnr = 0;
  REQUIRE(deepam_sr_image(back.ptr, in.c_str(), out.c_str(), 0, 0.0, 0, nullptr, &psnr) == DEEPAM_OK);
  const deepam::ByteImage up = deepam::read_image(out);
  CHECK(up.height == 80);
  CHECK(up.width == 80);
  CHECK(deepam_sr_image(back.ptr, in.c_str(), out.c_str(), 1, 0.1, 0, nullptr, &psnr) == DEEPAM_ERR_CONFIG);
  CHECK(deepam_psnr_files(in.c_str(), in.c_str(), 0, &psnr) == DEEPAM_OK);
  CHECK(std::isinf(psnr));

  const std::string png = (train.path / "dict.png").string();
  CHECK(deepam_render_dict(back.ptr, 1, png.c_str()) == DEEPAM_OK);
  CHECK(deepam_render_dict(back.ptr, 2, png.c_str()) == DEEPAM_ERR_CONFIG);
}
