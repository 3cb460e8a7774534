#include "deepam/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace deepam {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'M', '1'};

class Writer {
 public:
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }

  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }

  void matrix(const Matrix& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index c = 0; c < M.cols(); ++c) f64(M(r, c));
  }

  void vector(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }

  std::uint32_t dim(Eigen::Index n) {
    if (n < 0 || n > 0xffffffffLL) throw DataError("dimension does not fit the model file format");
    u32(static_cast<std::uint32_t>(n));
    return static_cast<std::uint32_t>(n);
  }

  std::vector<std::uint8_t> finish() {
    const uLong crc = crc32(0L, bytes_.data(), static_cast<uInt>(bytes_.size()));
    u32(static_cast<std::uint32_t>(crc));
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() < pos_ || bytes_.size() - pos_ < n)
      throw DataError("model file truncated at byte offset " + std::to_string(bytes_.size()) + " while reading " +
                      what + " (needed " + std::to_string(n) + " bytes from offset " + std::to_string(pos_) + ")");
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  Matrix matrix(std::uint32_t rows, std::uint32_t cols, const char* what) {
    need(static_cast<std::size_t>(rows) * cols * 8, what);
    Matrix M(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) M(r, c) = f64(what);
    return M;
  }

  Vector vector(std::uint32_t n, const char* what) {
    need(static_cast<std::size_t>(n) * 8, what);
    Vector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = f64(what);
    return v;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

// Shared layout for both versions.
struct Container {
  std::uint32_t version = kFormatDeepAM;
  PatchGeometry geom;
  double sigma = 0.0;
  std::vector<AnalysisLayer> layers;
  Matrix D;
};

std::vector<std::uint8_t> encode(const Container& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(c.version);
  w.dim(static_cast<Eigen::Index>(c.layers.size()));
  w.dim(c.geom.p);
  w.dim(c.geom.s);
  w.dim(c.geom.crop);
  w.dim(c.geom.stride);
  w.f64(c.sigma);
  for (const auto& l : c.layers) {
    w.dim(l.omega.cols());
    w.dim(l.omega.rows());
    w.dim(l.d_ipad);
    w.matrix(l.omega);
    w.vector(l.lambda);
  }
  w.dim(c.D.rows());
  w.dim(c.D.cols());
  w.matrix(c.D);
  return w.finish();
}

Container decode(const std::vector<std::uint8_t>& bytes, std::uint32_t expected_version) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw DataError("not a DeepAM model file (bad magic at byte offset 0)");
  Reader r(bytes);
  r.skip(4);
  Container c;
  c.version = r.u32("format version");
  if (c.version != expected_version)
    throw DataError("unsupported model format version " + std::to_string(c.version) + " (expected " +
                    std::to_string(expected_version) + ")");
  const std::uint32_t L = r.u32("layer count");
  c.geom.p = static_cast<int>(r.u32("patch size"));
  c.geom.s = static_cast<int>(r.u32("scale"));
  c.geom.crop = static_cast<int>(r.u32("crop size"));
  c.geom.stride = static_cast<int>(r.u32("stride"));
  c.sigma = r.f64("training noise sigma");
  for (std::uint32_t i = 0; i < L; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t d_in = r.u32("layer input dimension");
    const std::uint32_t d_out = r.u32("layer output dimension");
    const std::uint32_t d_ipad = r.u32("IPAD atom count");
    const std::uint32_t prev = i == 0 ? 0 : static_cast<std::uint32_t>(c.layers.back().d_out());
    if (i > 0 && d_in != prev)
      throw DataError("layer " + std::to_string(i + 1) + " at byte offset " + std::to_string(at) +
                      ": input dimension " + std::to_string(d_in) + " does not chain with previous output " +
                      std::to_string(prev));
    if (d_ipad > d_out) throw DataError("layer " + std::to_string(i + 1) + ": IPAD count exceeds layer size");
    AnalysisLayer l;
    l.d_ipad = static_cast<int>(d_ipad);
    l.omega = r.matrix(d_out, d_in, "analysis dictionary");
    l.lambda = r.vector(d_out, "thresholds");
    c.layers.push_back(std::move(l));
  }
  const std::size_t at = r.offset();
  const std::uint32_t rows = r.u32("synthesis rows");
  const std::uint32_t cols = r.u32("synthesis columns");
  if (!c.layers.empty() && cols != static_cast<std::uint32_t>(c.layers.back().d_out()))
    throw DataError("synthesis dictionary at byte offset " + std::to_string(at) + " has " + std::to_string(cols) +
                    " columns, last layer has " + std::to_string(c.layers.back().d_out()) + " atoms");
  c.D = r.matrix(rows, cols, "synthesis dictionary");
  const std::size_t payload = r.offset();
  const std::uint32_t stored = r.u32("checksum");
  if (r.offset() != bytes.size())
    throw DataError("trailing data after checksum at byte offset " + std::to_string(r.offset()));
  const auto crc = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(payload)));
  if (crc != stored) throw DataError("model file checksum mismatch (file corrupted)");
  return c;
}

DeepAMModel to_model(Container&& c) {
  DeepAMModel m;
  m.layers = std::move(c.layers);
  m.D = std::move(c.D);
  m.geom = c.geom;
  m.training_noise_sigma = c.sigma;
  return m;
}

}  // namespace

std::vector<std::uint8_t> to_bytes(const DeepAMModel& model) {
  model.validate();
  Container c;
  c.version = kFormatDeepAM;
  c.geom = model.geom;
  c.sigma = model.training_noise_sigma;
  c.layers = model.layers;
  c.D = model.D;
  return encode(c);
}

DeepAMModel model_from_bytes(const std::vector<std::uint8_t>& bytes) {
  DeepAMModel m = to_model(decode(bytes, kFormatDeepAM));
  m.validate();
  return m;
}

std::vector<std::uint8_t> relu_to_bytes(const DeepAMModel& model) {
  model.validate();
  const ReluNetwork net = to_relu_network(model);
  Container c;
  c.version = kFormatRelu;
  c.geom = model.geom;
  c.sigma = model.training_noise_sigma;
  for (std::size_t k = 0; k < net.biases.size(); ++k) {
    AnalysisLayer l;
    l.omega = net.weights[k];
    l.lambda = -net.biases[k];
    l.d_ipad = 2 * model.layers[k].d_ipad;
    c.layers.push_back(std::move(l));
  }
  c.D = net.weights.back();
  return encode(c);
}

ReluModelFile relu_from_bytes(const std::vector<std::uint8_t>& bytes) {
  Container c = decode(bytes, kFormatRelu);
  ReluModelFile out;
  out.geom = c.geom;
  out.training_noise_sigma = c.sigma;
  for (auto& l : c.layers) {
    out.net.weights.push_back(std::move(l.omega));
    out.net.biases.push_back(-l.lambda);
  }
  out.net.weights.push_back(std::move(c.D));
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

void save_model(const DeepAMModel& model, const std::string& path) { write_file(path, to_bytes(model)); }

DeepAMModel load_model(const std::string& path) {
  try {
    return model_from_bytes(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_relu(const DeepAMModel& model, const std::string& path) { write_file(path, relu_to_bytes(model)); }

ReluModelFile load_relu(const std::string& path) { return relu_from_bytes(read_file(path)); }

}  // namespace deepam
