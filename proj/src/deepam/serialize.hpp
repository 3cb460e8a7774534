#pragma once

// Binary model container:
//   "DAM1" | version u32 | L u32 | p, s, crop, stride u32 | sigma_N f64
//   | per layer: d_in, d_out, d_ipad u32, Omega (row-major f64), lambda f64
//   | D rows, cols u32, D (row-major f64) | CRC32 of everything before it.
// All integers and doubles little-endian. Version 1 holds a DeepAM, version 2
// its ReLU form (sign-doubled layers; lambda holds the negated biases).

#include "deepam/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace deepam {

inline constexpr std::uint32_t kFormatDeepAM = 1;
inline constexpr std::uint32_t kFormatRelu = 2;

std::vector<std::uint8_t> to_bytes(const DeepAMModel& model);
DeepAMModel model_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_model(const DeepAMModel& model, const std::string& path);
DeepAMModel load_model(const std::string& path);

struct ReluModelFile {
  ReluNetwork net;
  PatchGeometry geom;
  double training_noise_sigma = 0.0;
};

std::vector<std::uint8_t> relu_to_bytes(const DeepAMModel& model);
ReluModelFile relu_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_relu(const DeepAMModel& model, const std::string& path);
ReluModelFile load_relu(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace deepam
