#pragma once

#include "deepam/common.hpp"
#include "deepam/ipad.hpp"
#include "deepam/patches.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace deepam {

// One analysis layer. The first d_ipad rows are IPAD atoms, the rest CAD atoms.
struct AnalysisLayer {
  Matrix omega;   // d_out x d_in, unit-norm rows
  Vector lambda;  // d_out, non-negative
  int d_ipad = 0;

  int d_in() const { return static_cast<int>(omega.cols()); }
  int d_out() const { return static_cast<int>(omega.rows()); }
  int d_cad() const { return d_out() - d_ipad; }
};

struct DeepAMModel {
  std::vector<AnalysisLayer> layers;
  Matrix D;  // d_{L+1} x d_L synthesis dictionary
  PatchGeometry geom;
  double training_noise_sigma = 0.0;

  int input_dim() const;
  int output_dim() const { return static_cast<int>(D.rows()); }

  /// Checks the dimension chain, unit rows and threshold signs.
  void validate() const;
};

// Feed-forward network with one-sided rectification between layers. Hidden
// layer k computes max(W_k x + b_k, 0); the last weight matrix is linear.
struct ReluNetwork {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;  // one per hidden layer

  Matrix forward(const Matrix& X) const;
};

/// D S_L(Omega_L ... S_1(Omega_1 x)) for one vector.
Vector forward(const DeepAMModel& model, const Vector& x0);
/// Column-wise forward pass.
Matrix forward_batch(const DeepAMModel& model, const Matrix& X0);
/// Output of the first `depth` analysis layers.
Matrix propagate(const std::vector<AnalysisLayer>& layers, const Matrix& X0, std::size_t depth);

/// Ridge least squares D = Y X^T (X X^T + I)^{-1}.
Matrix final_synthesis(const Matrix& X_L, const Matrix& Y);

ReluNetwork to_relu_network(const DeepAMModel& model);

/// First-layer thresholds rescaled for test noise sigma_T: IPAD rows by
/// (sigma_T/sigma_N)^2, CAD rows by sigma_T/sigma_N.
DeepAMModel rescale_for_noise(const DeepAMModel& model, double sigma_T);

struct AtomCorrelation {
  double value = 0.0;  // normalised inner product of H^+ omega_j and d_j
  bool ipad = false;
};

/// Degradation operator mapping vectorised HR patches to LR patches.
Matrix degradation_matrix(const PatchGeometry& geom);
/// Per-atom diagnostic for single-layer models.
std::vector<AtomCorrelation> atom_correlation_diagnostic(const DeepAMModel& model);

// ---- training ---------------------------------------------------------------

struct LayerArch {
  int atoms = 0;
  int ipad = -1;  // -1: K_LR (3 K_LR in layer 1 when training on noisy inputs)
};

/// Parses "d[:ipad],d[:ipad],...". An empty string or "0" means no analysis layers.
std::vector<LayerArch> parse_arch(const std::string& spec);
std::string format_arch(const std::vector<LayerArch>& arch);

struct TrainOptions {
  PatchGeometry geom;
  double training_noise_sigma = 0.0;
  std::uint64_t seed = 1;
  int batch_size = 40000;
  int num_batches = 15;
  int iters_per_batch = 100;
  int single_batch_iters = 500;
  ThresholdSearchGrid grid = ThresholdSearchGrid::standard();
  double rank_tol = 1e-6;
  bool research_thresholds_per_batch = false;
  Logger log;

  void validate() const;
};

struct LayerReport {
  int atoms = 0;
  int ipad = 0;
  int cad = 0;
  int signal_rank = 0;  // K used for the IPAD log-det term
  int target_rank = 0;  // K used for the CAD log-det term
  std::vector<double> ipad_trace;
  std::vector<double> cad_trace;
  double rho_ipad = 0.0;
  double rho_cad = 0.0;
  double score_ipad = 0.0;
  double score_cad = 0.0;
  int dead_atoms = 0;
  int dropped_cad = 0;
  Vector survivors;  // per atom, on the final batch
};

struct TrainReport {
  int k_lr = 0;
  std::int64_t samples = 0;
  int batches = 0;
  int iters_per_batch = 0;
  std::uint64_t seed = 0;
  double train_mse = 0.0;
  double linear_mse = 0.0;  // ridge LS on raw inputs
  std::vector<LayerReport> layers;

  std::string to_json() const;
};

struct TrainResult {
  DeepAMModel model;
  TrainReport report;
};

TrainResult train(const PatchDataset& data, const std::vector<LayerArch>& arch, const TrainOptions& options);

/// Mean squared error per entry of model predictions against Y.
double dataset_mse(const DeepAMModel& model, const PatchDataset& data);

}  // namespace deepam
