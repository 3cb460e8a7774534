#pragma once

// Clustering analysis dictionaries: learned on mid-resolution data through a
// jointly sparsifying atom set Psi, then mapped back to the layer input.

#include "deepam/common.hpp"
#include "deepam/ipad.hpp"
#include "deepam/manifold_opt.hpp"

#include <vector>

namespace deepam {

struct LayerSynthesis {
  Matrix D;     // d_out x d_in, ridge least squares Y X^T (X X^T + I)^{-1}
  Matrix Ymid;  // D X
  Matrix E;     // Y - Ymid; Ymid + E reproduces Y bit for bit
};

LayerSynthesis layer_synthesis(const Matrix& X_prev, const Matrix& Y);

/// D = Y X^T (X X^T + I)^{-1}.
Matrix ridge_synthesis(const Matrix& X, const Matrix& Y);

/// Default weights and iteration budget for a layer with `input_dim` inputs and `atoms` CAD atoms.
GoalPlusConfig cad_config(int input_dim, int atoms, int max_iters);

/// Learns Psi (atoms x d_out) minimising g + kappa h + mu p on (Ymid, E) with
/// `basis` the signal subspace of the HR targets.
OptimizeResult learn_psi(const Matrix& Ymid, const Matrix& E, int atoms, const SubspaceBasis& basis,
                         const GoalPlusConfig& config, const Matrix& init, std::mt19937_64& rng);

struct ReparamResult {
  Matrix omega;           // unit-norm rows of Psi D
  std::vector<int> kept;  // row of Psi that produced each output row
};

/// Omega_C = Psi D with rows normalised; rows with no component in range(D^T) are dropped.
ReparamResult reparam_cad(const Matrix& psi, const Matrix& D, const Logger& log = {});

/// Y - G S_lambda(Omega_I X) with G the least-squares map (G = 0 if nothing survives).
Matrix ipad_residual(const Matrix& omega_ipad, const Vector& lambda_ipad, const Matrix& X_prev, const Matrix& Y);

/// CAD thresholds: lambda = rho * [sigma_j], dead atoms get 0.
ThresholdSearchResult search_rho_cad(const Matrix& omega_cad, const Matrix& X_prev, const Matrix& Y_residual,
                                     const LaplacianStats& stats, const ThresholdSearchGrid& grid);

Vector cad_threshold_base(const LaplacianStats& stats);

}  // namespace deepam
