#pragma once

// Information preserving analysis dictionaries and their small thresholds.

#include "deepam/common.hpp"
#include "deepam/manifold_opt.hpp"

#include <vector>

namespace deepam {

// Per-atom Laplacian scale (mean absolute response). Dead atoms have no response.
struct LaplacianStats {
  Vector sigmas;
  std::vector<bool> dead;

  int dead_count() const;
};

struct ThresholdSearchGrid {
  std::vector<double> rho_values;  // strictly increasing, positive

  /// {1,...,9} x 10^e for e in [-4, 1].
  static ThresholdSearchGrid standard();
  /// Members of the {1..9} x 10^e ladder that lie in [lo, hi].
  static ThresholdSearchGrid between(double lo, double hi);
  void validate() const;
};

struct ThresholdSearchResult {
  double rho = 0.0;
  Vector lambda;                  // rho * base
  double score = 0.0;             // ||target - G Z||_F^2 at rho
  Matrix G;                       // least-squares map at rho
  std::vector<double> all_scores; // one per grid value
};

/// Signal subspace of X: W = left singular vectors whose singular value
/// exceeds rel_tol * sigma_max, U the rest.
SubspaceBasis compute_subspace(const Matrix& X, double rel_tol = 1e-6);

/// W = the leading `rank` left singular vectors of X, U the remaining ones.
SubspaceBasis leading_subspace(const Matrix& X, int rank);

/// Singular values of X in decreasing order.
Vector singular_values(const Matrix& X);

/// Default weights and iteration budget for a layer with `input_dim` inputs and `atoms` IPAD atoms.
GoalPlusConfig ipad_config(int input_dim, int atoms, int max_iters);

/// Runs the optimiser for an IPAD of `atoms` rows on X_prev. `init` may be
/// empty, in which case Gaussian rows drawn from `rng` are used.
OptimizeResult learn_ipad(const Matrix& X_prev, int atoms, const SubspaceBasis& basis, const GoalPlusConfig& config,
                          const Matrix& init, std::mt19937_64& rng);

/// sigma_j = mean_k |w_j^T x_k|; atoms with sigma_j < 1e-12 are dead.
LaplacianStats estimate_sigmas(const Matrix& omega, const Matrix& X);

/// Least-squares map G with G (Z Z^T) = target Z^T. A ridge of
/// 1e-8 trace/d is added when Z Z^T is numerically singular; G = 0 when Z = 0.
Matrix least_squares_map(const Matrix& Z, const Matrix& target);

/// Grid search over rho for thresholds rho * base applied to `responses`
/// (Omega X). Smallest rho wins ties. Throws when every rho zeroes Z.
ThresholdSearchResult search_rho(const Matrix& responses, const Matrix& target, const Vector& base,
                                 const ThresholdSearchGrid& grid);

/// IPAD thresholds: lambda = rho * [1/sigma_j], dead atoms get 0.
ThresholdSearchResult search_rho_ipad(const Matrix& omega_ipad, const Matrix& X_prev, const Matrix& Y,
                                      const LaplacianStats& stats, const ThresholdSearchGrid& grid);

Vector ipad_threshold_base(const LaplacianStats& stats);

/// Fraction of nonzero entries per row.
Vector survivor_fractions(const Matrix& Z);

}  // namespace deepam
