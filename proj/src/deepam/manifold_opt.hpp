#pragma once

// GOAL+ style learning of analysis dictionaries: conjugate gradient on the
// product of unit spheres restricted to the orthogonal complement of U.

#include "deepam/common.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace deepam {

// W spans the signal subspace, U its orthogonal complement. Both column-orthonormal.
struct SubspaceBasis {
  Matrix W;
  Matrix U;

  int rank() const { return static_cast<int>(W.cols()); }
  int dim() const { return static_cast<int>(W.rows()); }
};

struct GoalPlusConfig {
  double nu = 1.0;     // sparsity sharpness
  double kappa = 0.0;  // log-det weight
  double mu = 0.0;     // joint-sparsity weight
  int max_iters = 500;
  double armijo_c = 1e-4;
  double shrink_factor = 0.5;
  double initial_step = 1.0;
  int max_halvings = 30;
  int restart_every = 20;
  double grad_tol = 1e-7;

  void validate() const;
};

// Non-owning view of the data the objective terms read. f = g + kappa h + mu p.
struct ObjectiveSpec {
  const Matrix* sparsify_data = nullptr;  // X for g, n x N
  const Matrix* basis_w = nullptr;        // W for h, n x K
  const Matrix* joint_y = nullptr;        // Y^i for p, n x N
  const Matrix* joint_e = nullptr;        // E^i for p, n x N
  double nu = 1.0;
  double kappa = 0.0;
  double mu = 0.0;

  int dim() const;
  void validate() const;
};

/// sgn(a) max(|a| - lambda, 0), elementwise.
Vector soft_threshold(const Vector& a, const Vector& lambda);
/// Row j of `a` is thresholded by lambda[j].
Matrix soft_threshold_rows(const Matrix& a, const Vector& lambda);

/// g(Omega) = 1/(N m log(1+nu)) sum log(1 + nu (w_j^T x_i)^2).
double term_sparsify(const Matrix& omega, const Matrix& X, double nu);

/// h(Omega) = -1/(K log K) log det(W^T Omega^T Omega W / m). Returns +inf when
/// the Gram matrix is singular. For K = 1 the normaliser K log K is taken as 1.
double term_logdet(const Matrix& omega, const Matrix& W);

/// p(Psi) = c sum log(1 + nu ((psi^T y)^2 - (psi^T e)^2)^2), c = 1/(N d_C log(1+nu)).
double term_joint_sparsify(const Matrix& psi, const Matrix& Y, const Matrix& E, double nu);

Matrix gradient_sparsify(const Matrix& omega, const Matrix& X, double nu);
/// Empty optional when the Gram matrix is singular.
std::optional<Matrix> gradient_logdet(const Matrix& omega, const Matrix& W);
Matrix gradient_joint_sparsify(const Matrix& psi, const Matrix& Y, const Matrix& E, double nu);

/// Full objective; +inf if the log-det term is singular.
double objective_value(const ObjectiveSpec& spec, const Matrix& omega);
/// Full Euclidean gradient; throws NumericalError on a singular log-det term.
Matrix objective_gradient(const ObjectiveSpec& spec, const Matrix& omega);

/// Row-wise projection onto the tangent space: each row g_j is mapped to
/// (I - Q^+ Q) g_j with Q = [2 w_j, U]^T.
Matrix tangent_project(const Matrix& G, const Matrix& omega, const Matrix& U);

/// Removes the U component of every row, then normalises rows to unit length.
/// Throws NumericalError if a row has no component outside span(U).
Matrix retract_rows(const Matrix& omega, const Matrix& U);

/// i.i.d. standard Gaussian rows, projected onto span(W) and normalised.
Matrix gaussian_init(int rows, const SubspaceBasis& basis, std::mt19937_64& rng);

struct OptimizeResult {
  Matrix omega;
  std::vector<double> trace;  // objective at the start and after each accepted step
  int iterations = 0;
  bool converged = false;  // projected gradient fell below grad_tol
};

OptimizeResult optimize(const ObjectiveSpec& spec, const Matrix& init, const SubspaceBasis& basis,
                        const GoalPlusConfig& config);

}  // namespace deepam
