#include "deepam/cad.hpp"

#include <cmath>
#include <string>

namespace deepam {

Matrix ridge_synthesis(const Matrix& X, const Matrix& Y) {
  if (X.cols() != Y.cols()) throw DataError("synthesis: sample counts differ");
  Matrix gram = X * X.transpose();
  gram.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("synthesis: X X^T + I is not positive definite");
  // (X X^T + I) D^T = X Y^T
  return llt.solve(X * Y.transpose()).transpose();
}

LayerSynthesis layer_synthesis(const Matrix& X_prev, const Matrix& Y) {
  LayerSynthesis out;
  out.D = ridge_synthesis(X_prev, Y);
  out.Ymid = out.D * X_prev;
  out.E = Y - out.Ymid;
  return out;
}

GoalPlusConfig cad_config(int input_dim, int atoms, int max_iters) {
  GoalPlusConfig cfg;
  cfg.nu = 100.0 * input_dim;
  cfg.kappa = 0.1 * atoms;
  cfg.mu = 100.0;
  cfg.max_iters = max_iters;
  return cfg;
}

OptimizeResult learn_psi(const Matrix& Ymid, const Matrix& E, int atoms, const SubspaceBasis& basis,
                         const GoalPlusConfig& config, const Matrix& init, std::mt19937_64& rng) {
  if (atoms < 1) throw ConfigError("learn_psi: need at least one atom");
  if (basis.dim() != Ymid.rows()) throw DataError("learn_psi: basis dimension does not match the data");
  ObjectiveSpec spec;
  spec.sparsify_data = &Ymid;
  spec.basis_w = &basis.W;
  spec.joint_y = &Ymid;
  spec.joint_e = &E;
  spec.nu = config.nu;
  spec.kappa = config.kappa;
  spec.mu = config.mu;
  const Matrix start = init.size() > 0 ? init : gaussian_init(atoms, basis, rng);
  if (start.rows() != atoms || start.cols() != Ymid.rows()) throw DataError("learn_psi: initial dictionary has the wrong shape");
  return optimize(spec, start, basis, config);
}

ReparamResult reparam_cad(const Matrix& psi, const Matrix& D, const Logger& log) {
  if (psi.cols() != D.rows()) throw DataError("reparam_cad: inner dimensions differ");
  const Matrix prod = psi * D;
  const double scale = psi.norm() * D.norm();
  ReparamResult out;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < prod.rows(); ++r) {
    const double n = prod.row(r).norm();
    if (n > 1e-12 * scale && n > 0.0)
      rows.push_back(r);
    else
      log_line(log, "warning: CAD atom " + std::to_string(r) + " has no component in range(D^T); dropped");
  }
  if (rows.empty()) throw NumericalError("reparam_cad: every CAD atom vanished after reparameterisation");
  out.omega.resize(static_cast<Eigen::Index>(rows.size()), prod.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.omega.row(k) = prod.row(rows[k]) / prod.row(rows[k]).norm();
    out.kept.push_back(static_cast<int>(rows[k]));
  }
  return out;
}

Matrix ipad_residual(const Matrix& omega_ipad, const Vector& lambda_ipad, const Matrix& X_prev, const Matrix& Y) {
  if (omega_ipad.cols() != X_prev.rows() || X_prev.cols() != Y.cols()) throw DataError("ipad_residual: shape mismatch");
  // infinite thresholds are allowed and zero every coefficient
  const Matrix Z = soft_threshold_rows(omega_ipad * X_prev, lambda_ipad);
  const Matrix G = least_squares_map(Z, Y);
  return Y - G * Z;
}

Vector cad_threshold_base(const LaplacianStats& stats) {
  Vector base(stats.sigmas.size());
  for (Eigen::Index j = 0; j < base.size(); ++j) base[j] = stats.dead[j] ? 0.0 : stats.sigmas[j];
  return base;
}

ThresholdSearchResult search_rho_cad(const Matrix& omega_cad, const Matrix& X_prev, const Matrix& Y_residual,
                                     const LaplacianStats& stats, const ThresholdSearchGrid& grid) {
  if (stats.sigmas.size() != omega_cad.rows()) throw DataError("search_rho_cad: one sigma per atom required");
  return search_rho(omega_cad * X_prev, Y_residual, cad_threshold_base(stats), grid);
}

}  // namespace deepam
