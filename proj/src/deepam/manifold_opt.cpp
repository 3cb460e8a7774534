#include "deepam/manifold_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace deepam {

void GoalPlusConfig::validate() const {
  if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
  if (!(mu >= 0.0)) throw ConfigError("mu must be >= 0");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("armijo_c must lie in (0,1)");
  if (!(shrink_factor > 0.0 && shrink_factor < 1.0)) throw ConfigError("shrink_factor must lie in (0,1)");
  if (!(initial_step > 0.0)) throw ConfigError("initial_step must be > 0");
  if (max_iters < 0 || max_halvings < 0) throw ConfigError("iteration limits must be >= 0");
  if (restart_every < 1) throw ConfigError("restart_every must be >= 1");
  if (!(grad_tol >= 0.0)) throw ConfigError("grad_tol must be >= 0");
}

int ObjectiveSpec::dim() const {
  if (sparsify_data) return static_cast<int>(sparsify_data->rows());
  if (basis_w) return static_cast<int>(basis_w->rows());
  if (joint_y) return static_cast<int>(joint_y->rows());
  return 0;
}

void ObjectiveSpec::validate() const {
  const int n = dim();
  if (n == 0) throw ConfigError("objective has no terms");
  if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
  if (sparsify_data && sparsify_data->rows() != n) throw DataError("sparsify data row count mismatch");
  if (kappa > 0.0 && (!basis_w || basis_w->rows() != n)) throw DataError("log-det term needs W with n rows");
  if (mu > 0.0) {
    if (!joint_y || !joint_e) throw DataError("joint-sparsity term needs Y and E");
    if (joint_y->rows() != n || joint_e->rows() != n || joint_y->cols() != joint_e->cols())
      throw DataError("joint-sparsity data shapes differ");
  }
}

Vector soft_threshold(const Vector& a, const Vector& lambda) {
  if (a.size() != lambda.size()) throw DataError("soft_threshold: length mismatch");
  if ((lambda.array() < 0.0).any()) throw ConfigError("soft_threshold: negative threshold");
  Vector out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double m = std::abs(a[i]) - lambda[i];
    out[i] = m > 0.0 ? std::copysign(m, a[i]) : 0.0;
  }
  return out;
}

Matrix soft_threshold_rows(const Matrix& a, const Vector& lambda) {
  if (a.rows() != lambda.size()) throw DataError("soft_threshold: row count mismatch");
  if ((lambda.array() < 0.0).any()) throw ConfigError("soft_threshold: negative threshold");
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double v = a(r, c);
      const double m = std::abs(v) - lambda[r];
      out(r, c) = m > 0.0 ? std::copysign(m, v) : 0.0;
    }
  return out;
}

namespace {

double sparsify_scale(Eigen::Index samples, Eigen::Index atoms, double nu) {
  return 1.0 / (static_cast<double>(samples) * static_cast<double>(atoms) * std::log1p(nu));
}

// log(1 + t) rather than log1p so Eigen vectorises it; t >= 0 keeps the
// absolute error at one ulp of 1.
double sum_log_square(const Matrix& a, double nu) { return (nu * a.array().square() + 1.0).log().sum(); }

// Log-det of the smaller Gram of (Omega W)/sqrt(m); r = min(m, K) eigenvalues.
struct LogDetParts {
  Matrix omega_w;                      // m x K
  Eigen::LLT<Matrix> chol;             // factor of the r x r Gram
  bool small_side_is_atoms = false;    // m < K: Gram is (1/m) OW (OW)^T
  double value = 0.0;
  bool singular = false;
  double normaliser = 1.0;             // r log r, or 1 when r <= 1
};

LogDetParts logdet_parts(const Matrix& omega, const Matrix& W) {
  LogDetParts parts;
  const double m = static_cast<double>(omega.rows());
  const Eigen::Index K = W.cols();
  const Eigen::Index r = std::min<Eigen::Index>(omega.rows(), K);
  parts.omega_w = omega * W;
  parts.small_side_is_atoms = omega.rows() < K;
  Matrix gram = parts.small_side_is_atoms ? Matrix(parts.omega_w * parts.omega_w.transpose() / m)
                                          : Matrix(parts.omega_w.transpose() * parts.omega_w / m);
  parts.normaliser = r > 1 ? static_cast<double>(r) * std::log(static_cast<double>(r)) : 1.0;
  if (r == 0) {
    parts.singular = true;
    parts.value = std::numeric_limits<double>::infinity();
    return parts;
  }
  parts.chol.compute(gram);
  const double scale = gram.diagonal().cwiseAbs().maxCoeff();
  bool ok = parts.chol.info() == Eigen::Success && scale > 0.0;
  double logdet = 0.0;
  if (ok) {
    const Vector d = Matrix(parts.chol.matrixL()).diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      // pivots below ~1e-15 of the largest Gram entry are numerically zero
      if (!(d[i] * d[i] > 1e-15 * scale)) {
        ok = false;
        break;
      }
      logdet += 2.0 * std::log(d[i]);
    }
  }
  if (!ok) {
    parts.singular = true;
    parts.value = std::numeric_limits<double>::infinity();
    return parts;
  }
  parts.value = -logdet / parts.normaliser;
  return parts;
}

Matrix logdet_gradient(const LogDetParts& parts, const Matrix& omega, const Matrix& W) {
  const double m = static_cast<double>(omega.rows());
  const double coef = -2.0 / (m * parts.normaliser);
  if (parts.small_side_is_atoms) {
    // d/dO log det(OW (OW)^T / m) = (2/m) G^{-1} OW W^T
    return coef * parts.chol.solve(parts.omega_w) * W.transpose();
  }
  // d/dO log det(W^T O^T O W / m) = (2/m) OW M^{-1} W^T
  return coef * parts.chol.solve(parts.omega_w.transpose()).transpose() * W.transpose();
}

Matrix log_square_weights(const Matrix& a, double nu) {
  return (2.0 * nu) * a.array() / (nu * a.array().square() + 1.0);
}

// Cached responses of one dictionary against all data the objective reads.
struct Evaluation {
  Matrix sparse_resp;  // Omega X
  Matrix joint_y;      // Psi Y
  Matrix joint_e;      // Psi E
  double value = 0.0;
};

Evaluation evaluate(const ObjectiveSpec& spec, const Matrix& omega) {
  Evaluation ev;
  double f = 0.0;
  const auto m = omega.rows();
  if (spec.sparsify_data) {
    ev.sparse_resp.noalias() = omega * (*spec.sparsify_data);
    f += sparsify_scale(spec.sparsify_data->cols(), m, spec.nu) * sum_log_square(ev.sparse_resp, spec.nu);
  }
  if (spec.kappa > 0.0) {
    const LogDetParts parts = logdet_parts(omega, *spec.basis_w);
    if (parts.singular) {
      ev.value = std::numeric_limits<double>::infinity();
      return ev;
    }
    f += spec.kappa * parts.value;
  }
  if (spec.mu > 0.0) {
    if (spec.joint_y == spec.sparsify_data)
      ev.joint_y = ev.sparse_resp;
    else
      ev.joint_y.noalias() = omega * (*spec.joint_y);
    ev.joint_e.noalias() = omega * (*spec.joint_e);
    const Matrix q = ev.joint_y.cwiseAbs2() - ev.joint_e.cwiseAbs2();
    f += spec.mu * sparsify_scale(spec.joint_y->cols(), m, spec.nu) * sum_log_square(q, spec.nu);
  }
  ev.value = f;
  return ev;
}

Matrix gradient_from(const ObjectiveSpec& spec, const Matrix& omega, const Evaluation& ev) {
  const auto m = omega.rows();
  Matrix grad = Matrix::Zero(omega.rows(), omega.cols());
  if (spec.sparsify_data) {
    grad.noalias() += sparsify_scale(spec.sparsify_data->cols(), m, spec.nu) *
                      (log_square_weights(ev.sparse_resp, spec.nu) * spec.sparsify_data->transpose());
  }
  if (spec.kappa > 0.0) {
    const LogDetParts parts = logdet_parts(omega, *spec.basis_w);
    if (parts.singular) throw NumericalError("log-det Gram matrix is singular");
    grad += spec.kappa * logdet_gradient(parts, omega, *spec.basis_w);
  }
  if (spec.mu > 0.0) {
    const Matrix q = ev.joint_y.cwiseAbs2() - ev.joint_e.cwiseAbs2();
    const Matrix t = 2.0 * log_square_weights(q, spec.nu);  // d/dq log(1+nu q^2) * 2 from d(b^2)/db
    const double c = spec.mu * sparsify_scale(spec.joint_y->cols(), m, spec.nu);
    grad.noalias() += c * (t.cwiseProduct(ev.joint_y) * spec.joint_y->transpose());
    grad.noalias() -= c * (t.cwiseProduct(ev.joint_e) * spec.joint_e->transpose());
  }
  return grad;
}

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

}  // namespace

double term_sparsify(const Matrix& omega, const Matrix& X, double nu) {
  if (omega.cols() != X.rows()) throw DataError("term_sparsify: dimension mismatch");
  if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
  const Matrix a = omega * X;
  return sparsify_scale(X.cols(), omega.rows(), nu) * sum_log_square(a, nu);
}

double term_logdet(const Matrix& omega, const Matrix& W) {
  if (omega.cols() != W.rows()) throw DataError("term_logdet: dimension mismatch");
  return logdet_parts(omega, W).value;
}

double term_joint_sparsify(const Matrix& psi, const Matrix& Y, const Matrix& E, double nu) {
  if (psi.cols() != Y.rows() || Y.rows() != E.rows() || Y.cols() != E.cols())
    throw DataError("term_joint_sparsify: dimension mismatch");
  const Matrix q = (psi * Y).cwiseAbs2() - (psi * E).cwiseAbs2();
  return sparsify_scale(Y.cols(), psi.rows(), nu) * sum_log_square(q, nu);
}

Matrix gradient_sparsify(const Matrix& omega, const Matrix& X, double nu) {
  if (omega.cols() != X.rows()) throw DataError("gradient_sparsify: dimension mismatch");
  const Matrix a = omega * X;
  return sparsify_scale(X.cols(), omega.rows(), nu) * (log_square_weights(a, nu) * X.transpose());
}

std::optional<Matrix> gradient_logdet(const Matrix& omega, const Matrix& W) {
  if (omega.cols() != W.rows()) throw DataError("gradient_logdet: dimension mismatch");
  const LogDetParts parts = logdet_parts(omega, W);
  if (parts.singular) return std::nullopt;
  return logdet_gradient(parts, omega, W);
}

Matrix gradient_joint_sparsify(const Matrix& psi, const Matrix& Y, const Matrix& E, double nu) {
  ObjectiveSpec spec;
  spec.joint_y = &Y;
  spec.joint_e = &E;
  spec.nu = nu;
  spec.mu = 1.0;
  spec.validate();
  return gradient_from(spec, psi, evaluate(spec, psi));
}

double objective_value(const ObjectiveSpec& spec, const Matrix& omega) {
  spec.validate();
  if (omega.cols() != spec.dim()) throw DataError("dictionary column count does not match data dimension");
  return evaluate(spec, omega).value;
}

Matrix objective_gradient(const ObjectiveSpec& spec, const Matrix& omega) {
  spec.validate();
  if (omega.cols() != spec.dim()) throw DataError("dictionary column count does not match data dimension");
  return gradient_from(spec, omega, evaluate(spec, omega));
}

Matrix tangent_project(const Matrix& G, const Matrix& omega, const Matrix& U) {
  if (G.rows() != omega.rows() || G.cols() != omega.cols()) throw DataError("tangent_project: shape mismatch");
  Matrix out = G;
  Matrix w = omega;
  if (U.cols() > 0) {
    out -= (G * U) * U.transpose();
    w -= (omega * U) * U.transpose();
  }
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    const double nn = w.row(j).squaredNorm();
    if (nn > 0.0) out.row(j) -= (w.row(j).dot(out.row(j)) / nn) * w.row(j);
  }
  return out;
}

Matrix retract_rows(const Matrix& omega, const Matrix& U) {
  Matrix out = omega;
  if (U.cols() > 0) out -= (omega * U) * U.transpose();
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    const double n = out.row(j).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw NumericalError("dictionary row " + std::to_string(j) + " vanished on the feasible subspace");
    out.row(j) /= n;
  }
  return out;
}

Matrix gaussian_init(int rows, const SubspaceBasis& basis, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix init(rows, basis.dim());
  for (Eigen::Index c = 0; c < init.cols(); ++c)
    for (Eigen::Index r = 0; r < init.rows(); ++r) init(r, c) = dist(rng);
  return retract_rows(init, basis.U);
}

OptimizeResult optimize(const ObjectiveSpec& spec, const Matrix& init, const SubspaceBasis& basis,
                        const GoalPlusConfig& config) {
  config.validate();
  spec.validate();
  if (init.cols() != spec.dim()) throw DataError("initial dictionary column count does not match data dimension");
  if (basis.U.cols() > 0 && basis.U.rows() != init.cols()) throw DataError("U has the wrong row count");

  const Matrix& U = basis.U;
  OptimizeResult res;
  res.omega = retract_rows(init, U);
  Evaluation cur = evaluate(spec, res.omega);
  if (!std::isfinite(cur.value))
    throw NumericalError("initial dictionary does not span the signal subspace (log-det term is infinite)");
  res.trace.push_back(cur.value);

  Matrix grad = tangent_project(gradient_from(spec, res.omega, cur), res.omega, U);
  Matrix dir = -grad;
  Matrix prev_grad;
  Matrix prev_dir;
  int since_restart = 0;
  // Each search starts from the previous accepted step, doubled, capped at initial_step.
  double start_step = config.initial_step;

  for (int it = 0; it < config.max_iters; ++it) {
    const double gnorm = grad.norm();
    if (gnorm <= config.grad_tol) {
      res.converged = true;
      break;
    }
    if (it > 0) {
      // Polak-Ribiere+ with transport by re-projection at the current iterate.
      const Matrix moved_prev_grad = tangent_project(prev_grad, res.omega, U);
      const Matrix moved_prev_dir = tangent_project(prev_dir, res.omega, U);
      double beta = inner(grad, grad - moved_prev_grad) / prev_grad.squaredNorm();
      if (!(beta > 0.0) || since_restart >= config.restart_every) {
        beta = 0.0;
        since_restart = 0;
      }
      dir = -grad + beta * moved_prev_dir;
      if (inner(dir, grad) >= 0.0) {
        dir = -grad;
        since_restart = 0;
      }
    }

    bool accepted = false;
    bool steepest = (dir + grad).squaredNorm() == 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const double slope = inner(grad, dir);
      double step = attempt == 0 ? start_step : config.initial_step;
      for (int h = 0; h <= config.max_halvings; ++h, step *= config.shrink_factor) {
        Matrix cand;
        try {
          cand = retract_rows(res.omega + step * dir, U);
        } catch (const NumericalError&) {
          continue;
        }
        Evaluation ev = evaluate(spec, cand);
        if (std::isfinite(ev.value) && ev.value <= cur.value + config.armijo_c * step * slope) {
          res.omega = std::move(cand);
          cur = std::move(ev);
          accepted = true;
          start_step = std::min(config.initial_step, step / config.shrink_factor);
          break;
        }
      }
      if (!accepted) {
        if (steepest) break;
        dir = -grad;  // retry once along steepest descent
        steepest = true;
        since_restart = 0;
      }
    }
    if (!accepted) break;  // no decrease possible at line-search resolution

    res.trace.push_back(cur.value);
    res.iterations = it + 1;
    ++since_restart;
    prev_grad = std::move(grad);
    prev_dir = dir;
    grad = tangent_project(gradient_from(spec, res.omega, cur), res.omega, U);
  }
  if (!res.converged && grad.norm() <= config.grad_tol) res.converged = true;
  return res;
}

}  // namespace deepam
