#include "deepam/ipad.hpp"

#include <cmath>
#include <string>

namespace deepam {

int LaplacianStats::dead_count() const {
  int n = 0;
  for (bool d : dead) n += d ? 1 : 0;
  return n;
}

ThresholdSearchGrid ThresholdSearchGrid::standard() { return between(1e-4, 9e1); }

ThresholdSearchGrid ThresholdSearchGrid::between(double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("grid bounds must satisfy 0 < min <= max");
  ThresholdSearchGrid grid;
  const int e_lo = static_cast<int>(std::floor(std::log10(lo))) - 1;
  const int e_hi = static_cast<int>(std::ceil(std::log10(hi))) + 1;
  for (int e = e_lo; e <= e_hi; ++e) {
    for (int m = 1; m <= 9; ++m) {
      // parse the decimal literal so 3e-2 is the nearest double to 0.03
      const double v = std::stod(std::to_string(m) + "e" + std::to_string(e));
      if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) grid.rho_values.push_back(v);
    }
  }
  grid.validate();
  return grid;
}

void ThresholdSearchGrid::validate() const {
  if (rho_values.empty()) throw ConfigError("threshold grid is empty");
  for (std::size_t i = 0; i < rho_values.size(); ++i) {
    if (!(rho_values[i] > 0.0)) throw ConfigError("threshold grid values must be positive");
    if (i > 0 && !(rho_values[i] > rho_values[i - 1])) throw ConfigError("threshold grid must be strictly increasing");
  }
}

Vector singular_values(const Matrix& X) {
  if (X.size() == 0) return Vector();
  if (X.cols() <= X.rows()) return Eigen::BDCSVD<Matrix>(X).singularValues();
  // Reduce N >> n to an n x n triangle first: X = R^T Q^T.
  Eigen::HouseholderQR<Matrix> qr(X.transpose());
  const Matrix R = qr.matrixQR().topRows(X.rows()).triangularView<Eigen::Upper>();
  return Eigen::BDCSVD<Matrix>(R.transpose()).singularValues();
}

namespace {

// Full set of left singular vectors (n x n) and singular values of X.
std::pair<Matrix, Vector> left_singular(const Matrix& X) {
  const Eigen::Index n = X.rows();
  Matrix core;
  if (X.cols() <= n) {
    core = X;
  } else {
    Eigen::HouseholderQR<Matrix> qr(X.transpose());
    core = Matrix(qr.matrixQR().topRows(n).triangularView<Eigen::Upper>()).transpose();
  }
  Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeFullU);
  Vector s = Vector::Zero(n);
  s.head(svd.singularValues().size()) = svd.singularValues();
  return {svd.matrixU(), s};
}

SubspaceBasis split_basis(const Matrix& U_full, int rank) {
  SubspaceBasis b;
  b.W = U_full.leftCols(rank);
  b.U = U_full.rightCols(U_full.cols() - rank);
  return b;
}

}  // namespace

SubspaceBasis compute_subspace(const Matrix& X, double rel_tol) {
  if (X.rows() < 1 || X.cols() < 1) throw DataError("compute_subspace: empty data");
  if (!(rel_tol > 0.0)) throw ConfigError("compute_subspace: rel_tol must be positive");
  const auto [U_full, s] = left_singular(X);
  if (!(s[0] > 0.0)) throw DataError("compute_subspace: data matrix is all zeros");
  int rank = 0;
  while (rank < s.size() && s[rank] > rel_tol * s[0]) ++rank;
  return split_basis(U_full, rank);
}

SubspaceBasis leading_subspace(const Matrix& X, int rank) {
  if (rank < 0 || rank > X.rows()) throw ConfigError("leading_subspace: rank out of range");
  if (X.rows() < 1 || X.cols() < 1) throw DataError("leading_subspace: empty data");
  return split_basis(left_singular(X).first, rank);
}

GoalPlusConfig ipad_config(int input_dim, int atoms, int max_iters) {
  GoalPlusConfig cfg;
  cfg.nu = 100.0 * input_dim;
  cfg.kappa = static_cast<double>(atoms);
  cfg.mu = 0.0;
  cfg.max_iters = max_iters;
  return cfg;
}

OptimizeResult learn_ipad(const Matrix& X_prev, int atoms, const SubspaceBasis& basis, const GoalPlusConfig& config,
                          const Matrix& init, std::mt19937_64& rng) {
  if (basis.dim() != X_prev.rows()) throw DataError("learn_ipad: basis dimension does not match the data");
  if (atoms < basis.rank())
    throw ConfigError("learn_ipad: " + std::to_string(atoms) + " atoms cannot span a rank-" +
                      std::to_string(basis.rank()) + " subspace");
  if (atoms < 1) throw ConfigError("learn_ipad: need at least one atom");
  ObjectiveSpec spec;
  spec.sparsify_data = &X_prev;
  spec.basis_w = &basis.W;
  spec.nu = config.nu;
  spec.kappa = config.kappa;
  const Matrix start = init.size() > 0 ? init : gaussian_init(atoms, basis, rng);
  if (start.rows() != atoms || start.cols() != X_prev.rows()) throw DataError("learn_ipad: initial dictionary has the wrong shape");
  return optimize(spec, start, basis, config);
}

LaplacianStats estimate_sigmas(const Matrix& omega, const Matrix& X) {
  if (X.cols() < 1) throw DataError("estimate_sigmas: no samples");
  if (omega.cols() != X.rows()) throw DataError("estimate_sigmas: dimension mismatch");
  LaplacianStats st;
  st.sigmas = (omega * X).cwiseAbs().rowwise().mean();
  st.dead.resize(st.sigmas.size());
  for (Eigen::Index j = 0; j < st.sigmas.size(); ++j) st.dead[j] = !(st.sigmas[j] >= 1e-12);
  return st;
}

Matrix least_squares_map(const Matrix& Z, const Matrix& target) {
  if (Z.cols() != target.cols()) throw DataError("least_squares_map: sample counts differ");
  if (Z.squaredNorm() == 0.0) return Matrix::Zero(target.rows(), Z.rows());
  const Matrix gram = Z * Z.transpose();
  const Matrix rhs = Z * target.transpose();  // d x n_out
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
    const double eps = 1e-8 * gram.trace() / static_cast<double>(gram.rows());
    Matrix ridged = gram;
    ridged.diagonal().array() += eps;
    llt.compute(ridged);
    if (llt.info() != Eigen::Success) throw NumericalError("least_squares_map: ridged system is not positive definite");
  }
  return llt.solve(rhs).transpose();
}

ThresholdSearchResult search_rho(const Matrix& responses, const Matrix& target, const Vector& base,
                                 const ThresholdSearchGrid& grid) {
  grid.validate();
  if (responses.rows() != base.size()) throw DataError("search_rho: threshold base length mismatch");
  if (responses.cols() != target.cols()) throw DataError("search_rho: sample counts differ");
  if ((base.array() < 0.0).any()) throw DataError("search_rho: negative threshold base");

  ThresholdSearchResult best;
  bool have_best = false;
  bool any_nonzero = false;
  const double target_energy = target.squaredNorm();
  for (double rho : grid.rho_values) {
    const Vector lambda = rho * base;
    const Matrix Z = soft_threshold_rows(responses, lambda);
    Matrix G;
    double score;
    if (Z.squaredNorm() == 0.0) {
      G = Matrix::Zero(target.rows(), Z.rows());
      score = target_energy;
    } else {
      any_nonzero = true;
      G = least_squares_map(Z, target);
      score = (target - G * Z).squaredNorm();
    }
    best.all_scores.push_back(score);
    if (!have_best || score < best.score) {
      have_best = true;
      best.rho = rho;
      best.lambda = lambda;
      best.score = score;
      best.G = std::move(G);
    }
  }
  if (!any_nonzero) throw NumericalError("threshold search: every grid value zeroes all coefficients");
  return best;
}

Vector ipad_threshold_base(const LaplacianStats& stats) {
  Vector base(stats.sigmas.size());
  for (Eigen::Index j = 0; j < base.size(); ++j) base[j] = stats.dead[j] ? 0.0 : 1.0 / stats.sigmas[j];
  return base;
}

ThresholdSearchResult search_rho_ipad(const Matrix& omega_ipad, const Matrix& X_prev, const Matrix& Y,
                                      const LaplacianStats& stats, const ThresholdSearchGrid& grid) {
  if (stats.sigmas.size() != omega_ipad.rows()) throw DataError("search_rho_ipad: one sigma per atom required");
  return search_rho(omega_ipad * X_prev, Y, ipad_threshold_base(stats), grid);
}

Vector survivor_fractions(const Matrix& Z) {
  Vector f(Z.rows());
  if (Z.cols() == 0) return Vector::Zero(Z.rows());
  for (Eigen::Index r = 0; r < Z.rows(); ++r)
    f[r] = static_cast<double>((Z.row(r).array() != 0.0).count()) / static_cast<double>(Z.cols());
  return f;
}

}  // namespace deepam
