#pragma once
// Reference implementations used as test oracles. Written independently of
// the library: plain loops, different factorisations, no shared helpers.

#include "deepam/image.hpp"
#include "deepam/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  double laplace(double b) {
    const double u = uniform() - 0.5;
    return -b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
};

inline MatrixXd gaussian(int rows, int cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.normal();
  return m;
}

inline MatrixXd unit_rows(MatrixXd m) {
  for (int r = 0; r < m.rows(); ++r) m.row(r) /= m.row(r).norm();
  return m;
}

// Random n x k matrix with orthonormal columns.
inline MatrixXd orthonormal(int n, int k, Rng& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian(n, n, rng));
  return MatrixXd(qr.householderQ()).leftCols(k);
}

// ---- images -----------------------------------------------------------------

inline double keys(double x) {
  const double a = -0.5, t = std::abs(x);
  if (t <= 1.0) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2.0) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0.0;
}

// Symmetric (half-sample) reflection of a 0-based index into [0, n).
inline int mirror(int i, int n) {
  const int period = 2 * n;
  int k = ((i % period) + period) % period;
  return k < n ? k : period - 1 - k;
}

// Normalised 1-D weights of output sample `o` (0-based) as a map input index -> weight.
inline std::vector<std::pair<int, double>> taps(int o, int in_len, double scale) {
  const double support = scale < 1.0 ? 2.0 / scale : 2.0;
  const double centre = (o + 0.5) / scale - 0.5;  // 0-based input coordinate
  std::vector<std::pair<int, double>> out;
  double total = 0.0;
  for (int i = static_cast<int>(std::floor(centre - support)) - 1; i <= static_cast<int>(std::ceil(centre + support)) + 1; ++i) {
    const double d = centre - i;
    const double w = scale < 1.0 ? scale * keys(scale * d) : keys(d);
    if (w == 0.0) continue;
    out.push_back({mirror(i, in_len), w});
    total += w;
  }
  for (auto& t : out) t.second /= total;
  return out;
}

// Direct 2-D convolution with the separable antialiased kernel.
inline deepam::GrayImage resize(const deepam::GrayImage& img, double scale) {
  const int oh = static_cast<int>(std::lround(img.height() * scale));
  const int ow = static_cast<int>(std::lround(img.width() * scale));
  deepam::GrayImage out(oh, ow, 0.0);
  for (int r = 0; r < oh; ++r) {
    const auto tr = taps(r, img.height(), scale);
    for (int c = 0; c < ow; ++c) {
      const auto tc = taps(c, img.width(), scale);
      double acc = 0.0;
      for (const auto& [ir, wr] : tr)
        for (const auto& [ic, wc] : tc) acc += wr * wc * img(ir, ic);
      out(r, c) = acc;
    }
  }
  return out;
}

// ---- objective terms ----------------------------------------------------------

inline double sparsify(const MatrixXd& omega, const MatrixXd& X, double nu) {
  double s = 0.0;
  for (int i = 0; i < X.cols(); ++i)
    for (int j = 0; j < omega.rows(); ++j) {
      double a = 0.0;
      for (int k = 0; k < X.rows(); ++k) a += omega(j, k) * X(k, i);
      s += std::log1p(nu * a * a);
    }
  return s / (static_cast<double>(X.cols()) * omega.rows() * std::log1p(nu));
}

// -(1/(K log K)) log det(W^T Omega^T Omega W / m) via the eigenvalues of the Gram.
inline double logdet(const MatrixXd& omega, const MatrixXd& W) {
  const int m = static_cast<int>(omega.rows());
  const int K = static_cast<int>(W.cols());
  const MatrixXd B = omega * W;
  const MatrixXd M = B.transpose() * B / m;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  double sum_log = 0.0;
  for (int i = 0; i < K; ++i) {
    if (es.eigenvalues()[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum_log += std::log(es.eigenvalues()[i]);
  }
  const double norm = K > 1 ? K * std::log(static_cast<double>(K)) : 1.0;
  return -sum_log / norm;
}

inline double joint(const MatrixXd& psi, const MatrixXd& Y, const MatrixXd& E, double nu) {
  double s = 0.0;
  for (int i = 0; i < Y.cols(); ++i)
    for (int l = 0; l < psi.rows(); ++l) {
      double ay = 0.0, ae = 0.0;
      for (int k = 0; k < Y.rows(); ++k) {
        ay += psi(l, k) * Y(k, i);
        ae += psi(l, k) * E(k, i);
      }
      const double b = ay * ay - ae * ae;
      s += std::log1p(nu * b * b);
    }
  return s / (static_cast<double>(Y.cols()) * psi.rows() * std::log1p(nu));
}

inline MatrixXd central_difference(const std::function<double(const MatrixXd&)>& f, const MatrixXd& at,
                                   double step = 1e-6) {
  MatrixXd g(at.rows(), at.cols());
  for (int r = 0; r < at.rows(); ++r)
    for (int c = 0; c < at.cols(); ++c) {
      MatrixXd p = at, m = at;
      p(r, c) += step;
      m(r, c) -= step;
      g(r, c) = (f(p) - f(m)) / (2.0 * step);
    }
  return g;
}

inline double relative_error(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

// ---- least squares ----------------------------------------------------------------

// D (X X^T + I) = Y X^T solved with a full-pivoting LU.
inline MatrixXd ridge(const MatrixXd& X, const MatrixXd& Y) {
  MatrixXd A = MatrixXd::Identity(X.rows(), X.rows());
  for (int i = 0; i < X.cols(); ++i) A += X.col(i) * X.col(i).transpose();
  const MatrixXd B = X * Y.transpose();
  return A.fullPivLu().solve(B).transpose();
}

inline double soft(double a, double lambda) {
  if (a > lambda) return a - lambda;
  if (a < -lambda) return a + lambda;
  return 0.0;
}

// Score ||T - G Z||^2 of every grid value, G from a QR least-squares solve.
inline std::vector<double> grid_scores(const MatrixXd& responses, const MatrixXd& target, const VectorXd& base,
                                       const std::vector<double>& grid) {
  std::vector<double> scores;
  for (double rho : grid) {
    MatrixXd Z(responses.rows(), responses.cols());
    bool any = false;
    for (int j = 0; j < Z.rows(); ++j)
      for (int i = 0; i < Z.cols(); ++i) {
        Z(j, i) = soft(responses(j, i), rho * base[j]);
        any = any || Z(j, i) != 0.0;
      }
    if (!any) {
      scores.push_back(target.squaredNorm());
      continue;
    }
    // min ||T^T - Z^T G^T|| column by column
    const MatrixXd Gt = Z.transpose().colPivHouseholderQr().solve(target.transpose());
    scores.push_back((target - Gt.transpose() * Z).squaredNorm());
  }
  return scores;
}

// Index of the smallest score, earliest among values equal to rel_tie.
inline std::size_t argmin_first(const std::vector<double>& s, double rel_tie = 0.0) {
  double best = s[0];
  for (double v : s) best = std::min(best, v);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] <= best * (1.0 + rel_tie) + (best == 0.0 ? rel_tie : 0.0)) return i;
  return 0;
}

// ---- model --------------------------------------------------------------------------

inline VectorXd forward(const deepam::DeepAMModel& model, const VectorXd& x0) {
  std::vector<double> x(x0.data(), x0.data() + x0.size());
  for (const auto& layer : model.layers) {
    std::vector<double> next(layer.omega.rows());
    for (int j = 0; j < layer.omega.rows(); ++j) {
      double a = 0.0;
      for (int k = 0; k < layer.omega.cols(); ++k) a += layer.omega(j, k) * x[k];
      next[j] = soft(a, layer.lambda[j]);
    }
    x = std::move(next);
  }
  VectorXd y(model.D.rows());
  for (int r = 0; r < model.D.rows(); ++r) {
    double a = 0.0;
    for (int k = 0; k < model.D.cols(); ++k) a += model.D(r, k) * x[k];
    y[r] = a;
  }
  return y;
}

// Random model with the given layer widths (first entry is the input dimension).
inline deepam::DeepAMModel random_model(const std::vector<int>& widths, int out_dim, Rng& rng,
                                        double lambda_scale = 0.5) {
  deepam::DeepAMModel m;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    deepam::AnalysisLayer layer;
    layer.omega = unit_rows(gaussian(widths[i], widths[i - 1], rng));
    layer.lambda = VectorXd(widths[i]);
    for (int j = 0; j < widths[i]; ++j) layer.lambda[j] = lambda_scale * rng.uniform();
    layer.d_ipad = widths[i] / 2;
    m.layers.push_back(layer);
  }
  m.D = gaussian(out_dim, widths.back(), rng);
  return m;
}

// Reflected CRC-32 (polynomial 0xEDB88320), bit by bit.
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

}  // namespace oracle
