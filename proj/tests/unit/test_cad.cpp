#include <doctest.h>

#include "deepam/cad.hpp"
#include "deepam/patches.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <cmath>

using namespace deepam;
using oracle::MatrixXd;
using oracle::VectorXd;

namespace {

double correlation(const VectorXd& a, const VectorXd& b) {
  const VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST_SUITE("cad") {

TEST_CASE("layer synthesis trivial cases") {
  const MatrixXd I = MatrixXd::Identity(4, 4);
  CHECK((layer_synthesis(I, 2.0 * I).D - I).norm() <= 1e-15);
  const LayerSynthesis z = layer_synthesis(I, MatrixXd::Zero(3, 4));
  CHECK(z.D.norm() == 0.0);
  CHECK(z.E.norm() == 0.0);
}

TEST_CASE("layer synthesis solves the ridge normal equations") {
  oracle::Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const int dout = rng.integer(1, 9), din = rng.integer(1, 6), N = rng.integer(1, 30);
    const MatrixXd X = 3.0 * oracle::gaussian(din, N, rng), Y = oracle::gaussian(dout, N, rng);
    const LayerSynthesis s = layer_synthesis(X, Y);
    const MatrixXd lhs = s.D * (X * X.transpose() + MatrixXd::Identity(din, din));
    const MatrixXd rhs = Y * X.transpose();
    CHECK((lhs - rhs).norm() <= 1e-8 * std::max(rhs.norm(), 1e-300));
    CHECK((s.D - oracle::ridge(X, Y)).norm() <= 1e-10 * std::max(1.0, s.D.norm()));
    // split is exact up to one rounding per entry
    const MatrixXd scale = s.Ymid.cwiseAbs() + s.E.cwiseAbs();
    CHECK(((s.Ymid + s.E - Y).cwiseAbs().array() <= 2.3e-16 * scale.array()).all());
  }
  const MatrixXd X = oracle::gaussian(5, 20, rng), Y = oracle::gaussian(8, 20, rng);
  CHECK((layer_synthesis(X, Y).D - oracle::ridge(X, Y)).norm() <= 1e-12);
}

TEST_CASE("reparameterisation") {
  oracle::Rng rng(2);
  const MatrixXd psi = oracle::unit_rows(oracle::gaussian(5, 6, rng));
  const ReparamResult id = reparam_cad(psi, MatrixXd::Identity(6, 6));
  CHECK((id.omega - psi).norm() <= 1e-14);

  const MatrixXd D = oracle::gaussian(6, 4, rng);
  const ReparamResult one = reparam_cad(psi.topRows(1), D);
  const VectorXd dir = (D.transpose() * psi.row(0).transpose()).normalized();
  CHECK((one.omega.row(0).transpose() - dir).norm() <= 1e-14);

  const ReparamResult r = reparam_cad(psi, D);
  const MatrixXd x = oracle::gaussian(4, 7, rng);
  for (int l = 0; l < 5; ++l) {
    const double scale = (psi.row(l) * D).norm();
    CHECK(((r.omega.row(l) * x) - (psi.row(l) * (D * x)) / scale).norm() <= 1e-12);
    CHECK(std::abs(r.omega.row(l).norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("reparameterisation drops atoms orthogonal to the range") {
  MatrixXd D(3, 2);
  D << 1, 0, 0, 1, 0, 0;
  MatrixXd psi(2, 3);
  psi << 0, 0, 1, 1, 0, 0;
  std::vector<std::string> lines;
  const ReparamResult r = reparam_cad(psi, D, [&](const std::string& s) { lines.push_back(s); });
  CHECK(r.omega.rows() == 1);
  CHECK(r.kept == std::vector<int>{1});
  CHECK(lines.size() == 1);
  CHECK_THROWS_AS(reparam_cad(psi.topRows(1), D), NumericalError);
}

TEST_CASE("IPAD residual") {
  oracle::Rng rng(3);
  const MatrixXd omega = oracle::unit_rows(oracle::gaussian(4, 4, rng));
  const MatrixXd X = oracle::gaussian(4, 50, rng);
  const MatrixXd Y = oracle::gaussian(6, 4, rng) * omega * X;
  CHECK(ipad_residual(omega, VectorXd::Zero(4), X, Y).norm() <= 1e-10 * Y.norm());
  const VectorXd inf = VectorXd::Constant(4, std::numeric_limits<double>::infinity());
  CHECK(ipad_residual(omega, inf, X, Y) == Y);
}

TEST_CASE("IPAD residual on SR data has less energy than the targets") {
  const PatchDataset ds = extract_pairs(testsupport::synthetic_image(48, 48, 4), PatchGeometry{}, 2);
  const SubspaceBasis b = compute_subspace(ds.X0);
  std::mt19937_64 g(1);
  const MatrixXd omega = gaussian_init(b.rank(), b, g);
  const LaplacianStats st = estimate_sigmas(omega, ds.X0);
  const ThresholdSearchResult r = search_rho_ipad(omega, ds.X0, ds.Y, st, ThresholdSearchGrid::standard());
  CHECK(ipad_residual(omega, r.lambda, ds.X0, ds.Y).norm() < ds.Y.norm());
}

TEST_CASE("zero residual target picks the smallest rho") {
  oracle::Rng rng(4);
  const MatrixXd omega = oracle::unit_rows(oracle::gaussian(3, 4, rng));
  const MatrixXd X = oracle::gaussian(4, 30, rng);
  const LaplacianStats st = estimate_sigmas(omega, X);
  const auto grid = ThresholdSearchGrid::standard();
  const ThresholdSearchResult r = search_rho_cad(omega, X, MatrixXd::Zero(5, 30), st, grid);
  CHECK(r.rho == grid.rho_values.front());
  CHECK(r.score == 0.0);
  CHECK((r.lambda - r.rho * st.sigmas).norm() <= 1e-15 * r.lambda.norm());
}

TEST_CASE("planted cluster search matches exhaustive recomputation") {
  oracle::Rng rng(5);
  const int m = 4, N = 2000;
  const MatrixXd omega = MatrixXd::Identity(m, m);
  MatrixXd X(m, N);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < N; ++i) X(j, i) = rng.laplace(1.0 + j);
  const LaplacianStats st = estimate_sigmas(omega, X);
  // residual only where atom responses exceed 3 sigma
  const MatrixXd Zp = soft_threshold_rows(X, 3.0 * st.sigmas);
  const MatrixXd YR = oracle::gaussian(6, m, rng) * Zp + 0.01 * oracle::gaussian(6, N, rng);
  const auto grid = ThresholdSearchGrid::standard();
  const ThresholdSearchResult r = search_rho_cad(omega, X, YR, st, grid);
  const auto ref = oracle::grid_scores(X, YR, cad_threshold_base(st), grid.rho_values);
  CHECK(r.rho == grid.rho_values[oracle::argmin_first(ref, 1e-12)]);
  CHECK(r.rho == doctest::Approx(3.0));
  const MatrixXd Z = soft_threshold_rows(X, r.lambda);
  CHECK(std::abs((YR - least_squares_map(Z, YR) * Z).squaredNorm() - r.score) <= 1e-10 * r.score);
}

TEST_CASE("CAD survivor fractions are even across atoms on Laplacian data") {
  oracle::Rng rng(6);
  const int m = 8, N = 20000;
  MatrixXd R(m, N);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < N; ++i) R(j, i) = rng.laplace(0.5 + 2.0 * j);
  const MatrixXd I = MatrixXd::Identity(m, m);
  const LaplacianStats st = estimate_sigmas(I, R);
  const MatrixXd YR = oracle::gaussian(4, m, rng) * soft_threshold_rows(R, 2.0 * st.sigmas);
  const ThresholdSearchResult r = search_rho_cad(I, R, YR, st, ThresholdSearchGrid::standard());
  const VectorXd f = survivor_fractions(soft_threshold_rows(R, r.lambda));
  CHECK(f.maxCoeff() - f.minCoeff() <= 0.10);
  CHECK(f.maxCoeff() < 0.5);
}

TEST_CASE("learn_psi with zero residual returns unit rows") {
  oracle::Rng rng(7);
  const MatrixXd Ymid = oracle::gaussian(5, 40, rng);
  const SubspaceBasis b = compute_subspace(Ymid);
  std::mt19937_64 g(3);
  const OptimizeResult r = learn_psi(Ymid, MatrixXd::Zero(5, 40), 6, b, cad_config(5, 6, 30), MatrixXd(), g);
  for (int j = 0; j < 6; ++j) CHECK(std::abs(r.omega.row(j).norm() - 1.0) <= 1e-12);
}

TEST_CASE("planted residual direction is picked up by some atom") {
  oracle::Rng rng(8);
  const int n = 6, N = 600;
  const VectorXd u = VectorXd::Unit(n, 0), v = VectorXd::Unit(n, 1);
  MatrixXd Ymid = 0.3 * oracle::gaussian(n, N, rng), E(n, N);
  for (int i = 0; i < N; ++i) {
    const double a = rng.laplace(2.0);
    Ymid.col(i) += a * u;
    E.col(i) = a * v;  // residual energy tracks the response along u
  }
  const SubspaceBasis b = compute_subspace(Ymid);
  std::mt19937_64 g(5);
  const OptimizeResult r = learn_psi(Ymid, E, 4, b, cad_config(n, 4, 100), MatrixXd(), g);
  const VectorXd energy = E.colwise().squaredNorm().transpose();
  double best = 0.0;
  for (int l = 0; l < 4; ++l) {
    const VectorXd resp = (r.omega.row(l) * Ymid).transpose().cwiseAbs2();
    best = std::max(best, std::abs(correlation(resp, energy)));
  }
  CHECK(best >= 0.5);
}

TEST_CASE("joint term decreases for nearly all seeds on SR data") {
  const PatchDataset ds = extract_pairs(testsupport::synthetic_image(48, 48, 12), PatchGeometry{}, 2);
  const LayerSynthesis s = layer_synthesis(ds.X0, ds.Y);
  const SubspaceBasis b = compute_subspace(ds.Y);
  const int atoms = 16;
  const GoalPlusConfig cfg = cad_config(36, atoms, 25);
  int decreased = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 g(seed);
    const MatrixXd init = gaussian_init(atoms, b, g);
    const OptimizeResult r = learn_psi(s.Ymid, s.E, atoms, b, cfg, init, g);
    if (term_joint_sparsify(r.omega, s.Ymid, s.E, cfg.nu) < term_joint_sparsify(init, s.Ymid, s.E, cfg.nu)) ++decreased;
  }
  CHECK(decreased >= 19);
}

}  // TEST_SUITE
