#include <doctest.h>

#include "deepam/ipad.hpp"
#include "deepam/patches.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <cmath>

using namespace deepam;
using oracle::MatrixXd;
using oracle::VectorXd;

TEST_SUITE("ipad") {

TEST_CASE("standard grid") {
  const ThresholdSearchGrid g = ThresholdSearchGrid::standard();
  REQUIRE(g.rho_values.size() == 54);
  CHECK(g.rho_values.front() == 1e-4);
  CHECK(g.rho_values[1] == 2e-4);
  CHECK(g.rho_values[9] == 1e-3);
  CHECK(g.rho_values.back() == 90.0);
  CHECK(ThresholdSearchGrid::between(0.5, 3.0).rho_values == std::vector<double>{0.5, 0.6, 0.7, 0.8, 0.9, 1, 2, 3});
  ThresholdSearchGrid bad{{1.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(ThresholdSearchGrid{}.validate(), ConfigError);
}

TEST_CASE("subspace of identity and rank-one data") {
  const SubspaceBasis full = compute_subspace(MatrixXd::Identity(5, 5));
  CHECK(full.rank() == 5);
  CHECK(full.U.cols() == 0);

  oracle::Rng rng(1);
  const VectorXd u = oracle::gaussian(6, 1, rng).col(0).normalized();
  const MatrixXd X = u * oracle::gaussian(1, 30, rng);
  const SubspaceBasis b = compute_subspace(X);
  REQUIRE(b.rank() == 1);
  CHECK(std::abs(std::abs(b.W.col(0).dot(u)) - 1.0) <= 1e-12);
  CHECK((b.W.transpose() * b.W - MatrixXd::Identity(1, 1)).norm() <= 1e-10);
  CHECK((b.U.transpose() * b.U - MatrixXd::Identity(5, 5)).norm() <= 1e-10);
  CHECK((b.W.transpose() * b.U).norm() <= 1e-10);
  CHECK_THROWS_AS(compute_subspace(MatrixXd::Zero(4, 3)), DataError);
}

TEST_CASE("subspace basis properties on random low-rank data") {
  oracle::Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const int n = rng.integer(3, 12), k = rng.integer(1, n), N = rng.integer(n, 4 * n);
    const MatrixXd X = oracle::gaussian(n, k, rng) * oracle::gaussian(k, N, rng);
    const SubspaceBasis b = compute_subspace(X);
    CHECK(b.rank() == k);
    CHECK((b.W.transpose() * b.W - MatrixXd::Identity(k, k)).norm() <= 1e-10);
    CHECK((b.U.transpose() * b.U - MatrixXd::Identity(n - k, n - k)).norm() <= 1e-10);
    CHECK((b.W.transpose() * b.U).norm() <= 1e-10);
    CHECK((b.U.transpose() * X).norm() <= 1e-9 * X.norm());
  }
}

TEST_CASE("LR patch rank is stable across tolerances") {
  PatchGeometry g;
  const GrayImage hr = testsupport::synthetic_image(80, 80, 3);
  PatchDataset ds = extract_pairs(hr, g, 1);
  const MatrixXd X = ds.X0.leftCols(1000);
  const VectorXd s = singular_values(X);
  const int k6 = compute_subspace(X, 1e-6).rank();
  const int k5 = compute_subspace(X, 1e-5).rank();
  const int k4 = compute_subspace(X, 1e-4).rank();
  // mean removal leaves one exact null direction (the constant patch)
  CHECK(k6 == 35);
  CHECK(k5 == k6);
  CHECK(k4 == k6);
  CHECK(s[35] <= 1e-10 * s[0]);
}

TEST_CASE("one-dimensional data gives the spanning atom") {
  oracle::Rng rng(3);
  const VectorXd u = oracle::gaussian(4, 1, rng).col(0).normalized();
  const MatrixXd X = u * oracle::gaussian(1, 50, rng);
  const SubspaceBasis b = compute_subspace(X);
  std::mt19937_64 g(5);
  const OptimizeResult r = learn_ipad(X, 1, b, ipad_config(4, 1, 50), MatrixXd(), g);
  CHECK(std::abs(std::abs(r.omega.row(0).dot(u)) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(learn_ipad(X, 0, b, ipad_config(4, 0, 50), MatrixXd(), g), ConfigError);
}

TEST_CASE("too few atoms for the subspace are rejected") {
  oracle::Rng rng(4);
  const MatrixXd X = oracle::gaussian(5, 40, rng);
  const SubspaceBasis b = compute_subspace(X);
  std::mt19937_64 g(1);
  CHECK_THROWS_AS(learn_ipad(X, 4, b, ipad_config(5, 4, 10), MatrixXd(), g), ConfigError);
}

TEST_CASE("learned IPAD beats a random feasible dictionary on SR data") {
  PatchGeometry geo;
  const PatchDataset ds = extract_pairs(testsupport::synthetic_image(60, 60, 6), geo, 2);
  const SubspaceBasis b = compute_subspace(ds.X0);
  const int atoms = b.rank() + 8;
  std::mt19937_64 g(3);
  const MatrixXd init = gaussian_init(atoms, b, g);
  const GoalPlusConfig cfg = ipad_config(36, atoms, 150);
  const OptimizeResult r = learn_ipad(ds.X0, atoms, b, cfg, init, g);
  CHECK(std::isfinite(term_logdet(r.omega, b.W)));
  CHECK(term_sparsify(r.omega, ds.X0, cfg.nu) < term_sparsify(init, ds.X0, cfg.nu));
  for (int j = 0; j < atoms; ++j) {
    CHECK(std::abs(r.omega.row(j).norm() - 1.0) <= 1e-12);
    CHECK((r.omega.row(j) * b.U).norm() <= 1e-8);
  }
  // Gram on W is better conditioned than that of random dictionaries
  auto cond = [&](const MatrixXd& o) {
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>((o * b.W).transpose() * (o * b.W)).eigenvalues();
    return ev.maxCoeff() / ev.minCoeff();
  };
  CHECK(cond(r.omega) < cond(init));
}

TEST_CASE("sigma estimates") {
  MatrixXd omega(2, 2), X(2, 4);
  omega << 1, 0, 0, 1;
  X << 0, 0, 0, 0, 2, -2, 2, -2;
  const LaplacianStats st = estimate_sigmas(omega, X);
  CHECK(st.dead[0]);
  CHECK(!st.dead[1]);
  CHECK(st.sigmas[1] == 2.0);
  CHECK(st.dead_count() == 1);
  CHECK(ipad_threshold_base(st) == VectorXd((VectorXd(2) << 0.0, 0.5).finished()));

  oracle::Rng rng(5);
  const int N = 100000;
  MatrixXd L(1, N);
  for (int i = 0; i < N; ++i) L(0, i) = rng.laplace(3.0);
  const LaplacianStats ls = estimate_sigmas(MatrixXd::Identity(1, 1), L);
  CHECK(std::abs(ls.sigmas[0] / 3.0 - 1.0) <= 0.02);
}

TEST_CASE("least squares map with and without ridge") {
  oracle::Rng rng(6);
  const MatrixXd Z = oracle::gaussian(4, 20, rng), T = oracle::gaussian(3, 20, rng);
  const MatrixXd G = least_squares_map(Z, T);
  CHECK((G * Z * Z.transpose() - T * Z.transpose()).norm() <= 1e-10 * (T * Z.transpose()).norm());
  CHECK(least_squares_map(MatrixXd::Zero(4, 20), T).norm() == 0.0);
  // duplicated row: singular Gram triggers the small ridge but stays finite
  MatrixXd Zd(2, 20);
  Zd << Z.row(0), Z.row(0);
  const MatrixXd Gd = least_squares_map(Zd, T);
  CHECK(Gd.allFinite());
  const MatrixXd best = T * Z.row(0).transpose() / Z.row(0).squaredNorm();
  CHECK(((Gd.col(0) + Gd.col(1)) - best).norm() <= 1e-5 * best.norm());
}

TEST_CASE("noiseless linear target prefers the smallest rho") {
  oracle::Rng rng(7);
  const MatrixXd omega = oracle::unit_rows(oracle::gaussian(6, 4, rng));
  const MatrixXd X = oracle::gaussian(4, 200, rng);
  const MatrixXd Y = oracle::gaussian(9, 4, rng) * X;
  const LaplacianStats st = estimate_sigmas(omega, X);
  const auto grid = ThresholdSearchGrid::standard();
  const ThresholdSearchResult r = search_rho_ipad(omega, X, Y, st, grid);
  CHECK(r.rho == grid.rho_values.front());
  for (std::size_t i = 1; i < r.all_scores.size(); ++i) CHECK(r.all_scores[i] >= r.all_scores[0]);
}

TEST_CASE("grid search agrees with exhaustive recomputation") {
  oracle::Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const int m = rng.integer(1, 5), n = 4, N = 300;
    const MatrixXd omega = oracle::unit_rows(oracle::gaussian(m, n, rng));
    const MatrixXd X = oracle::gaussian(n, N, rng);
    const LaplacianStats st = estimate_sigmas(omega, X);
    // target built from thresholded responses, so interior rho values can win
    const double planted = 0.5 + t * 0.1;
    const MatrixXd Zp = soft_threshold_rows(omega * X, planted * ipad_threshold_base(st));
    const MatrixXd Y = oracle::gaussian(3, m, rng) * Zp + 0.05 * oracle::gaussian(3, N, rng);
    const auto grid = ThresholdSearchGrid::between(0.01, 9.0);
    const ThresholdSearchResult r = search_rho_ipad(omega, X, Y, st, grid);
    const auto ref = oracle::grid_scores(omega * X, Y, ipad_threshold_base(st), grid.rho_values);
    REQUIRE(ref.size() == r.all_scores.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref[i] - r.all_scores[i]) <= 1e-10 * std::max(1.0, ref[i]));
    CHECK(r.rho == grid.rho_values[oracle::argmin_first(ref, 1e-12)]);
    // reported score reproducible at the returned rho
    const MatrixXd Z = soft_threshold_rows(omega * X, r.lambda);
    const double again = (Y - least_squares_map(Z, Y) * Z).squaredNorm();
    CHECK(std::abs(again - r.score) <= 1e-10 * r.score);
    CHECK((r.lambda - r.rho * ipad_threshold_base(st)).norm() <= 1e-15 * r.lambda.norm());
  }
}

TEST_CASE("single-atom search equals exhaustive argmin") {
  oracle::Rng rng(9);
  MatrixXd omega(1, 1);
  omega << 1.0;
  MatrixXd X(1, 500);
  for (int i = 0; i < 500; ++i) X(0, i) = rng.laplace(1.0);
  MatrixXd Y(1, 500);
  for (int i = 0; i < 500; ++i) Y(0, i) = oracle::soft(X(0, i), 0.8);
  const LaplacianStats st = estimate_sigmas(omega, X);
  const auto grid = ThresholdSearchGrid::standard();
  const ThresholdSearchResult r = search_rho_ipad(omega, X, Y, st, grid);
  const auto ref = oracle::grid_scores(omega * X, Y, ipad_threshold_base(st), grid.rho_values);
  CHECK(r.rho == grid.rho_values[oracle::argmin_first(ref, 1e-12)]);
}

TEST_CASE("search fails when every rho zeroes the responses") {
  MatrixXd responses = MatrixXd::Constant(2, 5, 1e-3);
  CHECK_THROWS_AS(search_rho(responses, MatrixXd::Ones(1, 5), VectorXd::Constant(2, 1e3), ThresholdSearchGrid::standard()),
                  NumericalError);
}

TEST_CASE("thresholded LS never loses to the unthresholded baseline on SR data") {
  PatchGeometry geo;
  const PatchDataset ds = extract_pairs(testsupport::synthetic_image(64, 64, 10), geo, 2);
  const SubspaceBasis b = compute_subspace(ds.X0);
  std::mt19937_64 g(2);
  const MatrixXd omega = gaussian_init(b.rank() + 4, b, g);
  const LaplacianStats st = estimate_sigmas(omega, ds.X0);
  const ThresholdSearchResult r = search_rho_ipad(omega, ds.X0, ds.Y, st, ThresholdSearchGrid::standard());
  const MatrixXd Z = omega * ds.X0;
  const double baseline = (ds.Y - least_squares_map(Z, ds.Y) * Z).squaredNorm();
  CHECK(r.score <= baseline + 1e-9 * baseline);
}

TEST_CASE("IPAD survivor fractions are even across atoms on Laplacian data") {
  oracle::Rng rng(11);
  const int m = 8, N = 20000;
  MatrixXd R(m, N);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < N; ++i) R(j, i) = rng.laplace(2.0 + 6.0 * j);
  const MatrixXd omega = MatrixXd::Identity(m, m);
  const MatrixXd Y = oracle::gaussian(5, m, rng) * R;
  const LaplacianStats st = estimate_sigmas(omega, R);
  const ThresholdSearchResult r = search_rho_ipad(omega, R, Y, st, ThresholdSearchGrid::standard());
  const VectorXd f = survivor_fractions(soft_threshold_rows(R, r.lambda));
  CHECK(f.maxCoeff() - f.minCoeff() <= 0.10);
}

}  // TEST_SUITE
