#include "doctest.h"

#include <cmath>

#include "facsens/errors.hpp"
#include "facsens/numlin.hpp"

using namespace facsens;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix M(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) M(i, j) = gauss(rng);
  }
  return M;
}

double penrose_residual(const Matrix& M, const Matrix& P) {
  const double scale = std::max(1.0, M.norm());
  double worst = (M * P * M - M).norm();
  worst = std::max(worst, (P * M * P - P).norm());
  worst = std::max(worst, ((M * P).transpose() - M * P).norm());
  worst = std::max(worst, ((P * M).transpose() - P * M).norm());
  return worst / scale;
}

}  // namespace

TEST_CASE("sym_inv_sqrt identity") {
  const Matrix P = sym_inv_sqrt(Matrix::Identity(3, 3));
  CHECK((P - Matrix::Identity(3, 3)).norm() <= 1e-12);
}

TEST_CASE("sym_inv_sqrt diagonal oracle") {
  Matrix S = Matrix::Zero(2, 2);
  S(0, 0) = 4.0;
  S(1, 1) = 0.25;
  const Matrix P = sym_inv_sqrt(S);
  CHECK(P(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(P(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(P(0, 1)) <= 1e-14);
  CHECK(std::abs(P(1, 0)) <= 1e-14);
}

TEST_CASE("sym_inv_sqrt random SPD residual and commutation") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + trial % 5;
    const Matrix A = random_matrix(p, p, rng);
    const Matrix S =
        A * A.transpose() + 0.1 * Matrix::Identity(p, p);
    const Matrix P = sym_inv_sqrt(S);
    CHECK((P * S * P - Matrix::Identity(p, p)).norm() <= 1e-8 * S.norm());
    CHECK((P - P.transpose()).norm() <= 1e-10 * P.norm());
    CHECK((P * S - S * P).norm() <= 1e-8 * S.norm());
  }
}

TEST_CASE("sym_inv_sqrt rejects non positive definite input") {
  Matrix S = Matrix::Zero(2, 2);
  S(0, 0) = 1.0;
  S(1, 1) = 0.0;  // singular
  CHECK_THROWS_AS(sym_inv_sqrt(S), NotPositiveDefinite);

  Matrix N = Matrix::Identity(2, 2);
  N(1, 1) = -0.5;  // indefinite
  CHECK_THROWS_AS(sym_inv_sqrt(N), NotPositiveDefinite);
}

TEST_CASE("pseudoinverse diagonal oracle") {
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = 2.0;
  const Matrix P = pseudoinverse(M);
  CHECK(P(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(P(0, 1)) + std::abs(P(1, 0)) + std::abs(P(1, 1)) <= 1e-14);
}

TEST_CASE("pseudoinverse of a column vector is v'/|v|^2") {
  Vector v(3);
  v << 1.0, -2.0, 2.0;  // squared norm 9
  const Matrix P = pseudoinverse(v);
  REQUIRE(P.rows() == 1);
  REQUIRE(P.cols() == 3);
  CHECK((P - v.transpose() / 9.0).norm() <= 1e-12);
}

TEST_CASE("pseudoinverse of the zero matrix is zero") {
  const Matrix P = pseudoinverse(Matrix::Zero(3, 2));
  CHECK(P.rows() == 2);
  CHECK(P.cols() == 3);
  CHECK(P.norm() == 0.0);
}

TEST_CASE("pseudoinverse satisfies the four Penrose conditions") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int r = 1 + trial % 5;
    const int c = 1 + (trial * 3) % 6;
    Matrix M = random_matrix(r, c, rng);
    if (trial % 3 == 0 && r > 1) M.row(r - 1) = M.row(0);  // drop rank
    if (trial % 4 == 0) M.col(0).setZero();
    CHECK(penrose_residual(M, pseudoinverse(M)) <= 1e-8);
  }
}

TEST_CASE("projector onto a coordinate axis") {
  Matrix e1 = Matrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 1.0;
  CHECK((projector_colspace(e1) - expected).norm() <= 1e-12);
}

TEST_CASE("projector of a square full-rank matrix is the identity") {
  Rng rng(11);
  const Matrix M =
      random_matrix(4, 4, rng) + 4.0 * Matrix::Identity(4, 4);
  CHECK((projector_colspace(M) - Matrix::Identity(4, 4)).norm() <= 1e-8);
}

TEST_CASE("projector is idempotent and symmetric") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix M = random_matrix(4, 2, rng);
    const Matrix P = projector_colspace(M);
    CHECK((P * P - P).norm() <= 1e-8);
    CHECK((P - P.transpose()).norm() <= 1e-8);
    // P fixes the columns of M.
    CHECK((P * M - M).norm() <= 1e-8 * std::max(1.0, M.norm()));
  }
}

TEST_CASE("random_orthogonal m=1 gives a sign") {
  Rng rng(3);
  bool saw_plus = false, saw_minus = false;
  for (int i = 0; i < 64; ++i) {
    const Matrix R = random_orthogonal(1, rng);
    CHECK(std::abs(std::abs(R(0, 0)) - 1.0) <= 1e-12);
    (R(0, 0) > 0 ? saw_plus : saw_minus) = true;
  }
  CHECK(saw_plus);
  CHECK(saw_minus);
}

TEST_CASE("random_orthogonal is deterministic given the seed") {
  Rng a(99), b(99);
  const Matrix Ra = random_orthogonal(4, a);
  const Matrix Rb = random_orthogonal(4, b);
  CHECK((Ra - Rb).norm() == 0.0);
}

TEST_CASE("random_orthogonal is orthogonal and covers both components") {
  Rng rng(5);
  int plus = 0, minus = 0;
  for (int i = 0; i < 200; ++i) {
    const Matrix R = random_orthogonal(3, rng);
    CHECK(orthogonality_residual(R) <= 1e-10);
    (R.determinant() > 0 ? plus : minus) += 1;
  }
  CHECK(plus > 50);
  CHECK(minus > 50);
}

TEST_CASE("random_orthogonal Monte-Carlo mean is near zero") {
  Rng rng(2024);
  const int draws = 10000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    sum += random_orthogonal(3, rng).sum();
  }
  // Each entry has variance 1/3; the sum of 9 entries per draw has
  // variance <= 3 (entries are negatively correlated, so this is safe).
  const double mean = sum / draws;
  const double se = std::sqrt(3.0 / draws);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("stiefel_minimize pulls toward the identity") {
  auto f = [](const Matrix& R) {
    return (R - Matrix::Identity(2, 2)).squaredNorm();
  };
  auto g = [](const Matrix& R) {
    return (2.0 * (R - Matrix::Identity(2, 2))).eval();
  };
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix start = random_orthogonal(2, rng);
    if (start.determinant() < 0) {
      start.col(0) *= -1.0;  // keep the start in the rotation component
    }
    const StiefelResult res = stiefel_minimize(f, g, start);
    CHECK(res.objective_value <= 1e-8);
    CHECK((res.minimizer - Matrix::Identity(2, 2)).norm() <= 1e-4);
    CHECK(orthogonality_residual(res.minimizer) <= 1e-8);
  }
}

TEST_CASE("stiefel_minimize recovers a planted rotation") {
  Rng rng(29);
  int hits = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const int m = 2 + trial % 2;
    const Matrix G = random_matrix(5, m, rng);
    const Matrix Rstar = random_orthogonal(m, rng);
    const Matrix target = G * Rstar;
    auto f = [&](const Matrix& R) { return (G * R - target).squaredNorm(); };
    auto g = [&](const Matrix& R) {
      return (2.0 * G.transpose() * (G * R - target)).eval();
    };
    Rng restart_rng(1000 + trial);
    const StiefelResult res = stiefel_minimize_restarts(
        f, g, Matrix::Identity(m, m), 5, restart_rng);
    if (res.objective_value <= 1e-8) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("stiefel_minimize never increases the objective") {
  Rng rng(31);
  const Matrix A = random_matrix(3, 3, rng);
  auto f = [&](const Matrix& R) { return (A * R).trace(); };
  auto g = [&](const Matrix&) { return A.transpose().eval(); };
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix start = random_orthogonal(3, rng);
    const StiefelResult res = stiefel_minimize(f, g, start);
    CHECK(res.objective_value <= f(start) + 1e-12);
    CHECK(orthogonality_residual(res.minimizer) <= 1e-8);
  }
}

TEST_CASE("stiefel_minimize rejects a non-orthogonal start") {
  auto f = [](const Matrix& R) { return R.squaredNorm(); };
  auto g = [](const Matrix& R) { return (2.0 * R).eval(); };
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(stiefel_minimize(f, g, bad), Error);
}

TEST_CASE("stiefel_minimize reports non-convergence at tiny iteration caps") {
  // A linear objective over the rotation group has no interior minimum,
  // so one iteration cannot reach the gradient tolerance.
  Matrix A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  auto f = [&](const Matrix& R) { return (A * R).trace(); };
  auto g = [&](const Matrix&) { return A.transpose().eval(); };
  StiefelOptions opts;
  opts.max_iters = 1;
  const StiefelResult res =
      stiefel_minimize(f, g, Matrix::Identity(2, 2), opts);
  CHECK_FALSE(res.converged);
  CHECK(orthogonality_residual(res.minimizer) <= 1e-8);
}
