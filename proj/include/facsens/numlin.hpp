#ifndef FACSENS_NUMLIN_HPP
#define FACSENS_NUMLIN_HPP

#include <Eigen/Dense>
#include <functional>
#include <random>

namespace facsens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

// Inverse symmetric square root of a symmetric positive definite matrix.
// Throws NotPositiveDefinite if the smallest eigenvalue does not exceed
// 1e-10 times the largest.
Matrix sym_inv_sqrt(const Matrix& S);

// Moore-Penrose pseudoinverse via SVD.  Singular values at or below
// tol * max_singular_value are treated as zero; tol < 0 selects the
// default 1e-12 * max(rows, cols).
Matrix pseudoinverse(const Matrix& M, double tol = -1.0);

// Orthogonal projector onto the column space of M, i.e. M * pinv(M).
Matrix projector_colspace(const Matrix& M);

// Haar-distributed random orthogonal m x m matrix: QR of a standard
// Gaussian matrix with the sign of diag(R) folded into Q.
Matrix random_orthogonal(int m, Rng& rng);

// Max abs entry of R^T R - I; small iff R has orthonormal columns.
double orthogonality_residual(const Matrix& R);

struct StiefelOptions {
  int max_iters = 500;
  double grad_tol = 1e-9;   // Frobenius norm of the tangent gradient
  double fun_tol = 1e-12;   // stop once the objective falls this low
  double armijo_c = 1e-4;   // sufficient-decrease constant
  int max_backtracks = 40;  // step halvings per line search
};

struct StiefelResult {
  Matrix minimizer;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient or objective tolerance reached
};

// Minimize f over square orthogonal matrices by projected gradient
// descent: tangent step R * skew(R^T G), QR retraction, Armijo
// backtracking line search.  `grad` returns the Euclidean gradient.
StiefelResult stiefel_minimize(const std::function<double(const Matrix&)>& f,
                               const std::function<Matrix(const Matrix&)>& grad,
                               const Matrix& start,
                               const StiefelOptions& opts = {});

// Run stiefel_minimize from `start` plus `restarts` Haar-random starts
// (covering both determinant components) and keep the best result.
// Stops early once the objective reaches opts.fun_tol.
StiefelResult stiefel_minimize_restarts(
    const std::function<double(const Matrix&)>& f,
    const std::function<Matrix(const Matrix&)>& grad, const Matrix& start,
    int restarts, Rng& rng, const StiefelOptions& opts = {});

}  // namespace facsens

#endif  // FACSENS_NUMLIN_HPP
