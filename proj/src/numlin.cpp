#include "facsens/numlin.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <sstream>

#include "facsens/errors.hpp"

namespace facsens {

Matrix sym_inv_sqrt(const Matrix& S) {
  if (S.rows() != S.cols()) {
    throw DimensionMismatch("sym_inv_sqrt: matrix must be square");
  }
  // Work on the symmetrized matrix so tiny asymmetries from upstream
  // arithmetic cannot flip the eigensolver into complex territory.
  Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NotPositiveDefinite("sym_inv_sqrt: eigendecomposition failed");
  }
  const Vector& vals = eig.eigenvalues();
  double lam_max = vals(vals.size() - 1);
  double lam_min = vals(0);
  if (lam_max <= 0.0 || lam_min <= 1e-10 * lam_max) {
    std::ostringstream msg;
    msg << "sym_inv_sqrt: matrix not positive definite (eigenvalues in ["
        << lam_min << ", " << lam_max << "])";
    throw NotPositiveDefinite(msg.str());
  }
  Vector inv_sqrt_vals = vals.array().rsqrt();
  return eig.eigenvectors() * inv_sqrt_vals.asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix pseudoinverse(const Matrix& M, double tol) {
  if (M.size() == 0) {
    throw DimensionMismatch("pseudoinverse: empty matrix");
  }
  if (tol < 0.0) {
    tol = 1e-12 * static_cast<double>(std::max(M.rows(), M.cols()));
  }
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  double cutoff = tol * (sv.size() > 0 ? sv(0) : 0.0);
  Vector inv_sv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

Matrix projector_colspace(const Matrix& M) {
  return M * pseudoinverse(M);
}

Matrix random_orthogonal(int m, Rng& rng) {
  if (m < 1) {
    throw DimensionMismatch("random_orthogonal: m must be >= 1");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix Z(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) Z(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(Z);
  Matrix Q = qr.householderQ() * Matrix::Identity(m, m);
  Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fixing the sign of diag(R) to be positive makes the factorization
  // unique and the resulting Q exactly Haar distributed.
  for (int j = 0; j < m; ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

double orthogonality_residual(const Matrix& R) {
  Matrix res = R.transpose() * R - Matrix::Identity(R.cols(), R.cols());
  return res.cwiseAbs().maxCoeff();
}

namespace {

// Retract an arbitrary square matrix back onto the orthogonal group via
// the sign-corrected QR factor.
Matrix qr_retract(const Matrix& X) {
  Eigen::HouseholderQR<Matrix> qr(X);
  Matrix Q = qr.householderQ() * Matrix::Identity(X.rows(), X.cols());
  Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

}  // namespace

StiefelResult stiefel_minimize(const std::function<double(const Matrix&)>& f,
                               const std::function<Matrix(const Matrix&)>& grad,
                               const Matrix& start,
                               const StiefelOptions& opts) {
  if (start.rows() != start.cols()) {
    throw DimensionMismatch("stiefel_minimize: start must be square");
  }
  if (orthogonality_residual(start) > 1e-8) {
    throw DimensionMismatch("stiefel_minimize: start must be orthogonal");
  }

  StiefelResult out;
  Matrix R = start;
  double fval = f(R);
  out.minimizer = R;
  out.objective_value = fval;
  double step = 1.0;

  for (int it = 0; it < opts.max_iters; ++it) {
    out.iterations = it;
    Matrix G = grad(R);
    Matrix RtG = R.transpose() * G;
    // Tangent projection for the orthogonal group: R * skew(R^T G).
    Matrix riem = R * (0.5 * (RtG - RtG.transpose()));
    double gnorm = riem.norm();
    if (gnorm <= opts.grad_tol) {
      out.converged = true;
      break;
    }

    // Armijo backtracking along the negative tangent gradient (halving).
    double alpha = step;
    bool accepted = false;
    Matrix best_cand;
    double best_f = fval;
    int bt = 0;
    for (; bt < opts.max_backtracks; ++bt) {
      Matrix cand = qr_retract(R - alpha * riem);
      double fcand = f(cand);
      if (fcand <= fval - opts.armijo_c * alpha * gnorm * gnorm) {
        best_cand = cand;
        best_f = fcand;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No decrease possible at the smallest step: treat as stationary.
      out.converged = gnorm <= 1e3 * opts.grad_tol;
      break;
    }
    // A loose Armijo constant can accept an overshooting step whose
    // decrease is marginal (the iterate reflects across the minimizer and
    // crawls).  Keep halving while that strictly improves the candidate;
    // any improvement on an Armijo-accepted point satisfies the weaker
    // Armijo threshold of its own smaller step.
    for (double a2 = 0.5 * alpha; ++bt < opts.max_backtracks; a2 *= 0.5) {
      Matrix cand = qr_retract(R - a2 * riem);
      double fcand = f(cand);
      if (fcand >= best_f) break;
      best_cand = cand;
      best_f = fcand;
      alpha = a2;
    }
    const double decrease = fval - best_f;
    R = best_cand;
    fval = best_f;
    // Let the step grow again so progress is not throttled by one bad
    // line search early on.
    step = std::min(2.0 * alpha, 1.0);
    if (fval < out.objective_value) {
      out.objective_value = fval;
      out.minimizer = R;
    }
    if (decrease <= opts.fun_tol * std::max(1.0, std::abs(fval))) {
      out.converged = true;  // objective plateau
      break;
    }
  }
  if (fval < out.objective_value) {
    out.objective_value = fval;
    out.minimizer = R;
  }
  return out;
}

StiefelResult stiefel_minimize_restarts(
    const std::function<double(const Matrix&)>& f,
    const std::function<Matrix(const Matrix&)>& grad, const Matrix& start,
    int restarts, Rng& rng, const StiefelOptions& opts) {
  StiefelResult best = stiefel_minimize(f, grad, start, opts);
  for (int r = 0; r < restarts && best.objective_value > opts.fun_tol; ++r) {
    Matrix R0 = random_orthogonal(static_cast<int>(start.rows()), rng);
    StiefelResult cand = stiefel_minimize(f, grad, R0, opts);
    if (cand.objective_value < best.objective_value) best = cand;
  }
  return best;
}

}  // namespace facsens
