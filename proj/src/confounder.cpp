#include "facsens/confounder.hpp"

#include <Eigen/Cholesky>
#include <sstream>

#include "facsens/errors.hpp"

namespace facsens {

void TreatmentFactorModel::validate() const {
  if (B.rows() < 1 || B.cols() < 1) {
    throw DimensionMismatch("TreatmentFactorModel: B must be non-empty");
  }
  if (!(sigma2_t_given_u > 0.0)) {
    throw Error("TreatmentFactorModel: noise variance must be positive");
  }
  if (treatment_variances.size() != 0 && treatment_variances.size() != B.rows()) {
    throw DimensionMismatch(
        "TreatmentFactorModel: treatment_variances length must match rows of B");
  }
  double kk = static_cast<double>(k());
  double mm = static_cast<double>(m());
  if ((kk - mm) * (kk - mm) < kk + mm) {
    std::ostringstream msg;
    msg << "TreatmentFactorModel: m = " << m() << " is not identifiable with k = "
        << k() << " ((k-m)^2 < k+m)";
    throw Error(msg.str());
  }
}

namespace {

ConfounderConditional moments_impl(const Matrix& B, const Vector& sigma2_diag,
                                   bool force_direct) {
  const auto k = B.rows();
  const auto m = B.cols();
  if (sigma2_diag.size() != k) {
    throw DimensionMismatch("conditional_moments: noise vector length != rows of B");
  }
  if ((sigma2_diag.array() <= 0.0).any()) {
    throw Error("conditional_moments: noise variances must be positive");
  }

  ConfounderConditional out;
  if (!force_direct && k > 2 * m) {
    // Small m x m system: B'(BB' + D)^{-1} = (B' D^{-1} B + I)^{-1} B' D^{-1}.
    Matrix BtDinv = B.transpose() * sigma2_diag.cwiseInverse().asDiagonal();
    Matrix inner = BtDinv * B + Matrix::Identity(m, m);
    Eigen::LDLT<Matrix> ldlt(inner);
    out.coef = ldlt.solve(BtDinv);
  } else {
    Matrix big = B * B.transpose();
    big += Matrix(sigma2_diag.asDiagonal());
    Eigen::LDLT<Matrix> ldlt(big);
    out.coef = ldlt.solve(B).transpose();
  }
  out.cov = Matrix::Identity(m, m) - out.coef * B;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.inv_sqrt_cov = sym_inv_sqrt(out.cov);
  return out;
}

}  // namespace

ConfounderConditional conditional_moments(const TreatmentFactorModel& model) {
  model.validate();
  Vector diag = Vector::Constant(model.k(), model.sigma2_t_given_u);
  return moments_impl(model.B, diag, /*force_direct=*/false);
}

ConfounderConditional conditional_moments_diag(const Matrix& B,
                                               const Vector& sigma2_diag) {
  return moments_impl(B, sigma2_diag, /*force_direct=*/false);
}

ConfounderConditional conditional_moments_direct(const Matrix& B,
                                                 const Vector& sigma2_diag) {
  return moments_impl(B, sigma2_diag, /*force_direct=*/true);
}

Vector scaled_mean_shift(const ConfounderConditional& cond,
                         const TreatmentContrast& contrast) {
  if (contrast.t1.size() != contrast.t2.size() ||
      contrast.t1.size() != cond.coef.cols()) {
    throw DimensionMismatch("scaled_mean_shift: contrast length != treatments");
  }
  return cond.inv_sqrt_cov * (cond.coef * (contrast.t1 - contrast.t2));
}

Matrix shift_matrix_for_contrasts(
    const ConfounderConditional& cond,
    const std::vector<TreatmentContrast>& contrasts) {
  if (contrasts.empty()) {
    throw DimensionMismatch("shift_matrix_for_contrasts: no contrasts given");
  }
  Matrix out(cond.coef.rows(), static_cast<Eigen::Index>(contrasts.size()));
  for (std::size_t j = 0; j < contrasts.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = scaled_mean_shift(cond, contrasts[j]);
  }
  return out;
}

}  // namespace facsens
