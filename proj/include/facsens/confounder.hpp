#ifndef FACSENS_CONFOUNDER_HPP
#define FACSENS_CONFOUNDER_HPP

#include <vector>

#include "facsens/numlin.hpp"

namespace facsens {

// Linear factor model for the treatments: T = B u + noise, with the
// latent confounder u standard normal and isotropic treatment noise.
struct TreatmentFactorModel {
  Matrix B;                    // k x m loading matrix
  double sigma2_t_given_u = 1.0;  // treatment noise variance
  Vector treatment_variances;  // k marginal variances (diag of cov(T))

  int k() const { return static_cast<int>(B.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  // Throws unless shapes are coherent, the noise variance is positive,
  // and the factor count satisfies (k - m)^2 >= k + m.
  void validate() const;
};

// A pair of treatment values whose effect contrast is of interest.
struct TreatmentContrast {
  Vector t1;
  Vector t2;
};

// Moments of the confounder given the treatments.  The conditional mean
// is coef * t; the conditional covariance does not depend on t.
struct ConfounderConditional {
  Matrix coef;          // m x k regression coefficient B'(BB' + s2 I)^{-1}
  Matrix cov;           // m x m conditional covariance
  Matrix inv_sqrt_cov;  // symmetric inverse square root of cov
};

// Conditional confounder law for isotropic treatment noise.  Uses the
// m x m Woodbury form when k > 2m and the direct k x k solve otherwise;
// the two agree to high precision.
ConfounderConditional conditional_moments(const TreatmentFactorModel& model);

// Same law with per-treatment noise variances (supported internally;
// the estimation path only ever produces the isotropic model above).
ConfounderConditional conditional_moments_diag(const Matrix& B,
                                               const Vector& sigma2_diag);

// Reference implementation that always solves the k x k system directly.
// Exposed so tests can pin the fast path against it.
ConfounderConditional conditional_moments_direct(const Matrix& B,
                                                 const Vector& sigma2_diag);

// Scaled conditional mean shift cov^{-1/2} * coef * (t1 - t2): the
// confounder displacement induced by moving the treatments from t2 to
// t1, in whitened confounder coordinates.
Vector scaled_mean_shift(const ConfounderConditional& cond,
                         const TreatmentContrast& contrast);

// Column j is the scaled mean shift of contrasts[j]; m x c.
Matrix shift_matrix_for_contrasts(const ConfounderConditional& cond,
                                  const std::vector<TreatmentContrast>& contrasts);

}  // namespace facsens

#endif  // FACSENS_CONFOUNDER_HPP
