#include <cmath>

#include "facsens/errors.hpp"
#include "facsens/estimation.hpp"

namespace facsens {

namespace {

Vector column_variances(const Matrix& X) {
  Vector mean = X.colwise().mean();
  Vector out(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    out(j) = (X.col(j).array() - mean(j)).square().sum() /
             static_cast<double>(X.rows() - 1);
  }
  return out;
}

}  // namespace

TreatmentModelFit fit_treatment_model(const Dataset& data, int m,
                                      const FaOptions& fa_opts) {
  data.validate();
  Matrix corr = sample_correlation(data.T);
  FactorFit fa = ml_factor_analysis(corr, m, fa_opts);

  Vector vars = column_variances(data.T);
  Vector sd = vars.cwiseSqrt();

  TreatmentModelFit out;
  out.fa = fa;
  out.model.B = sd.asDiagonal() * fa.loadings_std;
  // Isotropic noise: average the per-treatment uniqueness variances.
  out.model.sigma2_t_given_u =
      (fa.uniquenesses.array() * vars.array()).mean();
  out.model.treatment_variances = vars;
  out.model.validate();
  return out;
}

OutcomeModelFit fit_outcome_model(const Dataset& data, int m,
                                  const RegressOptions& regress_opts,
                                  const FaOptions& fa_opts) {
  data.validate();
  ResponseSurface surface = fit_g_check(data, regress_opts);
  Matrix resid = data.Y - surface.predict_rows(data.T);

  Matrix corr = sample_correlation(resid);
  FactorFit fa = ml_factor_analysis(corr, m, fa_opts);

  Vector vars = column_variances(resid);
  Vector sd = vars.cwiseSqrt();

  OutcomeModelFit out;
  out.fa = fa;
  out.surface = surface;
  out.model.Gamma = sd.asDiagonal() * fa.loadings_std;
  out.model.sigma2_y_given_tu = (fa.uniquenesses.array() * vars.array()).mean();
  // Sample covariance of the residuals (the conditional outcome scale).
  Vector mean = resid.colwise().mean();
  Matrix centered = resid.rowwise() - mean.transpose();
  out.model.residual_cov =
      centered.transpose() * centered / static_cast<double>(resid.rows() - 1);
  out.model.g_check = [surface](const Vector& t) { return surface.predict(t); };
  return out;
}

}  // namespace facsens
