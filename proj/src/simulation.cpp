#include "facsens/simulation.hpp"

#include <cmath>
#include <random>

#include "facsens/errors.hpp"

namespace facsens {

void TrueModel::validate() const {
  if (B.size() == 0 || Gamma.size() == 0) {
    throw DimensionMismatch("TrueModel: empty loading matrix");
  }
  if (B.cols() != Gamma.cols()) {
    throw DimensionMismatch("TrueModel: treatment and outcome loadings have " +
                            std::to_string(B.cols()) + " vs " +
                            std::to_string(Gamma.cols()) + " factors");
  }
  if (sigma2_t <= 0.0 || sigma2_y <= 0.0) {
    throw Error("TrueModel: noise variances must be positive");
  }
  if (!g) throw Error("TrueModel: structural outcome function not set");
}

Vector default_outcome_function(const Vector& t) {
  if (t.size() != 10) {
    throw DimensionMismatch("default_outcome_function: expected 10 treatments");
  }
  Vector y = Vector::Zero(7);
  y(1) = 0.3 * t(8) * t(8) - 0.06 * t(9);
  y(3) = 0.1 * t(2) * t(2) + 0.1 * t(3);
  y(4) = 0.5 * t(1) - 0.5 * std::exp(0.35 * std::abs(t(2))) + 0.4 * t(3);
  return y;
}

TrueModel default_true_model() {
  TrueModel truth;
  truth.B.resize(10, 3);
  // Rows 6-8 cancel the cross products of the remaining rows exactly, so
  // the three columns are mutually orthogonal and coordinate treatment
  // contrasts produce axis-aligned confounder shifts.
  truth.B << 2.0, 0.0, 0.0,    //
      0.0, 1.6, 0.0,           //
      1.2, 0.0, 0.0,           //
      0.9, 0.8, 0.4,           //
      0.5, -0.7, 0.9,          //
      1.1, -0.7, 0.0,          //
      0.5, 0.0, -0.38,         //
      0.0, 0.5, 0.82,          //
      0.6, 1.0, -0.5,          //
      -0.4, 0.5, 0.8;
  truth.Gamma.resize(7, 3);
  // Row 2 is exactly orthogonal to row 1, row 3 is exactly colinear with
  // it, rows 4-7 are generic.
  truth.Gamma << 0.15, 1.4, 0.0,  //
      1.4, -0.15, 0.75,           //
      0.12, 1.12, 0.0,            //
      0.9, 0.8, -0.6,             //
      -0.7, 0.5, 0.9,             //
      0.4, 0.9, 0.8,              //
      1.0, -0.4, 0.5;
  truth.sigma2_t = 2.0;
  truth.sigma2_y = 2.0;
  truth.g = default_outcome_function;
  truth.validate();
  return truth;
}

TreatmentFactorModel true_treatment_model(const TrueModel& truth) {
  TreatmentFactorModel model;
  model.B = truth.B;
  model.sigma2_t_given_u = truth.sigma2_t;
  model.treatment_variances =
      (truth.B * truth.B.transpose()).diagonal().array() + truth.sigma2_t;
  model.validate();
  return model;
}

ConfounderConditional true_conditional(const TrueModel& truth) {
  return conditional_moments(true_treatment_model(truth));
}

OutcomeFactorModel true_outcome_model(const TrueModel& truth) {
  truth.validate();
  OutcomeFactorModel model;
  model.Gamma = truth.Gamma;
  model.sigma2_y_given_tu = truth.sigma2_y;
  model.residual_cov =
      truth.Gamma * truth.Gamma.transpose() +
      truth.sigma2_y * Matrix::Identity(truth.q(), truth.q());
  const ConfounderConditional cond = true_conditional(truth);
  const Matrix scaled_coef = cond.inv_sqrt_cov * cond.coef;  // m x k
  auto g = truth.g;
  const Matrix Gamma = truth.Gamma;
  model.g_check = [g, Gamma, scaled_coef](const Vector& t) -> Vector {
    return g(t) + Gamma * (scaled_coef * t);
  };
  return model;
}

double true_bias(const TrueModel& truth, const Vector& a,
                 const TreatmentContrast& contrast) {
  if (a.size() != truth.q()) {
    throw DimensionMismatch("true_bias: direction length != outcomes");
  }
  const Vector s = scaled_mean_shift(true_conditional(truth), contrast);
  return (a.transpose() * truth.Gamma).dot(s);
}

double true_pate(const TrueModel& truth, const Vector& a,
                 const TreatmentContrast& contrast) {
  if (a.size() != truth.q()) {
    throw DimensionMismatch("true_pate: direction length != outcomes");
  }
  return a.dot(truth.g(contrast.t1) - truth.g(contrast.t2));
}

Dataset generate_dataset(const TrueModel& truth, long n,
                         unsigned long long seed) {
  truth.validate();
  if (n < 1) throw Error("generate_dataset: need at least one row");
  const int k = truth.k();
  const int q = truth.q();
  const int m = truth.m();

  const ConfounderConditional cond = true_conditional(truth);
  const double sd_t = std::sqrt(truth.sigma2_t);
  const double sd_y = std::sqrt(truth.sigma2_y);

  Dataset ds;
  ds.T.resize(n, k);
  ds.Y.resize(n, q);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u(m), t(k), y(q);
  for (long i = 0; i < n; ++i) {
    for (int r = 0; r < m; ++r) u(r) = gauss(rng);
    t = truth.B * u;
    for (int r = 0; r < k; ++r) t(r) += sd_t * gauss(rng);
    y = truth.g(t) + truth.Gamma * (cond.inv_sqrt_cov * u);
    for (int r = 0; r < q; ++r) y(r) += sd_y * gauss(rng);
    ds.T.row(i) = t.transpose();
    ds.Y.row(i) = y.transpose();
  }
  ds.validate();
  return ds;
}

namespace {

Vector unit(int n, int idx) {
  Vector v = Vector::Zero(n);
  v(idx) = 1.0;
  return v;
}

}  // namespace

std::vector<Scenario> benchmark_scenarios(const TrueModel& truth) {
  truth.validate();
  const int k = truth.k();
  const int q = truth.q();
  if (k != 10 || q != 7) {
    throw DimensionMismatch(
        "benchmark_scenarios: the battery is defined for the built-in "
        "10-treatment, 7-outcome generator");
  }

  const TreatmentContrast nc_contrast{unit(k, 0), Vector::Zero(k)};
  NcEntry control1{0, {nc_contrast}};   // outcome 1, treatment-1 step
  NcEntry control6{5, {nc_contrast}};   // outcome 6, same step
  NegativeControlSpec one{{control1}};
  NegativeControlSpec two{{control1, control6}};

  auto contrast = [&](int idx) {
    return TreatmentContrast{unit(k, idx), Vector::Zero(k)};
  };

  std::vector<Scenario> out;
  out.push_back({"O/O", unit(q, 1), contrast(1), one,
                 "orthogonal loading rows, orthogonal shifts: no shrinkage"});
  out.push_back({"O/C", unit(q, 1), contrast(2), one,
                 "orthogonal loading rows, colinear shifts: no shrinkage"});
  out.push_back({"C/O", unit(q, 2), contrast(1), one,
                 "colinear loading rows, orthogonal shifts: marginal "
                 "shrinkage, center stays at zero"});
  out.push_back({"C/C", unit(q, 2), contrast(2), one,
                 "colinear loading rows and shifts: point identification"});
  out.push_back({"C/N", unit(q, 2), contrast(3), one,
                 "colinear loading rows, generic shifts: partial shrinkage"});
  out.push_back({"N/C", unit(q, 3), contrast(2), one,
                 "generic loading rows, colinear shifts: clear shrinkage "
                 "and a shifted center"});
  out.push_back({"N/N", unit(q, 3), contrast(4), one,
                 "generic loading rows and shifts: mild shrinkage"});
  out.push_back({"ON/C", unit(q, 1), contrast(2), two,
                 "two controls, colinear shifts: numeric region can split "
                 "into sign-symmetric pieces"});
  out.push_back({"NN/N", unit(q, 3), contrast(4), two,
                 "two generic controls: strongest pooled shrinkage"});
  return out;
}

}  // namespace facsens
