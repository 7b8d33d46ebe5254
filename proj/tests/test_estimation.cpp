#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "facsens/bounds.hpp"
#include "facsens/errors.hpp"
#include "facsens/estimation.hpp"
#include "facsens/simulation.hpp"

using namespace facsens;

namespace {

Matrix compound_symmetry(int p, double rho) {
  Matrix S = Matrix::Constant(p, p, rho);
  S.diagonal().setOnes();
  return S;
}

TrueModel noise_only_model(int k, int q, int m) {
  TrueModel truth;
  truth.B = Matrix::Zero(k, m);
  truth.Gamma = Matrix::Zero(q, m);
  truth.sigma2_t = 1.0;
  truth.sigma2_y = 1.0;
  truth.g = [q](const Vector&) { return Vector::Zero(q).eval(); };
  return truth;
}

TrueModel two_factor_model() {
  TrueModel truth = default_true_model();
  truth.B = truth.B.leftCols(2).eval();
  truth.Gamma = truth.Gamma.leftCols(2).eval();
  truth.sigma2_t = 2.0;
  truth.sigma2_y = 2.0;
  const int q = truth.q();
  truth.g = [q](const Vector&) { return Vector::Zero(q).eval(); };
  return truth;
}

}  // namespace

TEST_CASE("Dataset validation catches malformed inputs") {
  Dataset ds;
  ds.T = Matrix::Random(50, 3);
  ds.Y = Matrix::Random(50, 3);
  CHECK_NOTHROW(ds.validate());

  Dataset bad_rows = ds;
  bad_rows.Y = Matrix::Random(49, 3);
  CHECK_THROWS_AS(bad_rows.validate(), Error);

  Dataset has_nan = ds;
  has_nan.T(10, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(has_nan.validate(), Error);

  Dataset constant_col = ds;
  constant_col.Y.col(2).setConstant(3.0);
  CHECK_THROWS_AS(constant_col.validate(), Error);

  Dataset too_small;
  too_small.T = Matrix::Random(3, 3);
  too_small.Y = Matrix::Random(3, 3);
  CHECK_THROWS_AS(too_small.validate(), Error);
}

TEST_CASE("max_admissible_factors matches the count condition") {
  CHECK(max_admissible_factors(3) == 1);
  CHECK(max_admissible_factors(5) == 2);
  CHECK(max_admissible_factors(7) == 3);
  CHECK(max_admissible_factors(10) == 6);
}

TEST_CASE("factor analysis of the identity correlation finds nothing") {
  const FactorFit fit = ml_factor_analysis(Matrix::Identity(5, 5), 1);
  CHECK(fit.loadings_std.norm() <= 1e-8);
  CHECK((fit.uniquenesses - Vector::Ones(5)).norm() <= 1e-8);
  CHECK_FALSE(fit.heywood);
}

TEST_CASE("factor analysis recovers an exact one-factor structure") {
  Vector lambda(4);
  lambda << 0.9, 0.8, 0.7, 0.6;
  Matrix corr = lambda * lambda.transpose();
  corr.diagonal().setOnes();

  // The alternating fit converges linearly, so the discrepancy-change
  // stopping rule bounds the parameter error only loosely.
  const FactorFit fit = ml_factor_analysis(corr, 1);
  const Matrix LLt = fit.loadings_std * fit.loadings_std.transpose();
  CHECK((LLt - lambda * lambda.transpose()).norm() <= 1e-4);
  for (int i = 0; i < 4; ++i) {
    CHECK(fit.uniquenesses(i) ==
          doctest::Approx(1.0 - lambda(i) * lambda(i)).epsilon(1e-4));
  }

  // Defining fit property: the model reproduces the input correlation.
  Matrix fitted = LLt;
  fitted += Matrix(fit.uniquenesses.asDiagonal());
  CHECK((fitted - corr).norm() <= 1e-4);
}

TEST_CASE("factor-fit invariants hold on a generic correlation") {
  Rng rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix X(400, 6);
  for (int i = 0; i < X.rows(); ++i) {
    const double f = gauss(rng);
    for (int j = 0; j < X.cols(); ++j) {
      X(i, j) = 0.7 * f + 0.8 * gauss(rng);
    }
  }
  const FactorFit fit = ml_factor_analysis(sample_correlation(X), 2);
  CHECK(fit.converged);
  for (int i = 0; i < 6; ++i) {
    CHECK(fit.uniquenesses(i) > 0.0);
    CHECK(fit.uniquenesses(i) <= 1.0);
    CHECK(fit.loadings_std.row(i).squaredNorm() <= 1.0 + 1e-8);
  }
}

TEST_CASE("near-boundary uniquenesses are clamped and flagged, not fatal") {
  Vector lambda(4);
  lambda << 0.999, 0.999, 0.5, 0.4;
  Matrix corr = lambda * lambda.transpose();
  corr.diagonal().setOnes();
  const FactorFit fit = ml_factor_analysis(corr, 1);
  CHECK(fit.heywood);
  CHECK(fit.uniquenesses.minCoeff() >= 0.005 - 1e-12);
}

TEST_CASE("factor analysis throws NonConvergence at a tiny iteration cap") {
  Rng rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix X(200, 5);
  for (int i = 0; i < X.rows(); ++i) {
    const double f = gauss(rng);
    for (int j = 0; j < X.cols(); ++j) X(i, j) = 0.6 * f + gauss(rng);
  }
  FaOptions opts;
  opts.max_iters = 1;
  opts.tol = 1e-15;
  CHECK_THROWS_AS(ml_factor_analysis(sample_correlation(X), 1, opts),
                  NonConvergence);
}

TEST_CASE("treatment model recovers B B' from simulated data") {
  const TrueModel truth = default_true_model();
  const Dataset ds = generate_dataset(truth, 100000, 71);
  const TreatmentModelFit fit = fit_treatment_model(ds, 3);

  const Matrix truth_gram = truth.B * truth.B.transpose();
  const Matrix est_gram = fit.model.B * fit.model.B.transpose();
  CHECK((est_gram - truth_gram).norm() <= 0.05 * truth_gram.norm());
  CHECK(fit.model.sigma2_t_given_u ==
        doctest::Approx(truth.sigma2_t).epsilon(0.1));
}

TEST_CASE("rescaling treatments rescales B B' but not the partial R2") {
  const TrueModel truth = default_true_model();
  const Dataset ds = generate_dataset(truth, 20000, 72);
  Dataset scaled = ds;
  scaled.T *= 10.0;

  const TreatmentModelFit base = fit_treatment_model(ds, 3);
  const TreatmentModelFit big = fit_treatment_model(scaled, 3);

  const Matrix gram_base = base.model.B * base.model.B.transpose();
  const Matrix gram_big = big.model.B * big.model.B.transpose();
  CHECK((gram_big - 100.0 * gram_base).norm() <= 1e-6 * gram_big.norm());

  Vector d = Vector::Zero(truth.k());
  d(1) = 1.0;
  const double r2_base = partial_r2_treatment(base.model, d);
  Vector d_scaled = d;  // the contrast direction lives on the data scale
  const double r2_big = partial_r2_treatment(big.model, d_scaled);
  CHECK(r2_big == doctest::Approx(r2_base).epsilon(1e-6));
}

TEST_CASE("pure-noise treatments give a weak, low-r2 loading matrix") {
  const TrueModel truth = noise_only_model(6, 3, 1);
  const Dataset ds = generate_dataset(truth, 20000, 73);
  // A maximum-likelihood single factor on a noise correlation always
  // captures the strongest sampling fluctuation, whose scale is about
  // (k/n)^(1/4); the landscape is nearly flat there, so allow the
  // alternation extra iterations.
  FaOptions fa;
  fa.max_iters = 50000;
  const TreatmentModelFit fit = fit_treatment_model(ds, 1, fa);
  CHECK(fit.model.B.norm() <= 0.6);
  CHECK(fit.model.sigma2_t_given_u == doctest::Approx(1.0).epsilon(0.05));
  Vector d = Vector::Zero(6);
  d(0) = 1.0;
  CHECK(partial_r2_treatment(fit.model, d) <= 0.15);
}

TEST_CASE("hinge surface interpolates an exactly linear truth") {
  Rng rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.T.resize(500, 3);
  for (int i = 0; i < 500; ++i) {
    for (int j = 0; j < 3; ++j) ds.T(i, j) = gauss(rng);
  }
  ds.Y.resize(500, 2);
  ds.Y.col(0) = 2.0 * ds.T.col(0) - ds.T.col(1);
  ds.Y.col(1) = 0.5 * ds.T.col(2).array() + 1.0;

  for (RegressMethod method : {RegressMethod::hinge, RegressMethod::poly2}) {
    RegressOptions opts;
    opts.method = method;
    // The default polynomial ridge trades a few parts per million of bias
    // for stability; shrink it so exact representability is visible.
    opts.ridge = 1e-12;
    const ResponseSurface surface = fit_g_check(ds, opts);
    const Matrix resid = ds.Y - surface.predict_rows(ds.T);
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("surface fitting ignores row order") {
  Rng rng(79);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 300;
  Dataset ds;
  ds.T.resize(n, 2);
  ds.Y.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    ds.T(i, 0) = gauss(rng);
    ds.T(i, 1) = gauss(rng);
    ds.Y(i, 0) = std::sin(ds.T(i, 0)) + 0.3 * ds.T(i, 1) + 0.1 * gauss(rng);
  }

  Dataset shuffled = ds;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < n; ++i) {
    shuffled.T.row(i) = ds.T.row(perm[i]);
    shuffled.Y.row(i) = ds.Y.row(perm[i]);
  }

  const ResponseSurface a = fit_g_check(ds);
  const ResponseSurface b = fit_g_check(shuffled);
  Vector probe(2);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    probe << unif(rng), unif(rng);
    CHECK(a.predict(probe)(0) == doctest::Approx(b.predict(probe)(0))
                                     .epsilon(1e-12));
  }
}

TEST_CASE("fitted observable surface tracks the population one") {
  const TrueModel truth = default_true_model();
  const Dataset ds = generate_dataset(truth, 100000, 74);
  const OutcomeModelFit fit = fit_outcome_model(ds, 3);
  const OutcomeFactorModel pop = true_outcome_model(truth);

  // Probe the estimand-relevant coordinate steps used by the scenario
  // battery rather than far-tail points.
  for (int coord : {1, 2, 3, 4}) {
    Vector t = Vector::Zero(truth.k());
    t(coord) = 1.0;
    const Vector predicted = fit.model.g_check(t) - fit.model.g_check(
        Vector::Zero(truth.k()));
    const Vector expected = pop.g_check(t) - pop.g_check(
        Vector::Zero(truth.k()));
    // The tolerance is approximation bias, not noise: a hinge basis on
    // quantile knots tracks the curved outcome pieces to about 0.1 on
    // unit coordinate steps.
    for (int r = 0; r < truth.q(); ++r) {
      CHECK(std::abs(predicted(r) - expected(r)) <= 0.12);
    }
  }
}

TEST_CASE("outcome model recovers Gamma Gamma' and the residual structure") {
  const TrueModel truth = default_true_model();
  const Dataset ds = generate_dataset(truth, 100000, 75);
  const OutcomeModelFit fit = fit_outcome_model(ds, 3);

  const Matrix truth_gram = truth.Gamma * truth.Gamma.transpose();
  const Matrix est_gram = fit.model.Gamma * fit.model.Gamma.transpose();
  CHECK((est_gram - truth_gram).norm() <= 0.05 * truth_gram.norm());

  const Matrix implied =
      est_gram + fit.model.sigma2_y_given_tu *
                     Matrix::Identity(truth.q(), truth.q());
  CHECK((implied - fit.model.residual_cov).norm() <=
        0.05 * fit.model.residual_cov.norm());
}

TEST_CASE("no confounding signal means a near-zero bias bound") {
  const TrueModel truth = noise_only_model(6, 4, 1);
  const Dataset ds = generate_dataset(truth, 20000, 76);
  const TreatmentModelFit tfit = fit_treatment_model(ds, 1);
  const OutcomeModelFit ofit = fit_outcome_model(ds, 1);
  const ConfounderConditional cond = conditional_moments(tfit.model);

  Vector a = Vector::Zero(4);
  a(0) = 1.0;
  TreatmentContrast contrast{Vector::Zero(6), Vector::Zero(6)};
  contrast.t1(0) = 1.0;
  const double bound = bias_bound(ofit.model, cond, a, contrast);
  CHECK(bound <= 0.05);
}

TEST_CASE("eigenvalue rule on compound symmetry and identity") {
  const FactorCountResult cs =
      select_num_factors_corr(compound_symmetry(5, 0.8), 1000,
                              FactorCountMethod::eigen_gt1);
  CHECK(cs.selected == 1);
  // Closed form: one eigenvalue 1 + 4 rho = 4.2, four at 1 - rho = 0.2.
  CHECK(cs.eigenvalues(0) == doctest::Approx(4.2).epsilon(1e-10));
  CHECK(cs.eigenvalues(1) == doctest::Approx(0.2).epsilon(1e-10));

  const FactorCountResult id = select_num_factors_corr(
      Matrix::Identity(6, 6), 1000, FactorCountMethod::eigen_gt1);
  CHECK(id.selected == 0);
}

TEST_CASE("parallel analysis recovers the true factor count") {
  const TrueModel truth = two_factor_model();
  int hits = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset ds = generate_dataset(truth, 1000, 500 + rep);
    const FactorCountResult res =
        select_num_factors(ds.T, FactorCountMethod::parallel, 900 + rep);
    if (res.selected == 2) ++hits;
  }
  CHECK(hits >= 16);  // >= 80%
}

TEST_CASE("BIC picks the true factor count on clean two-factor data") {
  const TrueModel truth = two_factor_model();
  const Dataset ds = generate_dataset(truth, 2000, 321);
  const FactorCountResult res =
      select_num_factors(ds.T, FactorCountMethod::bic, 1);
  CHECK(res.selected == 2);
}

TEST_CASE("selection results are clamped to the admissible maximum") {
  // Nine highly collinear columns force a large raw eigen count only in
  // contrived cases; instead check the clamp logic directly via a
  // correlation whose eigen count exceeds the cap for p = 3 (cap 1).
  Matrix corr = compound_symmetry(3, -0.2);
  // Eigenvalues: 1 - 0.2*2 = 0.6 and 1 + 0.2 = 1.2 (twice): raw count 2.
  const FactorCountResult res =
      select_num_factors_corr(corr, 500, FactorCountMethod::eigen_gt1);
  CHECK(res.raw == 2);
  CHECK(res.selected == 1);
  CHECK(res.clamped);
}

TEST_CASE("unknown factor-count methods are rejected") {
  CHECK_THROWS_AS(parse_factor_count_method("velicer"), UnsupportedMethod);
  CHECK_THROWS_AS(parse_factor_count_method("map"), UnsupportedMethod);
  CHECK_THROWS_AS(parse_factor_count_method(""), UnsupportedMethod);
  CHECK(parse_factor_count_method("eigen") == FactorCountMethod::eigen_gt1);
  CHECK(parse_factor_count_method("parallel") == FactorCountMethod::parallel);
  CHECK(parse_factor_count_method("bic") == FactorCountMethod::bic);
}
