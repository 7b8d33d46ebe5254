#include "doctest.h"

#include <cmath>

#include "facsens/bounds.hpp"
#include "facsens/errors.hpp"
#include "facsens/simulation.hpp"

using namespace facsens;

namespace {

// Reflection taking unit vector x to unit vector y (norms must match).
Matrix reflection_between(const Vector& x, const Vector& y) {
  const int m = static_cast<int>(x.size());
  Vector w = x - y;
  if (w.norm() < 1e-14) return Matrix::Identity(m, m);
  return Matrix::Identity(m, m) - 2.0 / w.squaredNorm() * (w * w.transpose());
}

// Hand-computable one-factor setup: B = (1,1,1)', sigma2 = 1, Gamma = [2].
struct TinySetup {
  TreatmentFactorModel treatment;
  OutcomeFactorModel outcome;
  ConfounderConditional cond;
  TreatmentContrast contrast;
  Vector a;
};

TinySetup tiny_setup() {
  TinySetup s;
  s.treatment.B = Matrix::Ones(3, 1);
  s.treatment.sigma2_t_given_u = 1.0;
  s.treatment.treatment_variances = Vector::Constant(3, 2.0);
  s.outcome.Gamma = Matrix::Constant(1, 1, 2.0);
  s.outcome.sigma2_y_given_tu = 1.0;
  s.outcome.residual_cov = Matrix::Constant(1, 1, 5.0);
  s.cond = conditional_moments(s.treatment);
  s.contrast.t1 = Vector::Zero(3);
  s.contrast.t1(0) = 1.0;
  s.contrast.t2 = Vector::Zero(3);
  s.a = Vector::Ones(1);
  return s;
}

}  // namespace

TEST_CASE("bias bound matches the hand-computed one-factor chain") {
  const TinySetup s = tiny_setup();
  // coef = (1/4, 1/4, 1/4), cond cov = 1/4, inv sqrt = 2,
  // scaled shift for the e1 step = 2 * 1/4 = 1/2, |a'Gamma| = 2.
  CHECK(scaled_mean_shift(s.cond, s.contrast).norm() ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bias_bound(s.outcome, s.cond, s.a, s.contrast) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("partial R2 values match their closed forms") {
  const TinySetup s = tiny_setup();
  // Outcome side: |a'Gamma|^2 / a'(GG' + I)a = 4 / 5.
  CHECK(partial_r2_outcome(s.outcome, s.a) ==
        doctest::Approx(0.8).epsilon(1e-12));
  // Treatment side along e1: 1 / (1 + 1) = 1/2.
  Vector d = Vector::Zero(3);
  d(0) = 1.0;
  CHECK(partial_r2_treatment(s.treatment, d) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("degenerate directions and shape mismatches throw") {
  const TinySetup s = tiny_setup();
  CHECK_THROWS_AS(partial_r2_outcome(s.outcome, Vector::Zero(1)),
                  DegenerateDirection);
  CHECK_THROWS_AS(partial_r2_treatment(s.treatment, Vector::Zero(3)),
                  DegenerateDirection);
  CHECK_THROWS_AS(partial_r2_outcome(s.outcome, Vector::Ones(4)),
                  DimensionMismatch);
  CHECK_THROWS_AS(partial_r2_treatment(s.treatment, Vector::Ones(2)),
                  DimensionMismatch);
  CHECK_THROWS_AS(bias_bound(s.outcome, s.cond, Vector::Ones(3), s.contrast),
                  DimensionMismatch);
}

TEST_CASE("naive effect evaluates the fitted surface at the contrast") {
  TinySetup s = tiny_setup();
  s.outcome.g_check = [](const Vector& t) {
    Vector y(1);
    y(0) = 3.0 * t(0) - t(2) + 0.5;
    return y;
  };
  CHECK(naive_effect(s.outcome, s.a, s.contrast) ==
        doctest::Approx(3.0).epsilon(1e-12));
  OutcomeFactorModel no_surface = s.outcome;
  no_surface.g_check = nullptr;
  CHECK_THROWS_AS(naive_effect(no_surface, s.a, s.contrast), Error);
}

TEST_CASE("region invariants: ordering, containment, shifting") {
  BiasRegion region;
  region.intervals = {{-1.0, -0.5}, {0.2, 0.8}};
  CHECK_NOTHROW(region.validate());
  CHECK(region.total_width() == doctest::Approx(1.1));
  CHECK(region.lo() == -1.0);
  CHECK(region.hi() == 0.8);
  CHECK(region.contains(-0.7));
  CHECK(region.contains(0.2));
  CHECK_FALSE(region.contains(0.0));
  CHECK(region.contains(0.85, 0.06));

  const BiasRegion moved = region.shifted(10.0, BiasRegion::Quantity::pate);
  CHECK(moved.quantity == BiasRegion::Quantity::pate);
  CHECK(moved.lo() == doctest::Approx(9.0));
  CHECK(moved.hi() == doctest::Approx(10.8));

  BiasRegion empty;
  CHECK_THROWS_AS(empty.validate(), EmptyRegion);
  BiasRegion reversed;
  reversed.intervals = {{1.0, 0.0}};
  CHECK_THROWS_AS(reversed.validate(), Error);
  BiasRegion overlapping;
  overlapping.intervals = {{0.0, 1.0}, {0.5, 2.0}};
  CHECK_THROWS_AS(overlapping.validate(), Error);
}

TEST_CASE("effect-frame mapping reflects and reorders bias intervals") {
  BiasRegion bias;
  bias.kind = BiasRegion::Kind::numeric_nc;
  bias.quantity = BiasRegion::Quantity::bias;
  bias.intervals = {{-1.0, -0.5}, {0.2, 0.8}};

  const BiasRegion pate = pate_region_from_bias(bias, 2.0);
  CHECK(pate.kind == BiasRegion::Kind::numeric_nc);
  CHECK(pate.quantity == BiasRegion::Quantity::pate);
  REQUIRE(pate.intervals.size() == 2);
  CHECK(pate.intervals[0].lo == doctest::Approx(1.2));
  CHECK(pate.intervals[0].hi == doctest::Approx(1.8));
  CHECK(pate.intervals[1].lo == doctest::Approx(2.5));
  CHECK(pate.intervals[1].hi == doctest::Approx(3.0));

  // Single symmetric interval maps to naive +- bound.
  const BiasRegion sym = partial_id_region(2.0, 0.75);
  CHECK(sym.lo() == doctest::Approx(1.25));
  CHECK(sym.hi() == doctest::Approx(2.75));
  CHECK(sym.quantity == BiasRegion::Quantity::pate);
  CHECK_THROWS_AS(partial_id_region(0.0, -1.0), Error);
}

TEST_CASE("the worst-case bound is attained over loading rotations") {
  const TrueModel truth = default_true_model();
  const ConfounderConditional cond = true_conditional(truth);
  const OutcomeFactorModel outcome = true_outcome_model(truth);

  Vector a = Vector::Zero(truth.q());
  a(1) = 1.0;
  TreatmentContrast contrast{Vector::Zero(truth.k()), Vector::Zero(truth.k())};
  contrast.t1(3) = 1.0;
  contrast.t2(3) = -0.5;

  const double bound = bias_bound(outcome, cond, a, contrast);
  const Vector s = scaled_mean_shift(cond, contrast);
  const RowVector ga = a.transpose() * outcome.Gamma;
  REQUIRE(bound > 0.1);

  // No rotation of the loadings can push the induced bias past the bound.
  Rng rng(404);
  double best = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix R = random_orthogonal(truth.m(), rng);
    const double value = std::abs(ga * R * s);
    CHECK(value <= bound + 1e-10);
    best = std::max(best, value);
  }
  CHECK(best > 0.5 * bound);

  // An explicit two-reflection rotation attains it exactly.
  const Vector v = ga.transpose() / ga.norm();
  const Vector shat = s / s.norm();
  Vector e1 = Vector::Zero(truth.m());
  e1(0) = 1.0;
  const Matrix attain = reflection_between(v, e1).transpose() *
                        reflection_between(shat, e1);
  CHECK(orthogonality_residual(attain) <= 1e-12);
  CHECK(std::abs(ga * attain * s) == doctest::Approx(bound).epsilon(1e-10));
}

TEST_CASE("bound and partial R2s ignore the unidentified rotation") {
  const TrueModel truth = default_true_model();
  Vector a = Vector::Zero(truth.q());
  a(2) = 1.0;
  a(4) = -0.5;
  TreatmentContrast contrast{Vector::Zero(truth.k()), Vector::Zero(truth.k())};
  contrast.t1(1) = 1.0;
  Vector d = contrast.t1 - contrast.t2;

  const TreatmentFactorModel tmodel = true_treatment_model(truth);
  const OutcomeFactorModel omodel = true_outcome_model(truth);
  const ConfounderConditional cond = conditional_moments(tmodel);
  const double bound0 = bias_bound(omodel, cond, a, contrast);
  const double r2o0 = partial_r2_outcome(omodel, a);
  const double r2t0 = partial_r2_treatment(tmodel, d);

  Rng rng(505);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix R = random_orthogonal(truth.m(), rng);
    TreatmentFactorModel trot = tmodel;
    trot.B = tmodel.B * R;
    OutcomeFactorModel orot = omodel;
    orot.Gamma = omodel.Gamma * R;
    const ConfounderConditional crot = conditional_moments(trot);
    CHECK(bias_bound(orot, crot, a, contrast) ==
          doctest::Approx(bound0).epsilon(1e-8));
    CHECK(partial_r2_outcome(orot, a) == doctest::Approx(r2o0).epsilon(1e-8));
    CHECK(partial_r2_treatment(trot, d) ==
          doctest::Approx(r2t0).epsilon(1e-8));
  }
}
