#ifndef FACSENS_SIMULATION_HPP
#define FACSENS_SIMULATION_HPP

#include <functional>
#include <string>
#include <vector>

#include "facsens/confounder.hpp"
#include "facsens/estimation.hpp"
#include "facsens/negcontrol.hpp"

namespace facsens {

// Ground-truth generating process: latent confounders feed both the
// treatment block and (after the conditional rescaling) the outcome block.
struct TrueModel {
  Matrix B;      // k x m treatment loadings
  Matrix Gamma;  // q x m outcome loadings
  double sigma2_t = 1.0;  // treatment noise variance, isotropic
  double sigma2_y = 1.0;  // outcome noise variance, isotropic
  std::function<Vector(const Vector&)> g;  // structural outcome function

  int k() const { return static_cast<int>(B.rows()); }
  int q() const { return static_cast<int>(Gamma.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

// Structural outcome function of the built-in benchmark generator
// (k = 10 treatments, q = 7 outcomes).  Outcomes 1, 3, 6 and 7 do not
// depend on the treatments at all.
Vector default_outcome_function(const Vector& t);

// Built-in benchmark generator: 10 treatments, 7 outcomes, 3 confounders.
// The treatment loading columns are mutually orthogonal so coordinate
// contrasts map to axis-aligned confounder shifts, and the outcome loading
// rows realize exact orthogonal / colinear / generic relationships used by
// the scenario battery.
TrueModel default_true_model();

// Exact population quantities implied by a TrueModel.
TreatmentFactorModel true_treatment_model(const TrueModel& truth);
ConfounderConditional true_conditional(const TrueModel& truth);
// Observed-surface outcome model: g_check(t) = g(t) + Gamma * scaled mean,
// residual covariance Gamma Gamma' + sigma2_y I.
OutcomeFactorModel true_outcome_model(const TrueModel& truth);

double true_bias(const TrueModel& truth, const Vector& a,
                 const TreatmentContrast& contrast);
double true_pate(const TrueModel& truth, const Vector& a,
                 const TreatmentContrast& contrast);

// Draw n rows.  Per row the draw order is fixed (confounders, treatment
// noise, outcome noise) so a seed pins the dataset exactly.
Dataset generate_dataset(const TrueModel& truth, long n,
                         unsigned long long seed);

// One benchmark estimand + control configuration, labeled by the
// structural relationship it realizes: loading-row relation first
// (O = orthogonal, C = colinear, N = generic), then the shift relation.
struct Scenario {
  std::string name;
  Vector a;
  TreatmentContrast contrast;
  NegativeControlSpec nc;
  std::string expected;  // qualitative behavior of the refined region
};

// The nine-case battery over the built-in generator.
std::vector<Scenario> benchmark_scenarios(const TrueModel& truth);

}  // namespace facsens

#endif  // FACSENS_SIMULATION_HPP
