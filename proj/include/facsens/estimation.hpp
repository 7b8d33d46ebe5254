#ifndef FACSENS_ESTIMATION_HPP
#define FACSENS_ESTIMATION_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "facsens/confounder.hpp"
#include "facsens/numlin.hpp"

namespace facsens {

// An observed sample: one row per unit.
struct Dataset {
  Matrix T;  // n x k treatments
  Matrix Y;  // n x q outcomes

  int n() const { return static_cast<int>(T.rows()); }
  int k() const { return static_cast<int>(T.cols()); }
  int q() const { return static_cast<int>(Y.cols()); }

  // Throws unless both blocks have the same number of rows, every entry
  // is finite, n exceeds max(k, q), and every column varies.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Maximum-likelihood factor analysis of a correlation matrix.

struct FaOptions {
  int max_iters = 2000;
  double tol = 1e-9;              // absolute change in the ML discrepancy
  double min_uniqueness = 0.005;  // lower clamp (Heywood guard)
};

struct FactorFit {
  Matrix loadings_std;   // p x m loadings on the correlation scale
  Vector uniquenesses;   // p, clamped to [min_uniqueness, 1]
  double discrepancy = 0.0;  // log det(Sigma) + tr(Sigma^{-1} S), at the fit
  int m = 0;
  int iterations = 0;
  bool converged = false;
  bool heywood = false;  // some uniqueness hit the lower clamp
};

// Largest m for which a p-variable factor model has non-negative degrees
// of freedom: (p - m)^2 >= p + m.
int max_admissible_factors(int p);

// Fit an m-factor model to a correlation matrix.  Alternates the exact
// conditional update of the loadings given the uniquenesses (top-m
// eigenpairs of the uniqueness-whitened matrix) with the diagonal
// residual update of the uniquenesses, tracking the Gaussian ML
// discrepancy until it stabilizes.  Throws NonConvergence if the
// iteration cap is reached first.
FactorFit ml_factor_analysis(const Matrix& corr, int m,
                             const FaOptions& opts = {});

// Sample correlation matrix (unit diagonal, n - 1 denominator).
Matrix sample_correlation(const Matrix& data);

// ---------------------------------------------------------------------------
// Flexible regression of the outcomes on the treatments.

enum class RegressMethod {
  hinge,  // forward-stagewise hinge basis with GCV pruning (default)
  poly2,  // full degree-2 polynomial basis with a small ridge penalty
};

struct RegressOptions {
  RegressMethod method = RegressMethod::hinge;
  int knots_per_treatment = 5;   // placed at evenly spaced quantiles
  int max_terms = 30;            // per outcome, including the intercept
  double gcv_penalty = 3.0;      // cost per extra term in the GCV score
  double min_improve_rel = 1e-7; // stop when gains fall below this x TSS
  int selection_subsample = 10000;  // rows used for structure search
  double ridge = 1e-6;           // poly2 only, on standardized columns
};

// One hinge function max(0, sign * (t[var] - knot)).
struct HingeTerm {
  int var = 0;
  double knot = 0.0;
  int sign = +1;
};

// A basis term: the intercept, a hinge, or a product of two hinges.
struct BasisTerm {
  enum Kind { intercept, hinge, product } kind = intercept;
  HingeTerm h1, h2;  // h2 used only by products

  double eval(const Vector& t) const;
};

// A fitted outcome surface: per-outcome additive models over the shared
// hinge/product (or polynomial) basis.
class ResponseSurface {
 public:
  struct OutcomeModel {
    std::vector<BasisTerm> terms;
    Vector coefs;
  };

  // Empty surface; usable only as a target for assignment.
  ResponseSurface() = default;
  // Hinge-basis surface.
  ResponseSurface(std::vector<OutcomeModel> models, int k);
  // Polynomial surface: coefficient matrix over the fixed degree-2 basis
  // evaluated on standardized inputs.
  ResponseSurface(Matrix poly_coefs, Vector centers, Vector scales, int k);

  Vector predict(const Vector& t) const;      // q-vector
  Matrix predict_rows(const Matrix& T) const; // n x q

  int k() const { return k_; }
  int q() const;
  int dropped_collinear() const { return dropped_collinear_; }
  void set_dropped_collinear(int c) { dropped_collinear_ = c; }

 private:
  bool poly_ = false;
  std::vector<OutcomeModel> models_;
  Matrix poly_coefs_;
  Vector centers_, scales_;
  int k_ = 0;
  int dropped_collinear_ = 0;
};

// Fit the observed outcome surface, one outcome at a time over a basis
// shared across outcomes.  Deterministic and invariant to row order.
ResponseSurface fit_g_check(const Dataset& data,
                            const RegressOptions& opts = {});

// ---------------------------------------------------------------------------
// Treatment- and outcome-side factor models fitted from data.

struct TreatmentModelFit {
  TreatmentFactorModel model;
  FactorFit fa;
};

// Factor-analyze the treatment correlation matrix and rescale the
// loadings to the covariance scale; the noise variance is the average
// of uniqueness x marginal variance across treatments.
TreatmentModelFit fit_treatment_model(const Dataset& data, int m,
                                      const FaOptions& fa_opts = {});

// Outcome-side factor model on the regression residuals Y - g_check(T).
struct OutcomeFactorModel {
  Matrix Gamma;                  // q x m, covariance scale
  double sigma2_y_given_tu = 0;  // outcome noise variance
  std::function<Vector(const Vector&)> g_check;  // observed surface
  Matrix residual_cov;           // q x q sample covariance of residuals

  int q() const { return static_cast<int>(Gamma.rows()); }
  int m() const { return static_cast<int>(Gamma.cols()); }
};

struct OutcomeModelFit {
  OutcomeFactorModel model;
  FactorFit fa;
  ResponseSurface surface;
};

OutcomeModelFit fit_outcome_model(const Dataset& data, int m,
                                  const RegressOptions& regress_opts = {},
                                  const FaOptions& fa_opts = {});

// ---------------------------------------------------------------------------
// Choosing the number of factors.

enum class FactorCountMethod { eigen_gt1, parallel, bic };

// Parse "eigen" / "parallel" / "bic"; anything else throws
// UnsupportedMethod (including methods other toolkits offer).
FactorCountMethod parse_factor_count_method(const std::string& name);

struct FactorCountResult {
  int selected = 0;  // after clamping
  int raw = 0;       // what the rule itself produced
  bool clamped = false;
  Vector eigenvalues;  // of the sample correlation, descending
};

// Method on a data matrix: eigenvalue-greater-than-one count, Horn
// parallel analysis against 100 seeded Gaussian datasets of the same
// shape, or BIC over candidate m.  Results above the admissible maximum
// are clamped (flagged).
FactorCountResult select_num_factors(const Matrix& data,
                                     FactorCountMethod method,
                                     std::uint64_t seed = 0);

// Same rules driven by a correlation matrix plus the sample size.
FactorCountResult select_num_factors_corr(const Matrix& corr, int n,
                                          FactorCountMethod method,
                                          std::uint64_t seed = 0);

}  // namespace facsens

#endif  // FACSENS_ESTIMATION_HPP
