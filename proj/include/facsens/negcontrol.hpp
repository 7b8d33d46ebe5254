#ifndef FACSENS_NEGCONTROL_HPP
#define FACSENS_NEGCONTROL_HPP

#include <string>
#include <vector>

#include "facsens/bounds.hpp"
#include "facsens/confounder.hpp"
#include "facsens/estimation.hpp"

namespace facsens {

// One negative-control outcome (index into the outcome vector, so the
// probe direction is a coordinate vector) with the treatment contrasts
// whose effect on it is known to be zero.
struct NcEntry {
  int outcome = 0;  // zero-based outcome index
  std::vector<TreatmentContrast> contrasts;
};

struct NegativeControlSpec {
  std::vector<NcEntry> entries;

  int J() const { return static_cast<int>(entries.size()); }
  // Throws unless every entry names a distinct valid outcome and has at
  // least one contrast of consistent length.  With require_nonempty, an
  // empty list is also rejected; with check_independence, each entry's
  // (t1 - t2) vectors must be linearly independent (the strict form used
  // for user-supplied configurations; internal callers tolerate degenerate
  // contrasts, which the pseudoinverse machinery handles).
  void validate(int q, bool require_nonempty = true,
                bool check_independence = false) const;
};

// Everything the interval constructions need, precomputed once: the
// estimand direction and scaled shift, per-control observed effects and
// shift matrices, and the Gram blocks of the relevant loading rows.
struct NCArtifacts {
  Vector a;   // estimand direction over outcomes (length q)
  Vector s;   // scaled mean shift of the estimand contrast (length m)
  double K_aa = 0.0;  // |a' Gamma|^2
  Vector K_ab;        // J entries a' Gamma Gamma' b_j
  Matrix K_bb;        // J x J Gram of the control rows of Gamma
  std::vector<int> nc_outcomes;          // b_j = e_{nc_outcomes[j]}
  std::vector<Matrix> G_check;           // q x c_j observed-effect columns
  std::vector<Matrix> M;                 // m x c_j scaled shift matrices
  std::vector<Matrix> M_pinv;            // cached pseudoinverses, c_j x m
  std::vector<RowVector> observed_bias;  // b_j' G_check_j, 1 x c_j

  int J() const { return static_cast<int>(nc_outcomes.size()); }
  int m() const { return static_cast<int>(s.size()); }
};

// Assemble NCArtifacts from a control spec, a fitted (or true) outcome
// model, the conditional confounder law, and the estimand (a, contrast).
NCArtifacts build_nc_artifacts(const NegativeControlSpec& spec,
                               const OutcomeFactorModel& outcome,
                               const ConfounderConditional& cond,
                               const Vector& a,
                               const TreatmentContrast& contrast);

// Per-control Penrose compatibility of the observed effects with the
// factor structure: the observed bias row must lie in the row space of
// the shift matrix (relative tolerance; a zero row is compatible).
std::vector<bool> compatibility_check(const NCArtifacts& artifacts,
                                      double tol = 1e-6);

struct NcIntervalOptions {
  double compat_tol = 1e-6;
  // Incompatible controls are projected onto the feasible row space and
  // flagged, unless strict mode asks for a throw instead.
  bool strict_compatibility = false;
  double eps_col = 1e-8;      // colinearity slack in the point-ID rule
  double kbb_cond_cap = 1e10; // condition-number cap on K_bb
};

// The closed-form interval, intersected with the worst-case band
// [-sqrt(K_aa)*||s||, +sqrt(K_aa)*||s||] so the refinement never reports a
// region wider than the bound it refines.  center/half_width describe the
// clamped interval.
struct AnalyticInterval {
  BiasRegion region;  // bias frame, single interval
  double center = 0.0;
  double half_width = 0.0;
  bool compat_projected = false;  // some control needed projection
};

// Closed-form bias interval from control j alone.
AnalyticInterval nc_interval_single(const NCArtifacts& artifacts, int j,
                                    const NcIntervalOptions& opts = {});

// Closed-form bias interval pooling all J controls; requires J < m.
AnalyticInterval nc_interval_multiple(const NCArtifacts& artifacts,
                                      const NcIntervalOptions& opts = {});

struct PointIdResult {
  bool flag = false;
  std::string reason;
};

// Structural rule: some control has a full-rank shift matrix and its
// loading row is colinear with the estimand row (or is the estimand).
PointIdResult detect_point_identification(const NCArtifacts& artifacts,
                                          const NcIntervalOptions& opts = {});

struct PointIdScreenOptions {
  double eps_col = 5e-4;     // squared-cosine slack for estimated loadings
  double eps_shift = 0.05;   // relative residual of s outside span(M_j)
};

// Estimation-aware variant of the rule above: accepts near-colinear
// loading rows and estimand shifts nearly inside the control shift span,
// so sampling noise cannot hide a structurally identified case.
PointIdResult point_identification_screen(
    const NCArtifacts& artifacts, const PointIdScreenOptions& opts = {});

}  // namespace facsens

#endif  // FACSENS_NEGCONTROL_HPP
