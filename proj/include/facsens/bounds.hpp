#ifndef FACSENS_BOUNDS_HPP
#define FACSENS_BOUNDS_HPP

#include <vector>

#include "facsens/confounder.hpp"
#include "facsens/estimation.hpp"
#include "facsens/numlin.hpp"

namespace facsens {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

// A partial-identification region: one or more disjoint intervals for
// either the confounding bias or the average treatment effect itself.
struct BiasRegion {
  enum class Kind { no_nc, analytic_nc, numeric_nc };
  enum class Quantity { bias, pate };

  Kind kind = Kind::no_nc;
  Quantity quantity = Quantity::bias;
  std::vector<Interval> intervals;  // sorted, pairwise disjoint

  double total_width() const;
  double lo() const { return intervals.front().lo; }
  double hi() const { return intervals.back().hi; }
  bool contains(double x, double tol = 0.0) const;
  void validate() const;

  // Shift between the bias frame and the effect frame.
  BiasRegion shifted(double offset, Quantity new_quantity) const;
};

// Worst-case confounding bias |a' Gamma| x |scaled mean shift| for the
// effect of moving treatments from contrast.t2 to contrast.t1 on a'Y.
double bias_bound(const OutcomeFactorModel& outcome,
                  const ConfounderConditional& cond,
                  const Vector& a, const TreatmentContrast& contrast);

// Effect implied by the observed outcome surface alone.
double naive_effect(const OutcomeFactorModel& outcome, const Vector& a,
                    const TreatmentContrast& contrast);

// [naive - bound, naive + bound] in the effect frame.
BiasRegion partial_id_region(double naive, double bound);

// Share of the conditional outcome variance along `a` that the latent
// confounder explains.
double partial_r2_outcome(const OutcomeFactorModel& outcome, const Vector& a);

// Share of the treatment variance along `d` that the confounder explains.
double partial_r2_treatment(const TreatmentFactorModel& treatment,
                            const Vector& d);

// Map a bias-frame region to the effect scale via effect = naive - bias
// (reflecting each interval), keeping the construction kind.
BiasRegion pate_region_from_bias(const BiasRegion& bias_region,
                                 double naive_value);

}  // namespace facsens

#endif  // FACSENS_BOUNDS_HPP
