#include "facsens/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "facsens/errors.hpp"

namespace facsens {

double BiasRegion::total_width() const {
  double w = 0.0;
  for (const auto& iv : intervals) w += iv.width();
  return w;
}

bool BiasRegion::contains(double x, double tol) const {
  return std::any_of(intervals.begin(), intervals.end(), [&](const Interval& iv) {
    return x >= iv.lo - tol && x <= iv.hi + tol;
  });
}

void BiasRegion::validate() const {
  if (intervals.empty()) throw EmptyRegion("BiasRegion: no intervals");
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].hi < intervals[i].lo) {
      throw Error("BiasRegion: interval endpoints out of order");
    }
    if (i > 0 && intervals[i].lo <= intervals[i - 1].hi) {
      throw Error("BiasRegion: intervals overlap or are unsorted");
    }
  }
}

BiasRegion BiasRegion::shifted(double offset, Quantity new_quantity) const {
  BiasRegion out = *this;
  out.quantity = new_quantity;
  for (auto& iv : out.intervals) {
    iv.lo += offset;
    iv.hi += offset;
  }
  return out;
}

double bias_bound(const OutcomeFactorModel& outcome,
                  const ConfounderConditional& cond, const Vector& a,
                  const TreatmentContrast& contrast) {
  if (a.size() != outcome.Gamma.rows()) {
    throw DimensionMismatch("bias_bound: contrast vector length != outcomes");
  }
  if (outcome.Gamma.cols() != cond.coef.rows()) {
    throw DimensionMismatch("bias_bound: factor counts differ between models");
  }
  double ga = (a.transpose() * outcome.Gamma).norm();
  double shift = scaled_mean_shift(cond, contrast).norm();
  return ga * shift;
}

double naive_effect(const OutcomeFactorModel& outcome, const Vector& a,
                    const TreatmentContrast& contrast) {
  if (!outcome.g_check) {
    throw Error("naive_effect: outcome model carries no fitted surface");
  }
  Vector diff = outcome.g_check(contrast.t1) - outcome.g_check(contrast.t2);
  if (diff.size() != a.size()) {
    throw DimensionMismatch("naive_effect: surface output length != a");
  }
  return a.dot(diff);
}

BiasRegion partial_id_region(double naive, double bound) {
  if (bound < 0.0) throw Error("partial_id_region: negative bound");
  BiasRegion region;
  region.kind = BiasRegion::Kind::no_nc;
  region.quantity = BiasRegion::Quantity::pate;
  region.intervals = {Interval{naive - bound, naive + bound}};
  return region;
}

double partial_r2_outcome(const OutcomeFactorModel& outcome, const Vector& a) {
  if (a.size() != outcome.Gamma.rows()) {
    throw DimensionMismatch("partial_r2_outcome: a length != outcomes");
  }
  if (outcome.residual_cov.rows() != outcome.Gamma.rows()) {
    throw DimensionMismatch("partial_r2_outcome: residual covariance shape");
  }
  double denom = a.dot(outcome.residual_cov * a);
  double scale = outcome.residual_cov.diagonal().maxCoeff();
  if (denom <= 1e-12 * std::max(scale, 1.0)) {
    throw DegenerateDirection("partial_r2_outcome: no variance along a");
  }
  double numer = (a.transpose() * outcome.Gamma).squaredNorm();
  return std::clamp(numer / denom, 0.0, 1.0);
}

double partial_r2_treatment(const TreatmentFactorModel& treatment,
                            const Vector& d) {
  if (d.size() != treatment.B.rows()) {
    throw DimensionMismatch("partial_r2_treatment: d length != treatments");
  }
  double numer = (d.transpose() * treatment.B).squaredNorm();
  double denom = numer + treatment.sigma2_t_given_u * d.squaredNorm();
  if (denom <= 0.0) {
    throw DegenerateDirection("partial_r2_treatment: zero direction");
  }
  return std::clamp(numer / denom, 0.0, 1.0);
}

BiasRegion pate_region_from_bias(const BiasRegion& bias_region,
                                 double naive_value) {
  BiasRegion out;
  out.kind = bias_region.kind;
  out.quantity = BiasRegion::Quantity::pate;
  out.intervals.reserve(bias_region.intervals.size());
  // effect = naive - bias reverses interval order as well as endpoints.
  for (auto it = bias_region.intervals.rbegin();
       it != bias_region.intervals.rend(); ++it) {
    out.intervals.push_back({naive_value - it->hi, naive_value - it->lo});
  }
  out.validate();
  return out;
}

}  // namespace facsens
