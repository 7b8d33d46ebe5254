#ifndef FACSENS_NCNUMERIC_HPP
#define FACSENS_NCNUMERIC_HPP

#include <vector>

#include "facsens/bounds.hpp"
#include "facsens/estimation.hpp"
#include "facsens/negcontrol.hpp"
#include "facsens/numlin.hpp"

namespace facsens {

// Constraint-fit objective for a candidate bias value: squared distance of
// the rotated estimand bias from the target plus the squared residuals of
// every control constraint.  Minimized over the orthogonal group.
double nc_objective(const Matrix& R, const RowVector& ga,
                    const std::vector<RowVector>& gb, const Vector& s,
                    const std::vector<Matrix>& M,
                    const std::vector<RowVector>& observed_bias,
                    double target_bias);

Matrix nc_gradient(const Matrix& R, const RowVector& ga,
                   const std::vector<RowVector>& gb, const Vector& s,
                   const std::vector<Matrix>& M,
                   const std::vector<RowVector>& observed_bias,
                   double target_bias);

struct SweepConfig {
  int grid_size = 401;  // candidate bias values, uniform over the bound
  // Feasibility tolerance on squared residuals.  Non-positive selects the
  // scaled default (max(1e-3, 5/sqrt(n)) * bound)^2 using sample_size.
  double delta = -1.0;
  long sample_size = 0;  // rows behind the fitted model; 0 = population
  int restarts = 5;      // random restarts when the warm start stalls
  unsigned long long seed = 20260816ULL;
  StiefelOptions optimizer;
};

struct SweepPoint {
  double u = 0.0;            // grid coordinate in [-1, 1]
  double target_bias = 0.0;  // u * bound
  double objective = 0.0;    // minimized total objective
  double res1 = 0.0;         // squared estimand-bias mismatch at the optimum
  double res2_mean = 0.0;    // mean squared control residual at the optimum
  bool accepted = false;
  bool bridged = false;  // accepted only by the isolated-gap rule
};

struct ThetaRegion {
  std::vector<SweepPoint> grid;
  std::vector<double> feasible_cos;  // accepted grid coordinates, ascending
  std::vector<double> bias_values;   // bound * feasible_cos, elementwise
  BiasRegion bias_region;            // numeric kind, bias frame
  double bound = 0.0;
  double delta = 0.0;
  bool any_bridged = false;
};

// Sweep candidate bias values across [-bound, bound], minimizing the
// constraint objective at each point with warm starts carried along the
// grid, and return the feasible set as a union of intervals.
ThetaRegion sweep_theta(const NCArtifacts& artifacts,
                        const OutcomeFactorModel& outcome,
                        const SweepConfig& cfg = {});

// Map a feasible bias region to the effect scale: effect = naive - bias.
BiasRegion region_to_pate(const ThetaRegion& region, double naive_value);

// Default feasibility tolerance for a given bound and sample size.
double default_sweep_delta(double bound, long sample_size);

}  // namespace facsens

#endif  // FACSENS_NCNUMERIC_HPP
