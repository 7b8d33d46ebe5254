#include "facsens/ncnumeric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "facsens/errors.hpp"

namespace facsens {

double nc_objective(const Matrix& R, const RowVector& ga,
                    const std::vector<RowVector>& gb, const Vector& s,
                    const std::vector<Matrix>& M,
                    const std::vector<RowVector>& observed_bias,
                    double target_bias) {
  const double mismatch = ga * R * s - target_bias;
  double value = mismatch * mismatch;
  for (std::size_t j = 0; j < gb.size(); ++j) {
    value += (gb[j] * R * M[j] - observed_bias[j]).squaredNorm();
  }
  return value;
}

Matrix nc_gradient(const Matrix& R, const RowVector& ga,
                   const std::vector<RowVector>& gb, const Vector& s,
                   const std::vector<Matrix>& M,
                   const std::vector<RowVector>& observed_bias,
                   double target_bias) {
  const double mismatch = ga * R * s - target_bias;
  Matrix grad = 2.0 * mismatch * ga.transpose() * s.transpose();
  for (std::size_t j = 0; j < gb.size(); ++j) {
    const RowVector resid = gb[j] * R * M[j] - observed_bias[j];
    grad.noalias() += 2.0 * gb[j].transpose() * resid * M[j].transpose();
  }
  return grad;
}

double default_sweep_delta(double bound, long sample_size) {
  double coef = 1e-3;
  if (sample_size > 0) {
    coef = std::max(coef, 5.0 / std::sqrt(static_cast<double>(sample_size)));
  }
  const double d = coef * bound;
  return std::max(d * d, 1e-18);
}

namespace {

struct PointFit {
  Matrix R;
  double objective = 0.0;
  double res1 = 0.0;
  double res2_mean = 0.0;
};

}  // namespace

ThetaRegion sweep_theta(const NCArtifacts& artifacts,
                        const OutcomeFactorModel& outcome,
                        const SweepConfig& cfg) {
  const int m = artifacts.m();
  const int J = artifacts.J();
  if (outcome.m() != m) {
    throw DimensionMismatch("sweep_theta: outcome model has " +
                            std::to_string(outcome.m()) +
                            " factors but the artifacts were built with " +
                            std::to_string(m));
  }
  if (cfg.grid_size < 3) {
    throw Error("sweep_theta: grid_size must be at least 3");
  }
  if (cfg.restarts < 1) {
    throw Error("sweep_theta: at least one restart is required");
  }

  const RowVector ga = artifacts.a.transpose() * outcome.Gamma;
  std::vector<RowVector> gb(J);
  for (int j = 0; j < J; ++j) {
    gb[j] = outcome.Gamma.row(artifacts.nc_outcomes[j]);
  }
  const Vector& s = artifacts.s;
  const double bound = ga.norm() * s.norm();
  const double delta =
      cfg.delta > 0.0 ? cfg.delta : default_sweep_delta(bound, cfg.sample_size);
  // Restart trigger independent of the acceptance tolerance, so the set of
  // minimized objectives (and hence the region) is identical across delta.
  const double trigger = 1e-12 * std::max(1.0, bound * bound);

  const int G = cfg.grid_size;
  ThetaRegion out;
  out.bound = bound;
  out.delta = delta;
  out.grid.resize(G);

  auto evaluate = [&](const Matrix& R, double target) {
    PointFit fit;
    fit.R = R;
    const double mismatch = ga * R * s - target;
    fit.res1 = mismatch * mismatch;
    double res2_total = 0.0;
    for (int j = 0; j < J; ++j) {
      res2_total += (gb[j] * R * artifacts.M[j] - artifacts.observed_bias[j])
                        .squaredNorm();
    }
    fit.res2_mean = J > 0 ? res2_total / J : 0.0;
    fit.objective = fit.res1 + res2_total;
    return fit;
  };

  // Two-reflection construction for a rotation with ga * R * s exactly
  // equal to u * bound: map s-hat to the first axis, tilt by acos(u)
  // inside the (e1, e2) plane, then map the first axis onto ga-hat.  It
  // seeds every grid point on the estimand-constraint manifold, which a
  // plain descent cannot reach from far away at the band endpoints (the
  // objective is quartic-flat there).
  const bool aligned_ok = m >= 2 && ga.norm() > 1e-300 && s.norm() > 1e-300;
  Matrix Hx, Hy, Dsign;
  if (aligned_ok) {
    auto householder_to_e1 = [m](const Vector& w, double& sign) {
      Vector v = w.normalized();
      sign = v(0) >= 0.0 ? -1.0 : 1.0;  // H maps w-hat to sign * e1
      v(0) -= sign;
      const double nn = v.squaredNorm();
      Matrix H = Matrix::Identity(m, m);
      if (nn > 1e-300) H -= (2.0 / nn) * (v * v.transpose());
      return H;
    };
    double s1 = 0.0, s2 = 0.0;
    Hx = householder_to_e1(s, s1);
    Hy = householder_to_e1(ga.transpose(), s2);
    Dsign = Matrix::Identity(m, m);
    Dsign(0, 0) = s1 * s2;
  }

  Matrix warm = Matrix::Identity(m, m);
  for (int i = 0; i < G; ++i) {
    const double u = -1.0 + 2.0 * i / (G - 1);
    const double target = u * bound;

    auto f = [&](const Matrix& R) {
      return nc_objective(R, ga, gb, s, artifacts.M, artifacts.observed_bias,
                          target);
    };
    auto g = [&](const Matrix& R) {
      return nc_gradient(R, ga, gb, s, artifacts.M, artifacts.observed_bias,
                         target);
    };

    PointFit best;
    bool have_best = false;
    auto try_start = [&](const Matrix& start) {
      StiefelResult r = stiefel_minimize(f, g, start, cfg.optimizer);
      PointFit fit = evaluate(r.minimizer, target);
      if (!have_best || fit.objective < best.objective) {
        best = std::move(fit);
        have_best = true;
      }
    };

    try_start(warm);
    if (i == 0 && m >= 1) {
      // Cover both connected components of the orthogonal group up front.
      Matrix flip = Matrix::Identity(m, m);
      flip(m - 1, m - 1) = -1.0;
      try_start(flip);
    }
    if (best.objective > trigger && aligned_ok) {
      const double phi = std::acos(std::clamp(u, -1.0, 1.0));
      Matrix Gphi = Matrix::Identity(m, m);
      Gphi(0, 0) = std::cos(phi);
      Gphi(1, 1) = std::cos(phi);
      Gphi(0, 1) = -std::sin(phi);
      Gphi(1, 0) = std::sin(phi);
      try_start(Hy * Gphi * Dsign * Hx);
    }
    if (best.objective > trigger && cfg.restarts > 0) {
      Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (i + 1));
      for (int r = 0; r < cfg.restarts; ++r) {
        try_start(random_orthogonal(m, rng));
        if (best.objective <= trigger) break;
      }
    }

    SweepPoint& pt = out.grid[i];
    pt.u = u;
    pt.target_bias = target;
    pt.objective = best.objective;
    pt.res1 = best.res1;
    pt.res2_mean = best.res2_mean;
    pt.accepted = best.res1 <= delta && best.res2_mean <= delta;
    warm = best.R;  // chain the best minimizer regardless of acceptance
  }

  // Bridge isolated one-point gaps whose fit is only marginally worse than
  // the tolerance; judged against the original acceptance mask.
  std::vector<char> base(G);
  for (int i = 0; i < G; ++i) base[i] = out.grid[i].accepted ? 1 : 0;
  for (int i = 1; i + 1 < G; ++i) {
    if (!base[i] && base[i - 1] && base[i + 1] &&
        out.grid[i].objective <= 4.0 * delta) {
      out.grid[i].accepted = true;
      out.grid[i].bridged = true;
      out.any_bridged = true;
    }
  }

  for (const SweepPoint& pt : out.grid) {
    if (pt.accepted) {
      out.feasible_cos.push_back(pt.u);
      out.bias_values.push_back(pt.target_bias);
    }
  }

  out.bias_region.kind = BiasRegion::Kind::numeric_nc;
  out.bias_region.quantity = BiasRegion::Quantity::bias;
  int i = 0;
  while (i < G) {
    if (!out.grid[i].accepted) {
      ++i;
      continue;
    }
    int jend = i;
    while (jend + 1 < G && out.grid[jend + 1].accepted) ++jend;
    out.bias_region.intervals.push_back(
        {out.grid[i].target_bias, out.grid[jend].target_bias});
    i = jend + 1;
  }
  if (out.bias_region.intervals.empty()) {
    std::ostringstream msg;
    msg << "sweep_theta: no candidate bias value is feasible at tolerance "
        << delta << "; the controls may contradict the factor structure "
        << "(try a larger tolerance)";
    throw EmptyRegion(msg.str());
  }
  out.bias_region.validate();
  return out;
}

BiasRegion region_to_pate(const ThetaRegion& region, double naive_value) {
  return pate_region_from_bias(region.bias_region, naive_value);
}

}  // namespace facsens
