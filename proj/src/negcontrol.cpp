#include "facsens/negcontrol.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "facsens/errors.hpp"
#include "facsens/numlin.hpp"

namespace facsens {

void NegativeControlSpec::validate(int q, bool require_nonempty,
                                   bool check_independence) const {
  if (require_nonempty && entries.empty()) {
    throw DegenerateNC("negative-control spec: no controls given");
  }
  std::vector<int> seen;
  for (std::size_t j = 0; j < entries.size(); ++j) {
    const NcEntry& e = entries[j];
    if (e.outcome < 0 || e.outcome >= q) {
      std::ostringstream msg;
      msg << "negative-control spec: control " << j + 1 << " names outcome "
          << e.outcome + 1 << " but the model has " << q << " outcomes";
      throw DimensionMismatch(msg.str());
    }
    for (int other : seen) {
      if (other == e.outcome) {
        throw DegenerateNC(
            "negative-control spec: outcome " + std::to_string(e.outcome + 1) +
            " appears twice; merge its contrasts into one entry");
      }
    }
    seen.push_back(e.outcome);
    if (e.contrasts.empty()) {
      std::ostringstream msg;
      msg << "negative-control spec: control " << j + 1 << " has no contrasts";
      throw DegenerateNC(msg.str());
    }
    const Eigen::Index k = e.contrasts.front().t1.size();
    Matrix D(k, static_cast<Eigen::Index>(e.contrasts.size()));
    for (std::size_t i = 0; i < e.contrasts.size(); ++i) {
      const TreatmentContrast& c = e.contrasts[i];
      if (c.t1.size() != k || c.t2.size() != k) {
        throw DimensionMismatch("negative-control spec: control " +
                                std::to_string(j + 1) +
                                " mixes treatment vector lengths");
      }
      D.col(static_cast<Eigen::Index>(i)) = c.t1 - c.t2;
    }
    if (check_independence) {
      Eigen::JacobiSVD<Matrix> svd(D);
      const auto& sv = svd.singularValues();
      if (sv(0) <= 0.0 || sv(sv.size() - 1) <= 1e-10 * sv(0) ||
          D.cols() > D.rows()) {
        throw DegenerateNC("negative-control spec: control " +
                           std::to_string(j + 1) +
                           " has linearly dependent treatment contrasts");
      }
    }
  }
}

NCArtifacts build_nc_artifacts(const NegativeControlSpec& spec,
                               const OutcomeFactorModel& outcome,
                               const ConfounderConditional& cond,
                               const Vector& a,
                               const TreatmentContrast& contrast) {
  const int q = outcome.q();
  spec.validate(q, /*require_nonempty=*/false);
  if (a.size() != q) {
    throw DimensionMismatch("build_nc_artifacts: direction length " +
                            std::to_string(a.size()) + " but model has " +
                            std::to_string(q) + " outcomes");
  }
  if (!outcome.g_check) {
    throw Error("build_nc_artifacts: outcome model has no response surface");
  }

  NCArtifacts art;
  art.a = a;
  art.s = scaled_mean_shift(cond, contrast);
  const RowVector aG = a.transpose() * outcome.Gamma;
  art.K_aa = aG.squaredNorm();

  const int J = spec.J();
  art.K_ab.resize(J);
  art.K_bb.resize(J, J);
  art.nc_outcomes.reserve(J);
  art.G_check.reserve(J);
  art.M.reserve(J);
  art.M_pinv.reserve(J);
  art.observed_bias.reserve(J);

  for (int j = 0; j < J; ++j) {
    const NcEntry& e = spec.entries[j];
    const int c = static_cast<int>(e.contrasts.size());
    Matrix G(q, c);
    for (int i = 0; i < c; ++i) {
      G.col(i) = outcome.g_check(e.contrasts[i].t1) -
                 outcome.g_check(e.contrasts[i].t2);
    }
    Matrix M = shift_matrix_for_contrasts(cond, e.contrasts);
    art.nc_outcomes.push_back(e.outcome);
    art.observed_bias.push_back(G.row(e.outcome));
    art.G_check.push_back(std::move(G));
    art.M_pinv.push_back(pseudoinverse(M));
    art.M.push_back(std::move(M));

    const RowVector bG = outcome.Gamma.row(e.outcome);
    art.K_ab(j) = aG.dot(bG);
    for (int i = 0; i <= j; ++i) {
      const double v = bG.dot(outcome.Gamma.row(art.nc_outcomes[i]));
      art.K_bb(j, i) = v;
      art.K_bb(i, j) = v;
    }
  }
  if (J > 0) {
    const double scale =
        std::max({1.0, art.K_aa, art.K_bb.diagonal().maxCoeff()});
    for (int j = 0; j < J; ++j) {
      if (art.K_bb(j, j) <= 1e-12 * scale) {
        throw DegenerateNC("build_nc_artifacts: control outcome " +
                           std::to_string(art.nc_outcomes[j] + 1) +
                           " has a (near-)zero loading row and carries no "
                           "confounding signal");
      }
    }
  }
  return art;
}

std::vector<bool> compatibility_check(const NCArtifacts& artifacts,
                                      double tol) {
  std::vector<bool> ok(artifacts.J(), true);
  for (int j = 0; j < artifacts.J(); ++j) {
    const RowVector& ob = artifacts.observed_bias[j];
    const double scale = ob.norm();
    if (scale == 0.0) continue;  // a zero row is trivially representable
    const RowVector fitted = (ob * artifacts.M_pinv[j]) * artifacts.M[j];
    ok[j] = (ob - fitted).norm() <= tol * scale;
  }
  return ok;
}

namespace {

bool is_unit_vector_at(const Vector& a, int idx) {
  for (int i = 0; i < a.size(); ++i) {
    const double want = (i == idx) ? 1.0 : 0.0;
    if (a(i) != want) return false;
  }
  return true;
}

// Shared closed-form construction over a subset of controls.  The J = 1
// public path passes a singleton subset, so the two entry points agree
// bit-for-bit on one control.
AnalyticInterval analytic_core(const NCArtifacts& art,
                               const std::vector<int>& js,
                               const NcIntervalOptions& opts) {
  const int Jsub = static_cast<int>(js.size());
  if (Jsub == 0) throw DegenerateNC("analytic interval: empty control set");

  Vector Kab(Jsub);
  Matrix Kbb(Jsub, Jsub);
  for (int r = 0; r < Jsub; ++r) {
    Kab(r) = art.K_ab(js[r]);
    for (int c = 0; c < Jsub; ++c) Kbb(r, c) = art.K_bb(js[r], js[c]);
  }

  const double scale =
      std::max({1.0, art.K_aa, Kbb.diagonal().maxCoeff()});
  for (int r = 0; r < Jsub; ++r) {
    if (Kbb(r, r) <= 1e-12 * scale) {
      throw DegenerateNC("analytic interval: control outcome " +
                         std::to_string(art.nc_outcomes[js[r]] + 1) +
                         " has a (near-)zero loading row");
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Kbb);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin <= 0.0 || lmax / lmin > opts.kbb_cond_cap) {
    throw SingularKbb(
        "analytic interval: control loading Gram matrix is singular "
        "(condition number above " +
        std::to_string(opts.kbb_cond_cap) + ")");
  }

  const std::vector<bool> ok = compatibility_check(art, opts.compat_tol);
  bool projected = false;
  for (int r = 0; r < Jsub; ++r) {
    if (!ok[js[r]]) {
      if (opts.strict_compatibility) {
        throw IncompatibleNC(
            "analytic interval: observed effects of control outcome " +
            std::to_string(art.nc_outcomes[js[r]] + 1) +
            " are not representable by its shift matrix");
      }
      projected = true;  // proceed with the least-squares representation
    }
  }

  // Row r of the combination weights: Kab' Kbb^{-1}.
  const RowVector Kstar = Kbb.ldlt().solve(Kab).transpose();

  const double s_norm = art.s.norm();
  double center = 0.0;
  double width = 0.0;
  for (int r = 0; r < Jsub; ++r) {
    const int j = js[r];
    const RowVector d = art.observed_bias[j] * art.M_pinv[j];
    center += Kstar(r) * d.dot(art.s);
    const double slack = std::max(0.0, Kbb(r, r) - d.squaredNorm());
    const Vector resid = art.s - art.M[j] * (art.M_pinv[j] * art.s);
    width += std::abs(Kstar(r)) * std::sqrt(slack) * resid.norm();
  }

  // The unexplained part of the estimand loading row.  When the estimand
  // is itself the (single) control outcome, the direction is fully pinned
  // and this term vanishes identically.
  const bool a_is_control =
      Jsub == 1 && is_unit_vector_at(art.a, art.nc_outcomes[js[0]]);
  if (!a_is_control) {
    const double explained = Kstar * Kbb * Kstar.transpose();
    width += std::sqrt(std::max(0.0, art.K_aa - explained)) * s_norm;
  }

  // The closed form and the worst-case band are both valid bias regions,
  // so their intersection is one as well.  Clamping keeps the refinement
  // nested inside the band even where the triangle-inequality width is
  // conservative (pooled near-colinear controls can inflate it past the
  // band).
  const double cap = std::sqrt(art.K_aa) * s_norm;
  double lo = std::max(center - width, -cap);
  double hi = std::min(center + width, cap);
  if (lo > hi) lo = hi = (center > 0.0 ? cap : -cap);

  AnalyticInterval out;
  out.center = 0.5 * (lo + hi);
  out.half_width = 0.5 * (hi - lo);
  out.compat_projected = projected;
  out.region.kind = BiasRegion::Kind::analytic_nc;
  out.region.quantity = BiasRegion::Quantity::bias;
  out.region.intervals = {{lo, hi}};
  out.region.validate();
  return out;
}

}  // namespace

AnalyticInterval nc_interval_single(const NCArtifacts& artifacts, int j,
                                    const NcIntervalOptions& opts) {
  if (j < 0 || j >= artifacts.J()) {
    throw DimensionMismatch("nc_interval_single: control index " +
                            std::to_string(j) + " out of range [0, " +
                            std::to_string(artifacts.J()) + ")");
  }
  return analytic_core(artifacts, {j}, opts);
}

AnalyticInterval nc_interval_multiple(const NCArtifacts& artifacts,
                                      const NcIntervalOptions& opts) {
  const int J = artifacts.J();
  if (J == 0) throw DegenerateNC("nc_interval_multiple: no controls given");
  if (J >= artifacts.m()) {
    throw JTooLarge("nc_interval_multiple: " + std::to_string(J) +
                    " controls with only " + std::to_string(artifacts.m()) +
                    " factors; the pooled construction needs J < m");
  }
  std::vector<int> js(J);
  for (int j = 0; j < J; ++j) js[j] = j;
  return analytic_core(artifacts, js, opts);
}

namespace {

int matrix_rank(const Matrix& M, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

}  // namespace

PointIdResult detect_point_identification(const NCArtifacts& artifacts,
                                          const NcIntervalOptions& opts) {
  for (int j = 0; j < artifacts.J(); ++j) {
    if (matrix_rank(artifacts.M[j]) != artifacts.m()) continue;
    const int b = artifacts.nc_outcomes[j];
    if (is_unit_vector_at(artifacts.a, b)) {
      return {true, "control outcome " + std::to_string(b + 1) +
                        " is the estimand outcome and its shift matrix has "
                        "full row rank"};
    }
    const double kab2 = artifacts.K_ab(j) * artifacts.K_ab(j);
    const double prod = artifacts.K_aa * artifacts.K_bb(j, j);
    if (prod > 0.0 && kab2 >= (1.0 - opts.eps_col) * prod) {
      return {true, "control outcome " + std::to_string(b + 1) +
                        " has a loading row colinear with the estimand row "
                        "and a full-row-rank shift matrix"};
    }
  }
  return {false, ""};
}

PointIdResult point_identification_screen(const NCArtifacts& artifacts,
                                          const PointIdScreenOptions& opts) {
  const double s_norm = artifacts.s.norm();
  for (int j = 0; j < artifacts.J(); ++j) {
    const int b = artifacts.nc_outcomes[j];

    bool colinear = is_unit_vector_at(artifacts.a, b);
    if (!colinear) {
      const double kab2 = artifacts.K_ab(j) * artifacts.K_ab(j);
      const double prod = artifacts.K_aa * artifacts.K_bb(j, j);
      colinear = prod > 0.0 && kab2 >= (1.0 - opts.eps_col) * prod;
    }
    if (!colinear) continue;

    bool shift_covered = matrix_rank(artifacts.M[j]) == artifacts.m();
    if (!shift_covered && s_norm > 0.0) {
      const Vector resid =
          artifacts.s - artifacts.M[j] * (artifacts.M_pinv[j] * artifacts.s);
      shift_covered = resid.norm() <= opts.eps_shift * s_norm;
    }
    if (shift_covered) {
      return {true, "control outcome " + std::to_string(b + 1) +
                        " pins the estimand loading row and its contrasts "
                        "cover the estimand shift"};
    }
  }
  return {false, ""};
}

}  // namespace facsens
