#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "facsens/errors.hpp"
#include "facsens/estimation.hpp"

namespace facsens {

double BasisTerm::eval(const Vector& t) const {
  switch (kind) {
    case intercept:
      return 1.0;
    case hinge:
      return std::max(0.0, h1.sign * (t(h1.var) - h1.knot));
    case product:
      return std::max(0.0, h1.sign * (t(h1.var) - h1.knot)) *
             std::max(0.0, h2.sign * (t(h2.var) - h2.knot));
  }
  return 0.0;
}

ResponseSurface::ResponseSurface(std::vector<OutcomeModel> models, int k)
    : poly_(false), models_(std::move(models)), k_(k) {}

ResponseSurface::ResponseSurface(Matrix poly_coefs, Vector centers,
                                 Vector scales, int k)
    : poly_(true),
      poly_coefs_(std::move(poly_coefs)),
      centers_(std::move(centers)),
      scales_(std::move(scales)),
      k_(k) {}

int ResponseSurface::q() const {
  return poly_ ? static_cast<int>(poly_coefs_.cols())
               : static_cast<int>(models_.size());
}

namespace {

// Degree-2 polynomial basis of a standardized input: 1, z_j, z_i z_j.
int poly_basis_size(int k) { return 1 + k + k * (k + 1) / 2; }

void fill_poly_basis(const Vector& z, Vector& row) {
  const int k = static_cast<int>(z.size());
  int c = 0;
  row(c++) = 1.0;
  for (int j = 0; j < k; ++j) row(c++) = z(j);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) row(c++) = z(i) * z(j);
  }
}

}  // namespace

Vector ResponseSurface::predict(const Vector& t) const {
  if (static_cast<int>(t.size()) != k_) {
    throw DimensionMismatch("ResponseSurface::predict: wrong input length");
  }
  if (poly_) {
    Vector z = (t - centers_).cwiseQuotient(scales_);
    Vector row(poly_basis_size(k_));
    fill_poly_basis(z, row);
    return poly_coefs_.transpose() * row;
  }
  Vector out(models_.size());
  for (std::size_t o = 0; o < models_.size(); ++o) {
    double acc = 0.0;
    const auto& mdl = models_[o];
    for (std::size_t i = 0; i < mdl.terms.size(); ++i) {
      acc += mdl.coefs(static_cast<Eigen::Index>(i)) * mdl.terms[i].eval(t);
    }
    out(static_cast<Eigen::Index>(o)) = acc;
  }
  return out;
}

Matrix ResponseSurface::predict_rows(const Matrix& T) const {
  if (static_cast<int>(T.cols()) != k_) {
    throw DimensionMismatch("ResponseSurface::predict_rows: wrong width");
  }
  const auto n = T.rows();
  Matrix out(n, q());
  if (poly_) {
    Vector row(poly_basis_size(k_));
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector z = (T.row(i).transpose() - centers_).cwiseQuotient(scales_);
      fill_poly_basis(z, row);
      out.row(i) = (poly_coefs_.transpose() * row).transpose();
    }
    return out;
  }
  // Hinge models evaluate vectorized, one term column at a time.
  auto hinge_col = [&T](const HingeTerm& h) {
    return (static_cast<double>(h.sign) * (T.col(h.var).array() - h.knot))
        .max(0.0);
  };
  out.setZero();
  for (std::size_t o = 0; o < models_.size(); ++o) {
    const auto& mdl = models_[o];
    for (std::size_t i = 0; i < mdl.terms.size(); ++i) {
      const BasisTerm& term = mdl.terms[i];
      double coef = mdl.coefs(static_cast<Eigen::Index>(i));
      switch (term.kind) {
        case BasisTerm::intercept:
          out.col(o).array() += coef;
          break;
        case BasisTerm::hinge:
          out.col(o).array() += coef * hinge_col(term.h1);
          break;
        case BasisTerm::product:
          out.col(o).array() += coef * hinge_col(term.h1) * hinge_col(term.h2);
          break;
      }
    }
  }
  return out;
}

namespace {

// Quantile of a column by sorted linear interpolation.
double column_quantile(std::vector<double>& sorted, double f) {
  double pos = f * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

// Lexicographic order of the full (t, y) records.  Every floating-point
// reduction in the hinge fit runs over rows in this order, which makes the
// fitted surface bitwise invariant to how the input rows were permuted.
std::vector<Eigen::Index> canonical_order(const Matrix& T, const Matrix& Y) {
  const Eigen::Index n = T.rows();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < T.cols(); ++j) {
      if (T(a, j) != T(b, j)) return T(a, j) < T(b, j);
    }
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
      if (Y(a, j) != Y(b, j)) return Y(a, j) < Y(b, j);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), row_less);
  return idx;
}

// Even stride over the canonically ordered rows for the selection sample.
std::vector<Eigen::Index> selection_positions(Eigen::Index n, int target) {
  std::vector<Eigen::Index> picked;
  if (n <= target) {
    picked.resize(static_cast<std::size_t>(n));
    std::iota(picked.begin(), picked.end(), Eigen::Index{0});
    return picked;
  }
  picked.reserve(static_cast<std::size_t>(target));
  for (int i = 0; i < target; ++i) {
    picked.push_back(static_cast<Eigen::Index>(
        (static_cast<long long>(i) * (n - 1)) / std::max(target - 1, 1)));
  }
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  return picked;
}

struct Candidate {
  BasisTerm term;
  Vector col;          // values on the selection sample
  double col_sq = 0;   // x'x
  double proj_sq = 0;  // |Q'x|^2 over the selected orthonormal columns
  double xres = 0;     // x'residual
  bool active = true;
  bool is_base_hinge = false;
};

struct ForwardResult {
  std::vector<BasisTerm> terms;
  int dropped_collinear = 0;
};

// Greedy forward pass for one outcome over the shared hinge candidates,
// growing product candidates from pairs of selected hinges.
ForwardResult forward_select(const std::vector<BasisTerm>& base_terms,
                             const Matrix& Xbase, const Vector& y,
                             const RegressOptions& opts) {
  const Eigen::Index nsub = y.size();
  std::vector<Candidate> cands;
  cands.reserve(base_terms.size() * 3);
  for (std::size_t i = 0; i < base_terms.size(); ++i) {
    Candidate c;
    c.term = base_terms[i];
    c.col = Xbase.col(static_cast<Eigen::Index>(i));
    c.col_sq = c.col.squaredNorm();
    c.is_base_hinge = true;
    cands.push_back(std::move(c));
  }

  // The intercept is always in the model; orthonormalize it first.
  Matrix Q(nsub, std::min<Eigen::Index>(opts.max_terms, nsub));
  Q.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(nsub)));
  int nsel = 1;
  Vector res = y - Vector::Constant(nsub, y.mean());
  double tss = res.squaredNorm();

  ForwardResult out;
  out.terms.push_back(BasisTerm{});  // intercept

  for (auto& c : cands) {
    double w = Q.col(0).dot(c.col);
    c.proj_sq = w * w;
    c.xres = c.col.dot(res);
  }

  std::vector<std::size_t> selected_hinges;
  while (nsel < opts.max_terms && nsel < static_cast<int>(nsub)) {
    // Best candidate by residual-sum-of-squares reduction.
    double best_score = 0.0;
    std::size_t best = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      Candidate& c = cands[i];
      if (!c.active) continue;
      double d = c.col_sq - c.proj_sq;
      if (d <= 1e-10 * c.col_sq || d <= 0.0) {
        c.active = false;
        ++out.dropped_collinear;
        continue;
      }
      double score = c.xres * c.xres / d;
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (best == cands.size() || best_score < opts.min_improve_rel * tss) break;

    // Copy what we need: growing `cands` below invalidates references.
    const BasisTerm chosen_term = cands[best].term;
    const Vector chosen_col = cands[best].col;
    const double chosen_col_sq = cands[best].col_sq;
    const bool chosen_is_hinge = cands[best].is_base_hinge;
    cands[best].active = false;

    // Orthonormalize the chosen column against Q (twice, for stability).
    Vector v = chosen_col - Q.leftCols(nsel) *
                                (Q.leftCols(nsel).transpose() * chosen_col);
    v -= Q.leftCols(nsel) * (Q.leftCols(nsel).transpose() * v);
    double vnorm = v.norm();
    if (vnorm * vnorm <= 1e-12 * chosen_col_sq) {
      ++out.dropped_collinear;
      continue;
    }
    Q.col(nsel) = v / vnorm;
    double s = Q.col(nsel).dot(res);
    res -= s * Q.col(nsel);
    out.terms.push_back(chosen_term);

    for (auto& c : cands) {
      if (!c.active) continue;
      double w = Q.col(nsel).dot(c.col);
      c.proj_sq += w * w;
      c.xres -= w * s;
    }

    // New interaction candidates: the fresh hinge times each previously
    // selected hinge (degree-2 cap).
    if (chosen_is_hinge) {
      for (std::size_t prev : selected_hinges) {
        Candidate pc;
        pc.term.kind = BasisTerm::product;
        pc.term.h1 = cands[prev].term.h1;
        pc.term.h2 = chosen_term.h1;
        pc.col = cands[prev].col.cwiseProduct(chosen_col);
        pc.col_sq = pc.col.squaredNorm();
        if (pc.col_sq <= 0.0 ||
            pc.col_sq <= 1e-12 * std::sqrt(cands[prev].col_sq * chosen_col_sq)) {
          continue;  // identically (near) zero, e.g. opposite-sign hinges
        }
        Vector proj = Q.leftCols(nsel + 1).transpose() * pc.col;
        pc.proj_sq = proj.squaredNorm();
        pc.xres = pc.col.dot(res);
        cands.push_back(std::move(pc));
      }
      selected_hinges.push_back(best);
    }
    ++nsel;
  }
  return out;
}

// Greedy GCV-backward pruning on the selection sample; returns the kept
// term indices of the best model in the deletion sequence.
std::vector<int> gcv_prune(const Matrix& Xsel, const Vector& y,
                           const RegressOptions& opts) {
  const auto nsub = static_cast<double>(y.size());
  const int mfull = static_cast<int>(Xsel.cols());
  Matrix G = Xsel.transpose() * Xsel;
  Vector b = Xsel.transpose() * y;
  double yy = y.squaredNorm();

  auto rss_of = [&](const std::vector<int>& keep) {
    const int m = static_cast<int>(keep.size());
    Matrix Gs(m, m);
    Vector bs(m);
    for (int i = 0; i < m; ++i) {
      bs(i) = b(keep[i]);
      for (int j = 0; j < m; ++j) Gs(i, j) = G(keep[i], keep[j]);
    }
    Vector beta = Gs.ldlt().solve(bs);
    // A singular subset (hinges are exactly collinear in pairs) makes the
    // normal-equation solve meaningless; its RSS would clamp to zero and
    // win the pruning by accident.  Disqualify it instead.
    if ((Gs * beta - bs).norm() > 1e-8 * std::max(1.0, bs.norm())) {
      return std::numeric_limits<double>::infinity();
    }
    return std::max(0.0, yy - bs.dot(beta));
  };
  auto gcv_of = [&](double rss, int m) {
    double c = m + opts.gcv_penalty * (m - 1) / 2.0;
    double denom = 1.0 - c / nsub;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return (rss / nsub) / (denom * denom);
  };

  std::vector<int> keep(mfull);
  std::iota(keep.begin(), keep.end(), 0);
  std::vector<int> best_keep = keep;
  double best_gcv = gcv_of(rss_of(keep), mfull);

  while (keep.size() > 1) {
    double level_best = std::numeric_limits<double>::infinity();
    std::size_t drop = keep.size();
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i] == 0) continue;  // never drop the intercept
      std::vector<int> trial;
      trial.reserve(keep.size() - 1);
      for (std::size_t j = 0; j < keep.size(); ++j) {
        if (j != i) trial.push_back(keep[j]);
      }
      double g = gcv_of(rss_of(trial), static_cast<int>(trial.size()));
      if (g < level_best) {
        level_best = g;
        drop = i;
      }
    }
    if (drop == keep.size()) {
      // Every deletion is still singular; peel the most recent term so the
      // sequence keeps moving toward a regular subset.
      if (std::isinf(best_gcv) && keep.size() > 1) {
        keep.pop_back();
        continue;
      }
      break;
    }
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(drop));
    if (level_best < best_gcv) {
      best_gcv = level_best;
      best_keep = keep;
    }
  }
  return best_keep;
}

Matrix eval_terms(const std::vector<BasisTerm>& terms, const Matrix& T) {
  Matrix X(T.rows(), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const BasisTerm& term = terms[i];
    auto col = X.col(static_cast<Eigen::Index>(i));
    switch (term.kind) {
      case BasisTerm::intercept:
        col.setOnes();
        break;
      case BasisTerm::hinge:
        col = (static_cast<double>(term.h1.sign) *
               (T.col(term.h1.var).array() - term.h1.knot))
                  .max(0.0);
        break;
      case BasisTerm::product:
        col = (static_cast<double>(term.h1.sign) *
               (T.col(term.h1.var).array() - term.h1.knot))
                  .max(0.0) *
              (static_cast<double>(term.h2.sign) *
               (T.col(term.h2.var).array() - term.h2.knot))
                  .max(0.0);
        break;
    }
  }
  return X;
}

ResponseSurface fit_hinge(const Dataset& data, const RegressOptions& opts) {
  const int k = data.k();
  const int q = data.q();

  // Work on canonically ordered copies so every reduction below sees the
  // rows in the same order no matter how the caller's rows were permuted.
  const auto order = canonical_order(data.T, data.Y);
  Matrix Tc(data.n(), k), Yc(data.n(), q);
  for (std::size_t i = 0; i < order.size(); ++i) {
    Tc.row(static_cast<Eigen::Index>(i)) = data.T.row(order[i]);
    Yc.row(static_cast<Eigen::Index>(i)) = data.Y.row(order[i]);
  }

  // Knots at evenly spaced interior quantiles, deduplicated per treatment.
  std::vector<std::vector<double>> knots(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    std::vector<double> col(Tc.col(j).data(), Tc.col(j).data() + data.n());
    std::sort(col.begin(), col.end());
    for (int i = 1; i <= opts.knots_per_treatment; ++i) {
      double f = static_cast<double>(i) / (opts.knots_per_treatment + 1.0);
      double kn = column_quantile(col, f);
      auto& ks = knots[static_cast<std::size_t>(j)];
      if (ks.empty() || kn != ks.back()) ks.push_back(kn);
    }
  }
  std::vector<BasisTerm> base_terms;
  for (int j = 0; j < k; ++j) {
    for (double kn : knots[static_cast<std::size_t>(j)]) {
      for (int sign : {+1, -1}) {
        BasisTerm t;
        t.kind = BasisTerm::hinge;
        t.h1 = HingeTerm{j, kn, sign};
        base_terms.push_back(t);
      }
    }
  }

  auto rows = selection_positions(data.n(), opts.selection_subsample);
  Matrix Tsub(static_cast<Eigen::Index>(rows.size()), k);
  Matrix Ysub(static_cast<Eigen::Index>(rows.size()), q);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Tsub.row(static_cast<Eigen::Index>(i)) = Tc.row(rows[i]);
    Ysub.row(static_cast<Eigen::Index>(i)) = Yc.row(rows[i]);
  }
  Matrix Xbase = eval_terms(base_terms, Tsub);

  std::vector<ResponseSurface::OutcomeModel> models;
  models.reserve(static_cast<std::size_t>(q));
  int dropped = 0;
  for (int o = 0; o < q; ++o) {
    ForwardResult fwd = forward_select(base_terms, Xbase, Ysub.col(o), opts);
    dropped += fwd.dropped_collinear;

    Matrix Xsel = eval_terms(fwd.terms, Tsub);
    std::vector<int> keep = gcv_prune(Xsel, Ysub.col(o), opts);

    std::vector<BasisTerm> kept_terms;
    kept_terms.reserve(keep.size());
    for (int idx : keep) kept_terms.push_back(fwd.terms[static_cast<std::size_t>(idx)]);

    // Coefficients are refit on the full sample with a rank-revealing
    // factorization: hinge pairs can be exactly collinear with the
    // intercept, and a plain normal-equation solve would amplify that.
    Matrix Xfull = eval_terms(kept_terms, Tc);
    Vector beta = Xfull.colPivHouseholderQr().solve(Yc.col(o));

    ResponseSurface::OutcomeModel mdl;
    mdl.terms = std::move(kept_terms);
    mdl.coefs = beta;
    models.push_back(std::move(mdl));
  }
  ResponseSurface surface(std::move(models), k);
  surface.set_dropped_collinear(dropped);
  return surface;
}

ResponseSurface fit_poly2(const Dataset& data, const RegressOptions& opts) {
  const int k = data.k();
  const auto n = data.T.rows();
  Vector centers = data.T.colwise().mean();
  Vector scales(k);
  for (int j = 0; j < k; ++j) {
    double var = (data.T.col(j).array() - centers(j)).square().sum() /
                 static_cast<double>(n - 1);
    scales(j) = std::sqrt(var);
  }

  const int nb = poly_basis_size(k);
  Matrix X(n, nb);
  Vector row(nb);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector z = (data.T.row(i).transpose() - centers).cwiseQuotient(scales);
    fill_poly_basis(z, row);
    X.row(i) = row.transpose();
  }

  // Standardize the non-intercept columns so the ridge is scale-free,
  // then fold the normalization back into raw-basis coefficients.
  Vector cmean = X.colwise().mean();
  Vector csd = Vector::Ones(nb);
  for (int j = 1; j < nb; ++j) {
    double var = (X.col(j).array() - cmean(j)).square().sum() /
                 static_cast<double>(n - 1);
    csd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    X.col(j) = (X.col(j).array() - cmean(j)) / csd(j);
  }

  Matrix G = X.transpose() * X;
  for (int j = 1; j < nb; ++j) G(j, j) += opts.ridge * static_cast<double>(n);
  Eigen::LDLT<Matrix> ldlt(G);

  Matrix coefs(nb, data.q());
  for (int o = 0; o < data.q(); ++o) {
    Vector beta = ldlt.solve(X.transpose() * data.Y.col(o));
    // Undo the column standardization.
    double intercept = beta(0) * 1.0;
    for (int j = 1; j < nb; ++j) {
      beta(j) /= csd(j);
      intercept -= beta(j) * cmean(j);
    }
    beta(0) = intercept;
    coefs.col(o) = beta;
  }
  return ResponseSurface(std::move(coefs), std::move(centers),
                         std::move(scales), k);
}

}  // namespace

ResponseSurface fit_g_check(const Dataset& data, const RegressOptions& opts) {
  data.validate();
  if (opts.method == RegressMethod::poly2) return fit_poly2(data, opts);
  return fit_hinge(data, opts);
}

}  // namespace facsens
