#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "facsens/errors.hpp"
#include "facsens/estimation.hpp"

namespace facsens {

void Dataset::validate() const {
  if (T.rows() != Y.rows()) {
    throw DimensionMismatch("Dataset: treatment and outcome row counts differ");
  }
  if (T.rows() < 2 || T.cols() < 1 || Y.cols() < 1) {
    throw DimensionMismatch("Dataset: need at least two rows and one column");
  }
  if (!T.allFinite() || !Y.allFinite()) {
    throw Error("Dataset: non-finite entries present");
  }
  if (n() <= std::max(k(), q())) {
    throw Error("Dataset: sample size must exceed max(k, q)");
  }
  auto check_variance = [](const Matrix& X, const char* label) {
    Vector mean = X.colwise().mean();
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double ss = (X.col(j).array() - mean(j)).square().sum();
      if (!(ss > 0.0)) {
        std::ostringstream msg;
        msg << "Dataset: " << label << " column " << (j + 1) << " is constant";
        throw Error(msg.str());
      }
    }
  };
  check_variance(T, "treatment");
  check_variance(Y, "outcome");
}

Matrix sample_correlation(const Matrix& data) {
  const auto n = data.rows();
  const auto p = data.cols();
  if (n < 2) throw DimensionMismatch("sample_correlation: need n >= 2");
  Vector mean = data.colwise().mean();
  Matrix centered = data.rowwise() - mean.transpose();
  Vector sd(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double var = centered.col(j).squaredNorm() / static_cast<double>(n - 1);
    if (!(var > 0.0)) {
      throw Error("sample_correlation: zero-variance column");
    }
    sd(j) = std::sqrt(var);
  }
  centered.array().rowwise() /= sd.transpose().array();
  Matrix corr = centered.transpose() * centered / static_cast<double>(n - 1);
  corr = 0.5 * (corr + corr.transpose());
  corr.diagonal().setOnes();
  return corr;
}

int max_admissible_factors(int p) {
  int best = 0;
  for (int m = 0; m <= p; ++m) {
    double d = static_cast<double>(p - m);
    if (d * d >= static_cast<double>(p + m)) best = m;
  }
  return best;
}

namespace {

void validate_correlation(const Matrix& corr) {
  if (corr.rows() != corr.cols()) {
    throw DimensionMismatch("ml_factor_analysis: correlation must be square");
  }
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error("ml_factor_analysis: correlation matrix not symmetric");
  }
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8) {
    throw Error("ml_factor_analysis: correlation diagonal must be one");
  }
}

// Gaussian ML discrepancy log det(Sigma) + tr(Sigma^{-1} S).
double ml_discrepancy(const Matrix& Sigma, const Matrix& S) {
  Eigen::LDLT<Matrix> ldlt(Sigma);
  if (ldlt.info() != Eigen::Success) {
    throw NotPositiveDefinite("ml_factor_analysis: model covariance not PD");
  }
  double logdet = ldlt.vectorD().array().log().sum();
  double trace = ldlt.solve(S).trace();
  return logdet + trace;
}

}  // namespace

FactorFit ml_factor_analysis(const Matrix& corr, int m, const FaOptions& opts) {
  validate_correlation(corr);
  const int p = static_cast<int>(corr.rows());
  if (m < 1) throw Error("ml_factor_analysis: m must be >= 1");
  if (m > max_admissible_factors(p)) {
    std::ostringstream msg;
    msg << "ml_factor_analysis: m = " << m << " exceeds the admissible maximum "
        << max_admissible_factors(p) << " for p = " << p;
    throw Error(msg.str());
  }

  // Squared-multiple-correlation start for the uniquenesses.
  Vector psi = Vector::Constant(p, 0.5);
  {
    Eigen::LDLT<Matrix> ldlt(corr);
    if (ldlt.info() == Eigen::Success) {
      Matrix inv = ldlt.solve(Matrix::Identity(p, p));
      for (int j = 0; j < p; ++j) {
        // inv(j, j) >= 1 for a correlation matrix up to roundoff; equality
        // (zero multiple correlation) must start at uniqueness one so an
        // exactly diagonal input stays at the zero-loading solution.
        psi(j) = 1.0 / std::max(inv(j, j), 1.0);
      }
    }
  }
  psi = psi.cwiseMax(opts.min_uniqueness).cwiseMin(1.0);

  FactorFit fit;
  fit.m = m;
  double f_prev = std::numeric_limits<double>::infinity();
  Matrix lambda(p, m);

  for (int it = 1; it <= opts.max_iters; ++it) {
    fit.iterations = it;
    // Loadings given uniquenesses: top-m eigenpairs of the whitened matrix.
    Vector d = psi.cwiseSqrt();
    Matrix whitened =
        d.cwiseInverse().asDiagonal() * corr * d.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened);
    if (eig.info() != Eigen::Success) {
      throw NonConvergence("ml_factor_analysis: eigendecomposition failed");
    }
    for (int i = 0; i < m; ++i) {
      double theta = eig.eigenvalues()(p - 1 - i);
      double scale = std::sqrt(std::max(theta - 1.0, 0.0));
      lambda.col(i) = d.asDiagonal() * eig.eigenvectors().col(p - 1 - i) * scale;
    }
    // Uniquenesses given loadings, clamped away from zero.
    Vector psi_new = (corr.diagonal() - lambda.rowwise().squaredNorm())
                         .cwiseMax(opts.min_uniqueness)
                         .cwiseMin(1.0);
    Matrix sigma = lambda * lambda.transpose();
    sigma += Matrix(psi_new.asDiagonal());
    double f = ml_discrepancy(sigma, corr);
    psi = psi_new;
    if (std::abs(f - f_prev) < opts.tol) {
      fit.converged = true;
      fit.discrepancy = f;
      break;
    }
    f_prev = f;
    fit.discrepancy = f;
  }
  if (!fit.converged) {
    throw NonConvergence("ml_factor_analysis: no convergence within iteration cap");
  }
  fit.loadings_std = lambda;
  fit.uniquenesses = psi;
  fit.heywood = (psi.array() <= opts.min_uniqueness + 1e-15).any();
  return fit;
}

FactorCountMethod parse_factor_count_method(const std::string& name) {
  if (name == "eigen") return FactorCountMethod::eigen_gt1;
  if (name == "parallel") return FactorCountMethod::parallel;
  if (name == "bic") return FactorCountMethod::bic;
  throw UnsupportedMethod("factor-count method not provided: " + name);
}

namespace {

Vector corr_eigenvalues_desc(const Matrix& corr) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
  return eig.eigenvalues().reverse();
}

}  // namespace

FactorCountResult select_num_factors_corr(const Matrix& corr, int n,
                                          FactorCountMethod method,
                                          std::uint64_t seed) {
  validate_correlation(corr);
  const int p = static_cast<int>(corr.rows());
  if (n < 2) throw Error("select_num_factors: need n >= 2");

  FactorCountResult out;
  out.eigenvalues = corr_eigenvalues_desc(corr);

  switch (method) {
    case FactorCountMethod::eigen_gt1: {
      out.raw = static_cast<int>((out.eigenvalues.array() > 1.0).count());
      break;
    }
    case FactorCountMethod::parallel: {
      const int replicates = 100;
      Rng rng(seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      Vector mean_eig = Vector::Zero(p);
      Matrix draw(n, p);
      for (int r = 0; r < replicates; ++r) {
        for (Eigen::Index j = 0; j < draw.cols(); ++j) {
          for (Eigen::Index i = 0; i < draw.rows(); ++i) draw(i, j) = gauss(rng);
        }
        mean_eig += corr_eigenvalues_desc(sample_correlation(draw));
      }
      mean_eig /= static_cast<double>(replicates);
      int count = 0;
      while (count < p && out.eigenvalues(count) > mean_eig(count)) ++count;
      out.raw = count;
      break;
    }
    case FactorCountMethod::bic: {
      double best = std::numeric_limits<double>::infinity();
      int best_m = 1;
      for (int m = 1; m <= max_admissible_factors(p); ++m) {
        double bic;
        try {
          FactorFit fit = ml_factor_analysis(corr, m);
          int df = p * (m + 1) - m * (m - 1) / 2;
          bic = static_cast<double>(n) * fit.discrepancy +
                df * std::log(static_cast<double>(n));
        } catch (const Error&) {
          continue;  // a non-fitting candidate just drops out
        }
        if (bic < best) {
          best = bic;
          best_m = m;
        }
      }
      out.raw = best_m;
      break;
    }
  }

  int cap = max_admissible_factors(p);
  out.selected = std::min(out.raw, cap);
  out.clamped = out.raw > cap;
  return out;
}

FactorCountResult select_num_factors(const Matrix& data,
                                     FactorCountMethod method,
                                     std::uint64_t seed) {
  return select_num_factors_corr(sample_correlation(data),
                                 static_cast<int>(data.rows()), method, seed);
}

}  // namespace facsens
