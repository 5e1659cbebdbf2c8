#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"

namespace pobs_sl {

/// y = intercept + x' coef, on the original feature scale.
struct LinearModel {
  double intercept = 0.0;
  Vector coef;
};

/// Column means and population standard deviations; constant columns get
/// scale 0 and are left out of penalized fits.
struct Standardizer {
  Vector center;
  Vector scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.center = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double var = (x.col(j).array() - s.center(j)).square().sum() / n;
      const double sd = std::sqrt(var);
      s.scale(j) = sd > 1e-12 * (1.0 + std::abs(s.center(j))) ? sd : 0.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    Matrix z = x.rowwise() - center.transpose();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (scale(j) > 0.0)
        z.col(j) /= scale(j);
      else
        z.col(j).setZero();
    }
    return z;
  }

  /// Maps standardized-scale coefficients back to the original scale.
  LinearModel unstandardize(const Vector& beta_std, double y_mean) const {
    LinearModel m;
    m.coef = Vector::Zero(beta_std.size());
    for (Eigen::Index j = 0; j < beta_std.size(); ++j)
      if (scale(j) > 0.0) m.coef(j) = beta_std(j) / scale(j);
    m.intercept = y_mean - center.dot(m.coef);
    return m;
  }
};

inline LinearModel fit_ols(const Matrix& x, const Vector& y, bool min_norm_fallback) {
  const double y_mean = y.mean();
  const Vector xc_mean = x.colwise().mean().transpose();
  const Matrix xc = x.rowwise() - xc_mean.transpose();
  const Vector yc = y.array() - y_mean;

  LinearModel m;
  if (x.cols() == 0) {
    m.coef = Vector::Zero(0);
    m.intercept = y_mean;
    return m;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xc);
  if (cod.rank() < xc.cols()) {
    if (!min_norm_fallback)
      throw Error(ErrorCode::SingularDesign, "learners",
                  "ols: design has rank " + std::to_string(cod.rank()) + " < " + std::to_string(xc.cols()));
    log::warn("learners", "ols: rank-deficient design (rank " + std::to_string(cod.rank()) + " of " +
                              std::to_string(xc.cols()) + "), using the minimum-norm solution");
  }
  m.coef = cod.solve(yc);
  m.intercept = y_mean - xc_mean.dot(m.coef);
  return m;
}

inline LinearModel fit_ridge(const Matrix& x, const Vector& y, double lambda) {
  const auto st = Standardizer::fit(x);
  const Matrix z = st.apply(x);
  const double y_mean = y.mean();
  const Vector yc = y.array() - y_mean;
  const double n = static_cast<double>(x.rows());
  Matrix gram = z.transpose() * z;
  gram.diagonal().array() += n * lambda;
  // Constant columns are all zero after standardization; pin them to zero.
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    if (st.scale(j) == 0.0) gram(j, j) = 1.0;
  const Vector beta = gram.ldlt().solve(z.transpose() * yc);
  return st.unstandardize(beta, y_mean);
}

struct LassoControl {
  double lambda = 0.01;
  double tol = 1e-12;            // stop when the largest coefficient change in a sweep is below tol
  std::size_t max_sweeps = 100000;
};

/// Lasso objective (1/2n)||y - X b||^2 + lambda ||b||_1.
inline double lasso_objective(const Matrix& x, const Vector& y, const Vector& beta, double lambda) {
  const double n = static_cast<double>(x.rows());
  return (y - x * beta).squaredNorm() / (2.0 * n) + lambda * beta.cwiseAbs().sum();
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Cyclic coordinate descent on a standardized design (columns with mean 0 and
/// (1/n) x_j'x_j = 1, or all zero) and centered response. When `trace` is
/// given, the objective after every sweep is appended to it.
inline Vector lasso_coordinate_descent(const Matrix& z, const Vector& yc, const LassoControl& ctl,
                                       std::vector<double>* trace = nullptr) {
  const Eigen::Index p = z.cols();
  const double n = static_cast<double>(z.rows());
  Vector beta = Vector::Zero(p);
  Vector resid = yc;
  Vector col_ss(p);
  for (Eigen::Index j = 0; j < p; ++j) col_ss(j) = z.col(j).squaredNorm() / n;

  for (std::size_t sweep = 0; sweep < ctl.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_ss(j) == 0.0) continue;
      const double old = beta(j);
      const double rho = z.col(j).dot(resid) / n + col_ss(j) * old;
      const double updated = soft_threshold(rho, ctl.lambda) / col_ss(j);
      if (updated != old) {
        resid -= z.col(j) * (updated - old);
        beta(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (trace) trace->push_back(lasso_objective(z, yc, beta, ctl.lambda));
    if (max_change < ctl.tol) break;
  }
  return beta;
}

inline LinearModel fit_lasso(const Matrix& x, const Vector& y, const LassoControl& ctl) {
  const auto st = Standardizer::fit(x);
  const Matrix z = st.apply(x);
  const double y_mean = y.mean();
  const Vector yc = y.array() - y_mean;
  return st.unstandardize(lasso_coordinate_descent(z, yc, ctl), y_mean);
}

inline Vector predict_linear(const LinearModel& m, const Matrix& x) {
  return (x * m.coef).array() + m.intercept;
}

}  // namespace pobs_sl
