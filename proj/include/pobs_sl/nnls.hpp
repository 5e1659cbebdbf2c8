#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"

namespace pobs_sl {

struct NnlsResult {
  Vector weights;       // w >= 0 minimizing ||y - P w||
  std::size_t iterations = 0;
};

/// Lawson-Hanson active-set NNLS.
///
/// The entering column is the one with the largest positive gradient
/// P^T (y - P w); ties go to the smallest index, so duplicated columns put all
/// their mass on the first copy.
inline NnlsResult nnls_solve(const Matrix& p, const Vector& y, double kkt_tol = 1e-10) {
  const Eigen::Index n = p.rows();
  const Eigen::Index k = p.cols();
  if (n < 1 || k < 1) throw Error(ErrorCode::EmptyData, "learners", "nnls: empty problem");
  if (y.size() != n) throw Error(ErrorCode::DimensionMismatch, "learners", "nnls: row count mismatch");
  if (!p.allFinite() || !y.allFinite()) throw Error(ErrorCode::NonFinite, "learners", "nnls: non-finite input");

  // Gradient tolerance relative to the scale of the problem.
  const double scale = std::max(1.0, (p.transpose() * y).cwiseAbs().maxCoeff());
  const double tol = kkt_tol * scale;

  NnlsResult res;
  Vector w = Vector::Zero(k);
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  const std::size_t max_outer = static_cast<std::size_t>(3 * k + 30);

  auto solve_passive = [&](Vector& s) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    Matrix sub(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = p.col(cols[c]);
    Vector z = sub.colPivHouseholderQr().solve(y);
    s.setZero(k);
    for (std::size_t c = 0; c < cols.size(); ++c) s(cols[c]) = z(static_cast<Eigen::Index>(c));
  };

  for (std::size_t outer = 0; outer < max_outer; ++outer) {
    Vector grad = p.transpose() * (y - p * w);
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad(j) > best) {
        best = grad(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = true;
    ++res.iterations;

    Vector s;
    for (std::size_t inner = 0; inner < static_cast<std::size_t>(3 * k + 30); ++inner) {
      solve_passive(s);
      bool feasible = true;
      for (Eigen::Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) feasible = false;
      if (feasible) break;

      double alpha = 1.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          const double denom = w(j) - s(j);
          if (denom > 0.0) alpha = std::min(alpha, w(j) / denom);
        }
      }
      w += alpha * (s - w);
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && w(j) <= 1e-14 * std::max(1.0, w.cwiseAbs().maxCoeff())) {
          passive[static_cast<std::size_t>(j)] = false;
          w(j) = 0.0;
        }
      }
      if (std::none_of(passive.begin(), passive.end(), [](bool b) { return b; })) {
        s.setZero(k);
        break;
      }
    }
    w = s;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!passive[static_cast<std::size_t>(j)]) w(j) = 0.0;
    // The entering column may have been dropped again; stop if nothing changes.
    if (std::none_of(passive.begin(), passive.end(), [](bool b) { return b; })) break;
  }
  res.weights = w;
  return res;
}

/// Meta-learner weights: NNLS solution rescaled to sum to one, or uniform
/// weights 1/K when the solution is identically zero.
inline Vector nnls(const Matrix& p, const Vector& y) {
  Vector w = nnls_solve(p, y).weights;
  const double total = w.sum();
  if (total > 0.0) return w / total;
  return Vector::Constant(p.cols(), 1.0 / static_cast<double>(p.cols()));
}

}  // namespace pobs_sl
