#include <gtest/gtest.h>

#include <limits>

#include "pobs_sl/nnls.hpp"
#include "pobs_sl/rng.hpp"

using namespace pobs_sl;

namespace {

// Exhaustive oracle: least squares on every support set, keep the best
// feasible one.
double brute_force_nnls_objective(const Matrix& p, const Vector& y) {
  const auto k = p.cols();
  double best = y.squaredNorm();
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Matrix sub(p.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = p.col(cols[c]);
    const Vector z = sub.completeOrthogonalDecomposition().solve(y);
    if ((z.array() < 0.0).any()) continue;
    best = std::min(best, (y - sub * z).squaredNorm());
  }
  return best;
}

}  // namespace

TEST(Nnls, SingleColumnEqualToTarget) {
  Matrix p(3, 1);
  p << 1, 2, 3;
  const Vector y = p.col(0);
  const Vector w = nnls(p, y);
  ASSERT_EQ(w.size(), 1);
  EXPECT_NEAR(w(0), 1.0, 1e-12);
}

TEST(Nnls, NegativelyCorrelatedColumnExcluded) {
  Matrix p(2, 2);
  p << 1, -1, 2, -2;
  Vector y(2);
  y << 1, 2;
  const auto raw = nnls_solve(p, y).weights;
  EXPECT_NEAR(raw(0), 1.0, 1e-12);
  EXPECT_EQ(raw(1), 0.0);
  const Vector w = nnls(p, y);
  EXPECT_NEAR(w(0), 1.0, 1e-12);
  EXPECT_EQ(w(1), 0.0);
}

TEST(Nnls, IdenticalColumnsPutMassOnFirst) {
  Matrix p(4, 3);
  p << 1, 1, 0, 2, 2, 1, 3, 3, 0, 4, 4, 1;
  Vector y(4);
  y << 1, 2, 3, 4;
  const Vector w = nnls(p, y);
  EXPECT_NEAR(w(0), 1.0, 1e-12);
  EXPECT_EQ(w(1), 0.0);
  EXPECT_EQ(w.sum(), 1.0);
}

TEST(Nnls, AllZeroSolutionFallsBackToUniform) {
  Matrix p(2, 3);
  p << 1, 2, 3, 1, 2, 3;
  Vector y(2);
  y << -1, -1;
  const Vector w = nnls(p, y);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(w(j), 1.0 / 3.0);
}

TEST(Nnls, Errors) {
  Matrix p(2, 1);
  p << 1, std::numeric_limits<double>::infinity();
  Vector y(2);
  y << 1, 2;
  try {
    nnls(p, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(Nnls, KktAndMatchesExhaustiveSearch) {
  Rng rng(17);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(40));
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(6));
    Matrix p(n, k);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = rng.uniform(-1.0, 3.0);
      for (Eigen::Index j = 0; j < k; ++j) p(i, j) = y(i) * rng.uniform(-0.5, 1.5) + rng.uniform(-1.0, 1.0);
    }
    if (rep % 5 == 0 && k > 1) p.col(k - 1) = p.col(0);  // exact collinearity
    const Vector w = nnls_solve(p, y).weights;
    ASSERT_TRUE((w.array() >= 0.0).all());
    const Vector grad = p.transpose() * (y - p * w);
    for (Eigen::Index j = 0; j < k; ++j) {
      EXPECT_LE(grad(j), 1e-6);
      EXPECT_LE(std::abs(w(j) * grad(j)), 1e-6);
    }
    const double obj = (y - p * w).squaredNorm();
    EXPECT_NEAR(obj, brute_force_nnls_objective(p, y), 1e-8 * std::max(1.0, obj));
    const Vector normalized = nnls(p, y);
    EXPECT_NEAR(normalized.sum(), 1.0, 1e-12);
    EXPECT_TRUE((normalized.array() >= 0.0).all());
  }
}
