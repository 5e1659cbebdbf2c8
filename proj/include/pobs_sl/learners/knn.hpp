#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/learners/linear.hpp"

namespace pobs_sl {

/// k-nearest-neighbour regression on standardized features. Distance ties
/// are broken by training-row order.
struct KnnModel {
  Standardizer standardizer;
  Matrix train_x;  // standardized
  Vector train_y;
  std::size_t k = 1;
};

inline KnnModel fit_knn(const Matrix& x, const Vector& y, std::size_t k) {
  KnnModel m;
  m.standardizer = Standardizer::fit(x);
  m.train_x = m.standardizer.apply(x);
  m.train_y = y;
  m.k = std::min<std::size_t>(k, static_cast<std::size_t>(x.rows()));
  return m;
}

inline Vector predict_knn(const KnnModel& m, const Matrix& x) {
  const Matrix q = m.standardizer.apply(x);
  const auto n = static_cast<std::size_t>(m.train_x.rows());
  Vector out(q.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = {(m.train_x.row(static_cast<Eigen::Index>(i)) - q.row(r)).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m.k), dist.end());
    // Sum in training order for a schedule-free result.
    std::vector<std::size_t> chosen(m.k);
    for (std::size_t j = 0; j < m.k; ++j) chosen[j] = dist[j].second;
    std::sort(chosen.begin(), chosen.end());
    double sum = 0.0;
    for (auto i : chosen) sum += m.train_y(static_cast<Eigen::Index>(i));
    out(r) = sum / static_cast<double>(m.k);
  }
  return out;
}

}  // namespace pobs_sl
