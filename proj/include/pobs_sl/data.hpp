#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pobs_sl/error.hpp"

namespace pobs_sl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One right-censored record: observed time T = min(T*, C), event flag
/// (true when T* <= C) and covariates Z.
struct Observation {
  double time = 0.0;
  bool event = false;
  std::vector<double> covariates;
};

/// Ordered collection of observations sharing one covariate dimension.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim) : dim_(dim) {}

  Dataset(std::vector<Observation> rows, std::size_t dim) : rows_(std::move(rows)), dim_(dim) {
    for (const auto& r : rows_) check(r);
  }

  void push_back(Observation obs) {
    check(obs);
    rows_.push_back(std::move(obs));
  }

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  const Observation& operator[](std::size_t i) const { return rows_[i]; }
  const std::vector<Observation>& rows() const noexcept { return rows_; }
  auto begin() const noexcept { return rows_.begin(); }
  auto end() const noexcept { return rows_.end(); }

  bool has_event() const {
    return std::any_of(rows_.begin(), rows_.end(), [](const Observation& o) { return o.event; });
  }

  double max_time() const {
    double m = 0.0;
    for (const auto& r : rows_) m = std::max(m, r.time);
    return m;
  }

  std::size_t event_count() const {
    return static_cast<std::size_t>(
        std::count_if(rows_.begin(), rows_.end(), [](const Observation& o) { return o.event; }));
  }

  /// Rows picked by index, in the order given.
  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out(dim_);
    out.rows_.reserve(idx.size());
    for (auto i : idx) out.rows_.push_back(rows_[i]);
    return out;
  }

  /// n x d design matrix.
  Matrix covariate_matrix() const {
    Matrix x(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < rows_.size(); ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_[i].covariates[j];
    return x;
  }

  Matrix covariate_matrix(std::span<const std::size_t> idx) const {
    Matrix x(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_[idx[i]].covariates[j];
    return x;
  }

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(rows_.size());
    for (const auto& r : rows_) t.push_back(r.time);
    return t;
  }

 private:
  void check(const Observation& o) const {
    if (o.covariates.size() != dim_)
      throw Error(ErrorCode::DimensionMismatch, "data",
                  "observation has " + std::to_string(o.covariates.size()) +
                      " covariates, dataset dimension is " + std::to_string(dim_));
    if (!std::isfinite(o.time) || o.time < 0.0)
      throw Error(ErrorCode::NonFinite, "data", "observation time must be finite and nonnegative");
    for (double z : o.covariates)
      if (!std::isfinite(z)) throw Error(ErrorCode::NonFinite, "data", "non-finite covariate");
  }

  std::vector<Observation> rows_;
  std::size_t dim_ = 0;
};

}  // namespace pobs_sl
