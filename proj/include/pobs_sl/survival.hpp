#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"

namespace pobs_sl {

/// Right-continuous nonincreasing step function. Equal to 1 on
/// [0, jump_times[0]) and to values[k] on [jump_times[k], jump_times[k+1]).
/// Past the last jump the last value is held.
struct SurvivalCurve {
  std::vector<double> jump_times;
  std::vector<double> values;
};

namespace detail {

/// Distinct observed times with event counts and at-risk counts, ascending.
/// At a shared time events come before censorings: censored rows at t are
/// still counted in at_risk(t) but not in deaths(t).
struct RiskTable {
  std::vector<double> times;
  std::vector<std::size_t> deaths;
  std::vector<std::size_t> at_risk;
  std::size_t n = 0;
};

inline RiskTable risk_table(std::span<const std::pair<double, bool>> sorted) {
  RiskTable t;
  t.n = sorted.size();
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double time = sorted[i].first;
    std::size_t d = 0;
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].first == time; ++j)
      if (sorted[j].second) ++d;
    t.times.push_back(time);
    t.deaths.push_back(d);
    t.at_risk.push_back(sorted.size() - i);
    i = j;
  }
  return t;
}

inline std::vector<std::pair<double, bool>> sorted_records(const Dataset& data) {
  std::vector<std::pair<double, bool>> recs;
  recs.reserve(data.size());
  for (const auto& o : data) recs.emplace_back(o.time, o.event);
  // Events before censorings at equal times.
  std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  });
  return recs;
}

inline RiskTable risk_table(const Dataset& data) {
  auto recs = sorted_records(data);
  return risk_table(recs);
}

inline double clip(double t, double tau) { return t < tau ? t : tau; }

}  // namespace detail

/// Product-limit (Kaplan-Meier) estimate of the event-time survival function.
inline SurvivalCurve km_fit(const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "survival_core", "km_fit: no rows");
  if (!data.has_event())
    throw Error(ErrorCode::AllCensored, "survival_core", "km_fit: every observation is censored");

  const auto table = detail::risk_table(data);
  SurvivalCurve curve;
  long double s = 1.0L;
  for (std::size_t j = 0; j < table.times.size(); ++j) {
    if (table.deaths[j] == 0) continue;
    s *= 1.0L - static_cast<long double>(table.deaths[j]) / static_cast<long double>(table.at_risk[j]);
    curve.jump_times.push_back(table.times[j]);
    curve.values.push_back(static_cast<double>(s));
  }
  return curve;
}

/// Right-continuous evaluation of the curve at t >= 0.
inline double survival_at(const SurvivalCurve& curve, double t) {
  auto it = std::upper_bound(curve.jump_times.begin(), curve.jump_times.end(), t);
  if (it == curve.jump_times.begin()) return 1.0;
  return curve.values[static_cast<std::size_t>(it - curve.jump_times.begin()) - 1];
}

/// Left limit S(t-) of the curve.
inline double survival_before(const SurvivalCurve& curve, double t) {
  auto it = std::lower_bound(curve.jump_times.begin(), curve.jump_times.end(), t);
  if (it == curve.jump_times.begin()) return 1.0;
  return curve.values[static_cast<std::size_t>(it - curve.jump_times.begin()) - 1];
}

/// Restricted mean: exact integral of the step function over [0, tau].
inline double rmst(const SurvivalCurve& curve, double tau) {
  long double area = 0.0L;
  long double level = 1.0L;
  double prev = 0.0;
  for (std::size_t k = 0; k < curve.jump_times.size() && curve.jump_times[k] < tau; ++k) {
    area += level * static_cast<long double>(curve.jump_times[k] - prev);
    prev = curve.jump_times[k];
    level = curve.values[k];
  }
  area += level * static_cast<long double>(tau - prev);
  return static_cast<double>(area);
}

}  // namespace pobs_sl
