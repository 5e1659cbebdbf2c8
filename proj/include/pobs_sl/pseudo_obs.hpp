#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"
#include "pobs_sl/survival.hpp"

namespace pobs_sl {

enum class PobsKind { Standard, Split };

/// Jackknife pseudo-values of the Kaplan-Meier restricted mean, one per target row.
struct PseudoObservationSet {
  std::vector<double> values;
  double tau = 0.0;
  PobsKind kind = PobsKind::Standard;
  std::size_t km_set_size = 0;  // n1 for Split, 0 otherwise
};

namespace detail {

inline void check_tau(double tau, double max_time, const char* who) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw Error(ErrorCode::TauOutOfRange, "pseudo_obs", std::string(who) + ": tau must be positive");
  if (tau > max_time)
    throw Error(ErrorCode::TauOutOfRange, "pseudo_obs",
                std::string(who) + ": tau=" + std::to_string(tau) + " exceeds the largest observed time " +
                    std::to_string(max_time));
}

inline void check_fit_input(const Dataset& data, const char* who) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "pseudo_obs", std::string(who) + ": no rows");
  if (!data.has_event())
    throw Error(ErrorCode::AllCensored, "pseudo_obs", std::string(who) + ": every observation is censored");
}

/// Integral over [0, tau] of the product-limit curve of a risk table.
inline long double table_rmst(const RiskTable& t, double tau) {
  long double area = 0.0L, level = 1.0L;
  double prev = 0.0;
  for (std::size_t j = 0; j < t.times.size() && t.times[j] < tau; ++j) {
    area += level * static_cast<long double>(t.times[j] - prev);
    prev = t.times[j];
    level *= 1.0L - static_cast<long double>(t.deaths[j]) / static_cast<long double>(t.at_risk[j]);
  }
  return area + level * static_cast<long double>(tau - prev);
}

/// Integral over [0, tau] of the product-limit curve of the risk table with
/// one extra record (time, event) merged in. Linear in the table size.
inline long double table_rmst_add_one(const RiskTable& t, double time, bool event, double tau) {
  long double area = 0.0L, level = 1.0L;
  double prev = 0.0;
  bool done = false;
  auto step = [&](double at, std::size_t deaths, std::size_t at_risk) {
    if (done || at >= tau) {
      done = true;
      return;
    }
    area += level * static_cast<long double>(at - prev);
    prev = at;
    if (deaths > 0)
      level *= 1.0L - static_cast<long double>(deaths) / static_cast<long double>(at_risk);
  };

  const std::size_t ev = event ? 1 : 0;
  bool inserted = false;
  for (std::size_t j = 0; j < t.times.size() && !done; ++j) {
    const double u = t.times[j];
    if (!inserted && time < u) {
      step(time, ev, t.at_risk[j] + 1);
      inserted = true;
    }
    if (!inserted && time == u) {
      step(u, t.deaths[j] + ev, t.at_risk[j] + 1);
      inserted = true;
      continue;
    }
    step(u, t.deaths[j], t.at_risk[j] + (inserted ? 0 : 1));
  }
  if (!inserted) step(time, ev, 1);
  return area + level * static_cast<long double>(tau - prev);
}

}  // namespace detail

/// Clamp every pseudo-value into [0, tau].
inline void clamp_to_horizon(PseudoObservationSet& set) {
  for (double& v : set.values) v = std::clamp(v, 0.0, set.tau);
}

/// Standard jackknife pseudo-observations
///   G_i = n * int_0^tau S(t) dt - (n - 1) * int_0^tau S^{-i}(t) dt
/// for every row, where S^{-i} is the product-limit curve without row i.
///
/// All leave-one-out integrals come from a single sorted pass. Removing row i,
/// which sits in distinct-time group k, lowers the at-risk count of every group
/// up to k by one and (for an event) the death count of group k by one; groups
/// after k keep their factors. With prefix sums of the modified curve and
/// suffix sums of the unmodified one, each leave-one-out integral is O(1).
inline PseudoObservationSet standard_pobs(const Dataset& data, double tau) {
  detail::check_fit_input(data, "standard_pobs");
  detail::check_tau(tau, data.max_time(), "standard_pobs");
  const std::size_t n = data.size();
  if (n < 2)
    throw Error(ErrorCode::DegenerateJackknife, "pseudo_obs", "standard_pobs: need at least two rows");
  const std::size_t total_deaths = data.event_count();

  const auto table = detail::risk_table(data);
  const std::size_t m = table.times.size();
  using ld = long double;

  // Segment widths on [0, tau]: before the first time, and after each time.
  std::vector<ld> width(m);
  const ld width_head = detail::clip(table.times[0], tau);
  for (std::size_t j = 0; j < m; ++j) {
    const double right = (j + 1 < m) ? detail::clip(table.times[j + 1], tau) : tau;
    width[j] = static_cast<ld>(right) - static_cast<ld>(detail::clip(table.times[j], tau));
  }

  std::vector<ld> full_factor(m), loo_factor(m);
  for (std::size_t j = 0; j < m; ++j) {
    const ld d = static_cast<ld>(table.deaths[j]);
    const ld r = static_cast<ld>(table.at_risk[j]);
    full_factor[j] = 1.0L - d / r;
    loo_factor[j] = table.at_risk[j] > 1 ? 1.0L - d / (r - 1.0L) : 1.0L;
  }

  // prefix_area[k]: integral up to times[k] of the leave-one-out curve when
  // the removed row sits at or after group k. prefix_level[k]: its level just
  // before times[k].
  std::vector<ld> prefix_area(m), prefix_level(m);
  ld area = width_head, level = 1.0L;
  for (std::size_t k = 0; k < m; ++k) {
    prefix_area[k] = area;
    prefix_level[k] = level;
    level *= loo_factor[k];
    area += level * width[k];
  }

  // tail[k] = sum_{j >= k} width[j] * prod_{l = k+1..j} full_factor[l]
  std::vector<ld> tail(m);
  tail[m - 1] = width[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) tail[k] = width[k] + full_factor[k + 1] * tail[k + 1];

  const ld theta_full = detail::table_rmst(table, tau);

  PseudoObservationSet out;
  out.tau = tau;
  out.kind = PobsKind::Standard;
  out.values.resize(n);
  const ld nn = static_cast<ld>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& obs = data[i];
    if (obs.event && total_deaths == 1)
      throw Error(ErrorCode::DegenerateJackknife, "pseudo_obs",
                  "standard_pobs: leaving out row " + std::to_string(i) + " removes the only event");
    const auto k = static_cast<std::size_t>(
        std::lower_bound(table.times.begin(), table.times.end(), obs.time) - table.times.begin());
    const std::size_t d_left = table.deaths[k] - (obs.event ? 1 : 0);
    const std::size_t r_left = table.at_risk[k] - 1;
    const ld own = (r_left == 0 || d_left == 0)
                       ? 1.0L
                       : 1.0L - static_cast<ld>(d_left) / static_cast<ld>(r_left);
    const ld theta_loo = prefix_area[k] + prefix_level[k] * own * tail[k];
    out.values[i] = static_cast<double>(nn * theta_full - (nn - 1.0L) * theta_loo);
  }
  return out;
}

/// Reference implementation: n literal leave-one-out refits. Test oracle only.
inline PseudoObservationSet standard_pobs_naive(const Dataset& data, double tau) {
  detail::check_fit_input(data, "standard_pobs_naive");
  detail::check_tau(tau, data.max_time(), "standard_pobs_naive");
  const std::size_t n = data.size();
  if (n < 2)
    throw Error(ErrorCode::DegenerateJackknife, "pseudo_obs", "standard_pobs_naive: need at least two rows");

  const long double theta = rmst(km_fit(data), tau);
  PseudoObservationSet out;
  out.tau = tau;
  out.values.resize(n);
  std::vector<std::size_t> keep;
  keep.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    keep.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) keep.push_back(j);
    const Dataset loo = data.subset(keep);
    if (!loo.has_event())
      throw Error(ErrorCode::DegenerateJackknife, "pseudo_obs",
                  "standard_pobs_naive: leaving out row " + std::to_string(i) + " removes the only event");
    const long double theta_loo = rmst(km_fit(loo), tau);
    out.values[i] = static_cast<double>(static_cast<long double>(n) * theta -
                                        static_cast<long double>(n - 1) * theta_loo);
  }
  return out;
}

/// Split pseudo-observations for every row of eval_set, with the product-limit
/// curve taken from km_set:
///   G_i = (n1 + 1) * int_0^tau S^{+i}(t) dt - n1 * int_0^tau S(t) dt
/// where S^{+i} is refit on km_set plus row i. Each refit is one linear merge
/// of row i into the presorted risk table of km_set.
///
/// tau must not exceed the largest time of km_set and eval_set pooled; beyond
/// the last time of a KM refit its curve is held constant.
inline PseudoObservationSet split_pobs(const Dataset& km_set, const Dataset& eval_set, double tau) {
  detail::check_fit_input(km_set, "split_pobs");
  if (km_set.dim() != eval_set.dim())
    throw Error(ErrorCode::DimensionMismatch, "pseudo_obs",
                "split_pobs: KM set and evaluation set have different covariate dimensions");
  detail::check_tau(tau, std::max(km_set.max_time(), eval_set.max_time()), "split_pobs");

  const auto table = detail::risk_table(km_set);
  const long double n1 = static_cast<long double>(km_set.size());
  const long double theta = detail::table_rmst(table, tau);

  PseudoObservationSet out;
  out.tau = tau;
  out.kind = PobsKind::Split;
  out.km_set_size = km_set.size();
  out.values.resize(eval_set.size());
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const long double theta_plus = detail::table_rmst_add_one(table, eval_set[i].time, eval_set[i].event, tau);
    out.values[i] = static_cast<double>((n1 + 1.0L) * theta_plus - n1 * theta);
  }
  return out;
}

}  // namespace pobs_sl
