#pragma once

// Test-only reference computations. Written directly from the definitions,
// independent of the library's fast paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/rng.hpp"

namespace oracle {

// Product-limit survival at t by brute force over the raw records: for every
// distinct event time u <= t, multiply by 1 - deaths(u) / at_risk(u).
inline double km_survival(const pobs_sl::Dataset& data, double t) {
  std::vector<double> event_times;
  for (const auto& o : data)
    if (o.event && o.time <= t) event_times.push_back(o.time);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
  long double s = 1.0L;
  for (double u : event_times) {
    std::size_t deaths = 0, at_risk = 0;
    for (const auto& o : data) {
      if (o.time >= u) ++at_risk;
      if (o.time == u && o.event) ++deaths;
    }
    s *= 1.0L - static_cast<long double>(deaths) / static_cast<long double>(at_risk);
  }
  return static_cast<double>(s);
}

// Integral of km_survival over [0, tau], evaluating the step function on each
// interval between consecutive observed times.
inline long double km_rmst(const pobs_sl::Dataset& data, double tau) {
  std::vector<double> cuts{0.0};
  for (const auto& o : data)
    if (o.time < tau) cuts.push_back(o.time);
  cuts.push_back(tau);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  long double area = 0.0L;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    area += static_cast<long double>(km_survival(data, cuts[i])) * (cuts[i + 1] - cuts[i]);
  return area;
}

// Split pseudo-value of one eval row by literal add-one refit.
inline double split_pobs_value(const pobs_sl::Dataset& km_set, const pobs_sl::Observation& row, double tau) {
  pobs_sl::Dataset plus = km_set;
  plus.push_back(row);
  const long double n1 = static_cast<long double>(km_set.size());
  return static_cast<double>((n1 + 1.0L) * km_rmst(plus, tau) - n1 * km_rmst(km_set, tau));
}

// Random dataset with ties and mixed censoring; times on a coarse grid when
// `ties` is set.
inline pobs_sl::Dataset random_dataset(pobs_sl::Rng& rng, std::size_t n, double censor_prob, bool ties,
                                       std::size_t dim = 1) {
  pobs_sl::Dataset d(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double t = ties ? static_cast<double>(1 + rng.below(12)) * 0.5 : 0.05 + 5.0 * rng.uniform();
    std::vector<double> z(dim);
    for (auto& v : z) v = rng.uniform(-1.0, 1.0);
    d.push_back({t, !rng.bernoulli(censor_prob), z});
  }
  return d;
}

}  // namespace oracle
