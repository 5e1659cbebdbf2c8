#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"
#include "pobs_sl/rng.hpp"

namespace pobs_sl {

enum class Scheme { One, Two };

/// Cox model with Weibull baseline, S(t | Z) = exp(-(t / kappa)^nu * exp(eta(Z))),
/// and independent exponential censoring with rate lambda_cens.
///   Scheme One: Z ~ U[-a, a]^3, eta = beta'Z.
///   Scheme Two: 15 covariates, eta = g(Z) with pairwise interactions of Z1..Z10.
struct SimConfig {
  Scheme scheme = Scheme::One;
  double kappa = 2.0;
  double nu = 6.0;
  double a = 5.0;
  std::array<double, 3> beta{2.0, 1.0, 0.0};
  double lambda_cens = 0.3;
  std::size_t n = 200;
  std::uint64_t seed = 1;
  double tau_quantile = 0.9;
};

struct SimulatedDataset {
  Dataset observed;
  std::vector<double> latent_event_times;
  std::vector<double> latent_censor_times;
  double tau = 0.0;
};

inline std::size_t covariate_dim(Scheme s) { return s == Scheme::One ? 3 : 15; }

/// eta(z): beta'z for scheme One, g(z) for scheme Two.
inline double linear_predictor(const SimConfig& cfg, std::span<const double> z) {
  if (z.size() != covariate_dim(cfg.scheme))
    throw Error(ErrorCode::DimensionMismatch, "simulation",
                "expected " + std::to_string(covariate_dim(cfg.scheme)) + " covariates, got " +
                    std::to_string(z.size()));
  if (cfg.scheme == Scheme::One) return cfg.beta[0] * z[0] + cfg.beta[1] * z[1] + cfg.beta[2] * z[2];
  auto Z = [&](int j) { return z[static_cast<std::size_t>(j - 1)]; };  // 1-based, as in the model formula
  return Z(3) - 3.0 * Z(5) + 2.0 * Z(1) * Z(10) + 4.0 * Z(2) * Z(7) + 3.0 * Z(4) * Z(5) - 5.0 * Z(6) * Z(10) +
         3.0 * Z(8) * Z(9) + Z(1) * Z(4) - 2.0 * Z(6) * Z(9) - 4.0 * Z(3) * Z(4) - Z(7) * Z(8);
}

/// Nearest-rank (type 1) empirical quantile of the observed times.
inline double select_tau(const Dataset& data, double q = 0.9) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "simulation", "select_tau: no rows");
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::Schema, "simulation", "select_tau: quantile must be in (0, 1)");
  auto t = data.times();
  std::sort(t.begin(), t.end());
  const double n = static_cast<double>(t.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9 * n));
  rank = std::clamp<std::size_t>(rank, 1, t.size());
  return t[rank - 1];
}

/// Draws n rows from substream `stream` of the configured seed. Per row the
/// draws are: covariates in index order, the event-time uniform, then the
/// censoring uniform.
inline SimulatedDataset simulate(const SimConfig& cfg, std::uint64_t stream = 0) {
  Rng rng(cfg.seed, stream);
  const std::size_t d = covariate_dim(cfg.scheme);
  SimulatedDataset out;
  out.observed = Dataset(d);
  out.latent_event_times.reserve(cfg.n);
  out.latent_censor_times.reserve(cfg.n);
  const double log_kappa = std::log(cfg.kappa);

  for (std::size_t i = 0; i < cfg.n; ++i) {
    std::vector<double> z(d);
    if (cfg.scheme == Scheme::One) {
      for (auto& v : z) v = rng.uniform(-cfg.a, cfg.a);
    } else {
      for (std::size_t j = 1; j <= d; ++j) {
        const bool binary = j == 2 || j == 4 || j == 6 || j == 9 || j == 11 || j == 12;
        z[j - 1] = binary ? (rng.bernoulli(0.4) ? 1.0 : 0.0) : rng.uniform();
      }
    }
    const double eta = linear_predictor(cfg, z);
    // Inversion of S(t|z) in log space: log T* = log kappa + (log(-log U) - eta) / nu.
    const double e = -std::log(rng.uniform_open());
    const double t_event = std::exp(log_kappa + (std::log(e) - eta) / cfg.nu);
    const double t_cens = rng.exponential(cfg.lambda_cens);
    out.latent_event_times.push_back(t_event);
    out.latent_censor_times.push_back(t_cens);
    out.observed.push_back(Observation{std::min(t_event, t_cens), t_event <= t_cens, std::move(z)});
  }
  if (cfg.n > 0) out.tau = select_tau(out.observed, cfg.tau_quantile);
  return out;
}

/// Conditional survival S(t | eta) of the simulation model.
inline double true_survival(const SimConfig& cfg, double eta, double t) {
  if (t <= 0.0) return 1.0;
  return std::exp(-std::exp(cfg.nu * (std::log(t) - std::log(cfg.kappa)) + eta));
}

/// E[min(T*, tau) | Z = z] by adaptive Gauss-Kronrod quadrature of S(t | z).
/// Past the point where (t/kappa)^nu e^eta = 45 the integrand is below 3e-20
/// and is dropped; integrating the flat tail only stalls the error estimate.
inline double true_rmst_eta(const SimConfig& cfg, double eta, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::TauOutOfRange, "simulation", "true_rmst: tau must be positive");
  const double t_cut = std::exp(std::log(cfg.kappa) + (std::log(45.0) - eta) / cfg.nu);
  const double upper = std::min(tau, t_cut);
  auto f = [&](double t) { return true_survival(cfg, eta, t); };
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, upper, 15, 1e-11);
  return std::clamp(value, 0.0, tau);
}

inline double true_rmst(const SimConfig& cfg, std::span<const double> z, double tau) {
  return true_rmst_eta(cfg, linear_predictor(cfg, z), tau);
}

}  // namespace pobs_sl
