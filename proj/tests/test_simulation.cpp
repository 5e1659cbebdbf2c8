#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "pobs_sl/simulation.hpp"

using namespace pobs_sl;

namespace {

// Closed form: int_0^tau exp(-c t^nu) dt = c^{-1/nu} Gamma(1/nu) P(1/nu, c tau^nu) / nu, c = e^eta / kappa^nu.
double rmst_incomplete_gamma(const SimConfig& cfg, double eta, double tau) {
  const double c = std::exp(eta) / std::pow(cfg.kappa, cfg.nu);
  const double s = 1.0 / cfg.nu;
  return std::pow(c, -s) * std::tgamma(s) * boost::math::gamma_p(s, c * std::pow(tau, cfg.nu)) / cfg.nu;
}

}  // namespace

TEST(SimConfig, DefaultsMatchTheModel) {
  const SimConfig cfg;
  EXPECT_EQ(cfg.kappa, 2.0);
  EXPECT_EQ(cfg.nu, 6.0);
  EXPECT_EQ(cfg.a, 5.0);
  EXPECT_EQ(cfg.beta[0], 2.0);
  EXPECT_EQ(cfg.beta[1], 1.0);
  EXPECT_EQ(cfg.beta[2], 0.0);
  EXPECT_EQ(cfg.lambda_cens, 0.3);
  EXPECT_EQ(cfg.tau_quantile, 0.9);
}

TEST(SelectTau, NearestRank) {
  Dataset d(0);
  for (int t = 10; t >= 1; --t) d.push_back({static_cast<double>(t), true, {}});
  EXPECT_EQ(select_tau(d, 0.9), 9.0);
  EXPECT_EQ(select_tau(d, 0.05), 1.0);
  EXPECT_EQ(select_tau(d, 0.95), 10.0);
  Dataset c(0);
  for (int i = 0; i < 7; ++i) c.push_back({2.5, i % 2 == 0, {}});
  EXPECT_EQ(select_tau(c), 2.5);
  try {
    select_tau(Dataset(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyData);
  }
}

TEST(Simulate, ObservedIsMinimumOfLatentTimes) {
  for (auto scheme : {Scheme::One, Scheme::Two}) {
    SimConfig cfg;
    cfg.scheme = scheme;
    cfg.n = 2000;
    cfg.seed = 3;
    const auto sim = simulate(cfg);
    ASSERT_EQ(sim.observed.size(), 2000u);
    EXPECT_EQ(sim.observed.dim(), covariate_dim(scheme));
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const double te = sim.latent_event_times[i], tc = sim.latent_censor_times[i];
      EXPECT_EQ(sim.observed[i].time, std::min(te, tc));
      EXPECT_EQ(sim.observed[i].event, te <= tc);
      EXPECT_LE(sim.observed[i].time, te);
      EXPECT_LE(sim.observed[i].time, tc);
    }
    EXPECT_LE(sim.tau, sim.observed.max_time());
  }
}

TEST(Simulate, CovariateLaws) {
  SimConfig cfg;
  cfg.scheme = Scheme::Two;
  cfg.n = 20000;
  const auto sim = simulate(cfg);
  for (std::size_t j = 1; j <= 15; ++j) {
    const bool binary = j == 2 || j == 4 || j == 6 || j == 9 || j == 11 || j == 12;
    double mean = 0.0;
    for (const auto& o : sim.observed) {
      const double z = o.covariates[j - 1];
      if (binary)
        EXPECT_TRUE(z == 0.0 || z == 1.0);
      else
        EXPECT_TRUE(z >= 0.0 && z < 1.0);
      mean += z;
    }
    mean /= 20000.0;
    EXPECT_NEAR(mean, binary ? 0.4 : 0.5, 0.02) << "z" << j;
  }
  SimConfig one;
  one.n = 5000;
  for (const auto& o : simulate(one).observed)
    for (double z : o.covariates) EXPECT_TRUE(z >= -5.0 && z < 5.0);
}

TEST(Simulate, SameSeedBitIdenticalDifferentSeedDiffers) {
  SimConfig cfg;
  cfg.n = 300;
  cfg.seed = 77;
  const auto a = simulate(cfg), b = simulate(cfg);
  EXPECT_EQ(a.latent_event_times, b.latent_event_times);
  EXPECT_EQ(a.latent_censor_times, b.latent_censor_times);
  for (std::size_t i = 0; i < cfg.n; ++i) EXPECT_EQ(a.observed[i].covariates, b.observed[i].covariates);
  cfg.seed = 78;
  EXPECT_NE(simulate(cfg).latent_event_times, a.latent_event_times);
  EXPECT_NE(simulate(cfg, 1).latent_event_times, simulate(cfg, 2).latent_event_times);
}

TEST(Simulate, SchemeOneCensoringAndHorizon) {
  SimConfig cfg;
  cfg.n = 100000;
  cfg.seed = 2024;
  const auto sim = simulate(cfg);
  const double censored = 1.0 - static_cast<double>(sim.observed.event_count()) / 1e5;
  EXPECT_NEAR(censored, 0.47, 0.03);
  EXPECT_NEAR(sim.tau, 3.6, 0.2);
}

TEST(Simulate, SchemeTwoHorizon) {
  SimConfig cfg;
  cfg.scheme = Scheme::Two;
  cfg.n = 100000;
  cfg.seed = 2024;
  EXPECT_NEAR(simulate(cfg).tau, 2.8, 0.2);
}

TEST(Simulate, ProbabilityIntegralTransformIsUniform) {
  // S(T* | Z) is U(0,1) when T* is drawn from the conditional law; KS at 1%.
  for (auto scheme : {Scheme::One, Scheme::Two}) {
    SimConfig cfg;
    cfg.scheme = scheme;
    cfg.n = 100000;
    cfg.seed = 5;
    const auto sim = simulate(cfg);
    std::vector<double> u(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i)
      u[i] = true_survival(cfg, linear_predictor(cfg, sim.observed[i].covariates), sim.latent_event_times[i]);
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    const double n = static_cast<double>(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i)
      ks = std::max({ks, std::abs(static_cast<double>(i + 1) / n - u[i]), std::abs(u[i] - static_cast<double>(i) / n)});
    EXPECT_LT(ks, 1.628 / std::sqrt(n));
  }
}

TEST(TrueRmst, ExtremeLinearPredictors) {
  const SimConfig cfg;
  EXPECT_NEAR(true_rmst_eta(cfg, -40.0, 3.6), 3.6, 1e-6);
  // At eta = 40 the horizon is irrelevant: kappa e^{-eta/nu} Gamma(1 + 1/nu), about 2.4e-3.
  EXPECT_NEAR(true_rmst_eta(cfg, 40.0, 3.6), cfg.kappa * std::exp(-40.0 / cfg.nu) * std::tgamma(1.0 + 1.0 / cfg.nu),
              1e-12);
  EXPECT_NEAR(true_rmst_eta(cfg, 200.0, 3.6), 0.0, 1e-6);
  const std::array<double, 3> low{-5.0, -5.0, 0.0};
  EXPECT_LE(true_rmst(cfg, low, 3.6), 3.6);
}

TEST(TrueRmst, MatchesIncompleteGammaClosedForm) {
  SimConfig cfg;
  for (double nu : {1.0, 2.5, 6.0}) {
    cfg.nu = nu;
    for (double eta = -12.0; eta <= 12.0; eta += 0.75)
      for (double tau : {0.5, 2.0, 3.6, 7.0})
        EXPECT_NEAR(true_rmst_eta(cfg, eta, tau), rmst_incomplete_gamma(cfg, eta, tau), 1e-8)
            << "nu=" << nu << " eta=" << eta << " tau=" << tau;
  }
}

TEST(TrueRmst, MonotoneInEtaAndBounded) {
  const SimConfig cfg;
  double prev = 3.6;
  for (double eta = -20.0; eta <= 20.0; eta += 0.1) {
    const double r = true_rmst_eta(cfg, eta, 3.6);
    EXPECT_LE(r, prev + 1e-12);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 3.6);
    prev = r;
  }
}

TEST(TrueRmst, MonteCarloOracleAtOrigin) {
  const SimConfig cfg;
  const std::array<double, 3> z{0.0, 0.0, 0.0};
  // Same inversion as the generator, independently coded.
  Rng rng(99);
  long double sum = 0.0L;
  const std::size_t draws = 10'000'000;
  for (std::size_t i = 0; i < draws; ++i) {
    const double t = cfg.kappa * std::pow(-std::log(rng.uniform_open()), 1.0 / cfg.nu);
    sum += std::min(t, 3.6);
  }
  const double mc = static_cast<double>(sum / static_cast<long double>(draws));
  EXPECT_NEAR(true_rmst(cfg, z, 3.6), mc, 1e-3);
}

TEST(TrueRmst, Errors) {
  const SimConfig cfg;
  const std::array<double, 2> bad{0.0, 0.0};
  try {
    true_rmst(cfg, bad, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
