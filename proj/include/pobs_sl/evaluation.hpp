#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"
#include "pobs_sl/learners.hpp"
#include "pobs_sl/parallel.hpp"
#include "pobs_sl/simulation.hpp"
#include "pobs_sl/super_learner.hpp"
#include "pobs_sl/survival.hpp"

namespace pobs_sl {

/// Cross-validated and (when the data-generating law is known) true risks of
/// a candidate library.
struct RiskReport {
  Vector per_candidate_cv_risk;
  std::optional<Vector> per_candidate_true_risk;
  std::optional<double> optimal_risk;
  std::size_t selected = 0;
  std::optional<std::size_t> oracle;
  std::optional<double> sl_true_risk;
};

/// Recomputes the cross-validated risk of every level-one column and the
/// selector that minimizes it.
inline RiskReport cv_risk_report(const LevelOneData& level1) {
  RiskReport r;
  const auto n = level1.targets.size();
  r.per_candidate_cv_risk.resize(level1.predictions.cols());
  for (Eigen::Index k = 0; k < level1.predictions.cols(); ++k) {
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i) {
      const long double e = level1.targets(i) - level1.predictions(i, k);
      acc += e * e;
    }
    r.per_candidate_cv_risk(k) = static_cast<double>(acc / static_cast<long double>(n));
  }
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < r.per_candidate_cv_risk.size(); ++k)
    if (r.per_candidate_cv_risk(k) < r.per_candidate_cv_risk(best)) best = k;
  r.selected = static_cast<std::size_t>(best);
  return r;
}

/// Monte Carlo estimate of the cross-validated conditional risk of every
/// candidate, against restricted latent event times of a fresh sample.
struct TrueRisk {
  Vector risk;          // per candidate, averaged over rotations
  Vector gap_stderr;    // MC standard error of risk(k) - optimal (paired)
  double optimal = 0.0; // risk of the true conditional RMST
  double optimal_stderr = 0.0;
};

/// A fresh test sample with latent truth: restricted outcomes, covariates and
/// the true conditional RMST of every row.
struct TruthSample {
  Matrix x;
  Vector restricted_time;  // min(T*, tau)
  Vector optimal;          // E[min(T*, tau) | Z]
};

inline TruthSample truth_sample(const SimConfig& sim, double tau, std::size_t test_n, std::uint64_t stream) {
  SimConfig cfg = sim;
  cfg.n = test_n;
  const auto s = simulate(cfg, stream);
  TruthSample t;
  t.x = s.observed.covariate_matrix();
  t.restricted_time.resize(static_cast<Eigen::Index>(test_n));
  t.optimal.resize(static_cast<Eigen::Index>(test_n));
  for (std::size_t i = 0; i < test_n; ++i) {
    t.restricted_time(static_cast<Eigen::Index>(i)) = std::min(s.latent_event_times[i], tau);
    t.optimal(static_cast<Eigen::Index>(i)) = true_rmst(cfg, s.observed[i].covariates, tau);
  }
  return t;
}

namespace detail {

inline double mean_and_stderr(const Vector& v, double& stderr_out) {
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  const double var = v.size() > 1 ? (v.array() - mean).square().sum() / (n - 1.0) : 0.0;
  stderr_out = std::sqrt(var / n);
  return mean;
}

}  // namespace detail

inline TrueRisk true_conditional_risk(const std::vector<std::vector<FittedModel>>& fold_models,
                                      const TruthSample& truth, std::optional<double> clamp_tau = std::nullopt) {
  if (fold_models.empty()) throw Error(ErrorCode::EmptyData, "evaluation", "true_conditional_risk: no rotations");
  const std::size_t K = fold_models.front().size();
  const auto m = truth.x.rows();
  const Vector opt_loss = (truth.restricted_time - truth.optimal).array().square();

  TrueRisk out;
  out.risk.resize(static_cast<Eigen::Index>(K));
  out.gap_stderr.resize(static_cast<Eigen::Index>(K));
  out.optimal = detail::mean_and_stderr(opt_loss, out.optimal_stderr);
  for (std::size_t k = 0; k < K; ++k) {
    Vector loss = Vector::Zero(m);
    for (const auto& rotation : fold_models)
      loss += (truth.restricted_time - predict(rotation.at(k), truth.x, clamp_tau)).array().square().matrix();
    loss /= static_cast<double>(fold_models.size());
    out.risk(static_cast<Eigen::Index>(k)) = loss.mean();
    double se = 0.0;
    detail::mean_and_stderr(loss - opt_loss, se);
    out.gap_stderr(static_cast<Eigen::Index>(k)) = se;
  }
  return out;
}

/// Convenience overload drawing the test sample from `stream` of sim.seed.
inline TrueRisk true_conditional_risk(const std::vector<std::vector<FittedModel>>& fold_models, const SimConfig& sim,
                                      double tau, std::size_t test_n, std::uint64_t stream,
                                      std::optional<double> clamp_tau = std::nullopt) {
  return true_conditional_risk(fold_models, truth_sample(sim, tau, test_n, stream), clamp_tau);
}

/// Constants of the finite-sample oracle bound for loss bound M and gamma > 0.
struct BoundConstants {
  double M1, M2, c;
};

inline BoundConstants bound_constants(double M, double gamma) {
  const double M1 = 8.0 * M * M;
  const double M2 = 16.0 * M * M;
  const double c = 2.0 * (1.0 + gamma) * (1.0 + gamma) * (M1 / 3.0 + M2 / gamma);
  return {M1, M2, c};
}

/// 2 c(M, gamma) (1 + log K) / (n p).
inline double bound_penalty(double M, double gamma, std::size_t K, double n_times_p) {
  return 2.0 * bound_constants(M, gamma).c * (1.0 + std::log(static_cast<double>(K))) / n_times_p;
}

struct BoundAudit {
  double gamma = 1.0;
  double M = 1.0;
  double M1 = 0.0, M2 = 0.0, c = 0.0;
  double lhs = 0.0;         // MC mean of theta~(k^) - theta*
  double rhs = 0.0;         // (1 + 2 gamma) * MC mean of (theta~(k~) - theta*) + penalty
  double penalty = 0.0;
  double diff_stderr = 0.0; // MC standard error of lhs - rhs
  bool violated = false;    // lhs - rhs > 2 * diff_stderr
  std::size_t replications = 0;
};

struct AuditReplication {
  std::size_t selected = 0;  // k^ from cross-validated split pseudo-observation risks
  std::size_t oracle = 0;    // k~ from true conditional risks
  Vector cv_risk;
  Vector true_risk;
  Vector gap_stderr;
  double optimal_risk = 0.0;
  double optimal_stderr = 0.0;
  bool dominance = false;    // theta~(k~) <= theta~(k^)
  bool above_optimum = false;// theta~(k) >= theta* - 2 stderr for every k
  std::size_t redraws = 0;   // training samples discarded because tau was not estimable on them
};

struct AuditOptions {
  std::size_t n = 200;
  std::size_t folds = 6;
  std::vector<double> gammas{0.5, 1.0, 2.0};
  std::optional<double> M;       // defaults to tau
  std::optional<double> tau;     // defaults to the population quantile from a pilot sample
  std::size_t replications = 50;
  std::size_t test_n = 10000;
  std::size_t pilot_n = 100000;
  bool clamp = true;
  std::size_t threads = 1;
};

struct AuditReport {
  double tau = 0.0;
  double M = 0.0;
  std::size_t K = 0;
  double n_times_p = 0.0;
  std::vector<AuditReplication> rows;
  std::vector<BoundAudit> bounds;
  double dominance_rate = 0.0;
  double above_optimum_rate = 0.0;
};

// Substreams of the simulation seed used by the audit.
inline constexpr std::uint64_t kPilotStream = 0x9170;
inline constexpr std::uint64_t kTrainStreamBase = 1'000'000;
inline constexpr std::uint64_t kTestStreamBase = 2'000'000;
inline constexpr std::uint64_t kRedrawStride = 10'000'000;
inline constexpr std::size_t kMaxRedraws = 100;

namespace detail {

// Failures that mean the sample cannot support the fixed horizon (tau beyond a
// fold's follow-up, or a fold without events), as opposed to bugs or bad input.
inline bool horizon_not_estimable(const Error& e) {
  switch (e.code()) {
    case ErrorCode::TauOutOfRange:
    case ErrorCode::DegenerateKMFold:
    case ErrorCode::DegenerateJackknife:
    case ErrorCode::AllCensored:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

/// Population tau: the configured quantile of observed times in a large pilot sample.
inline double pilot_tau(const SimConfig& sim, std::size_t pilot_n) {
  SimConfig cfg = sim;
  cfg.n = pilot_n;
  return simulate(cfg, kPilotStream).tau;
}

/// Runs the split pseudo-observation super learner on independent simulated
/// datasets and reports both sides of the finite-sample oracle bound, with the
/// true optimum theta* standing in for the pseudo-observation optimum.
inline AuditReport audit_oracle_inequality(const SimConfig& sim, std::span<const LearnerSpec> library,
                                           const AuditOptions& opt) {
  if (!opt.clamp)
    throw Error(ErrorCode::ClampRequired, "evaluation",
                "audit: the bound assumes |pseudo-value| <= M and |prediction| <= M; enable clamp mode");
  if (opt.replications < 10) throw Error(ErrorCode::Schema, "evaluation", "audit: need at least 10 replications");
  if (library.empty()) throw Error(ErrorCode::Schema, "evaluation", "audit: empty learner library");

  AuditReport rep;
  rep.tau = opt.tau ? *opt.tau : pilot_tau(sim, opt.pilot_n);
  rep.M = opt.M ? *opt.M : rep.tau;
  if (rep.M < rep.tau)
    throw Error(ErrorCode::Schema, "evaluation", "audit: M must be at least tau when values are clamped to [0, tau]");
  rep.K = library.size();
  rep.n_times_p = static_cast<double>(opt.n) / static_cast<double>(opt.folds);
  rep.rows.resize(opt.replications);

  parallel_for(opt.replications, opt.threads, [&](std::size_t r) {
    SimConfig cfg = sim;
    cfg.n = opt.n;
    const auto folds = make_folds(opt.n, opt.folds, Rng::derive_seed(sim.seed, r));
    LevelOneOptions lo;
    lo.clamp = true;
    lo.keep_fold_models = true;
    LevelOneData level1;
    std::size_t redraws = 0;
    for (;; ++redraws) {
      // A sample on which some fold cannot reach tau is replaced by a fresh
      // draw from a disjoint substream.
      const auto data = simulate(cfg, kTrainStreamBase + r + redraws * kRedrawStride);
      try {
        level1 = cv_level_one_split(data.observed, library, folds, rep.tau, lo);
        break;
      } catch (const Error& e) {
        if (!detail::horizon_not_estimable(e) || redraws + 1 >= kMaxRedraws) throw;
      }
    }
    const auto truth = true_conditional_risk(level1.fold_models, sim, rep.tau, opt.test_n, kTestStreamBase + r, rep.tau);

    auto& row = rep.rows[r];
    row.redraws = redraws;
    row.cv_risk = level1.cv_risks;
    row.selected = select_discrete(level1);
    row.true_risk = truth.risk;
    row.gap_stderr = truth.gap_stderr;
    row.optimal_risk = truth.optimal;
    row.optimal_stderr = truth.optimal_stderr;
    Eigen::Index oracle = 0;
    for (Eigen::Index k = 1; k < truth.risk.size(); ++k)
      if (truth.risk(k) < truth.risk(oracle)) oracle = k;
    row.oracle = static_cast<std::size_t>(oracle);
    row.dominance = truth.risk(oracle) <= truth.risk(static_cast<Eigen::Index>(row.selected));
    row.above_optimum = true;
    for (Eigen::Index k = 0; k < truth.risk.size(); ++k)
      if (truth.risk(k) < truth.optimal - 2.0 * truth.gap_stderr(k)) row.above_optimum = false;
  });

  const double R = static_cast<double>(opt.replications);
  for (const auto& row : rep.rows) {
    rep.dominance_rate += row.dominance ? 1.0 : 0.0;
    rep.above_optimum_rate += row.above_optimum ? 1.0 : 0.0;
  }
  rep.dominance_rate /= R;
  rep.above_optimum_rate /= R;

  for (double gamma : opt.gammas) {
    BoundAudit b;
    b.gamma = gamma;
    b.M = rep.M;
    const auto cst = bound_constants(rep.M, gamma);
    b.M1 = cst.M1;
    b.M2 = cst.M2;
    b.c = cst.c;
    b.penalty = bound_penalty(rep.M, gamma, rep.K, rep.n_times_p);
    b.replications = opt.replications;
    Vector selected_gap(static_cast<Eigen::Index>(opt.replications));
    Vector oracle_gap(static_cast<Eigen::Index>(opt.replications));
    for (std::size_t r = 0; r < opt.replications; ++r) {
      const auto& row = rep.rows[r];
      selected_gap(static_cast<Eigen::Index>(r)) = row.true_risk(static_cast<Eigen::Index>(row.selected)) - row.optimal_risk;
      oracle_gap(static_cast<Eigen::Index>(r)) = row.true_risk(static_cast<Eigen::Index>(row.oracle)) - row.optimal_risk;
    }
    b.lhs = selected_gap.mean();
    b.rhs = (1.0 + 2.0 * gamma) * oracle_gap.mean() + b.penalty;
    const Vector diff = selected_gap - (1.0 + 2.0 * gamma) * oracle_gap;
    detail::mean_and_stderr(diff, b.diff_stderr);
    b.violated = b.lhs - b.rhs > 2.0 * b.diff_stderr;
    rep.bounds.push_back(b);
  }
  return rep;
}

/// IPCW weights Delta_i(tau) / G(min(t_i, tau)-), where Delta_i(tau) = 1 when
/// the event was seen or follow-up reached tau, and G is the product-limit
/// curve of the censoring times.
inline std::vector<double> ipcw_weights(const Dataset& data, double tau) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "evaluation", "wrss: no rows");
  if (!(tau > 0.0) || tau > data.max_time())
    throw Error(ErrorCode::TauOutOfRange, "evaluation", "wrss: tau must lie in (0, max observed time]");
  Dataset flipped(data.dim());
  for (const auto& o : data) flipped.push_back(Observation{o.time, !o.event, o.covariates});
  const bool any_censored = flipped.has_event();
  const SurvivalCurve g = any_censored ? km_fit(flipped) : SurvivalCurve{};

  std::vector<double> w(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data[i];
    const bool observed = o.event || o.time >= tau;
    if (!observed) continue;
    const double g_left = survival_before(g, std::min(o.time, tau));
    if (g_left <= 0.0)
      throw Error(ErrorCode::ZeroCensorWeight, "evaluation",
                  "wrss: censoring survival is zero before t=" + std::to_string(o.time));
    w[i] = 1.0 / g_left;
  }
  return w;
}

/// Weighted residual sum of squares: (1/n) sum_i w_i (min(t_i, tau) - pred_i)^2.
inline double wrss(const Dataset& data, const Vector& predictions, double tau) {
  if (static_cast<std::size_t>(predictions.size()) != data.size())
    throw Error(ErrorCode::DimensionMismatch, "evaluation", "wrss: one prediction per row required");
  const auto w = ipcw_weights(data, tau);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    const long double e = std::min(data[i].time, tau) - predictions(static_cast<Eigen::Index>(i));
    acc += static_cast<long double>(w[i]) * e * e;
  }
  return static_cast<double>(acc / static_cast<long double>(data.size()));
}

}  // namespace pobs_sl
