#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pobs_sl/cli/config.hpp"
#include "pobs_sl/io.hpp"
#include "pobs_sl/pobs_sl.hpp"

namespace pobs_sl::cli {

namespace detail {

inline constexpr std::uint64_t kSplitPartitionStream = 0x5b17;
inline constexpr std::uint64_t kFreshTruthStream = 0xE7A1;

inline std::string output_path(const RunConfig& c, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw Error(ErrorCode::IO, "cli", "cannot create output directory '" + c.out + "': " + ec.message());
  return (std::filesystem::path(c.out) / name).string();
}

inline const std::string& required(const std::optional<std::string>& v, const char* what) {
  if (!v) throw Error(ErrorCode::Schema, "cli", std::string("missing required setting '") + what + "'");
  return *v;
}

inline double horizon(const RunConfig& c, const Dataset& data) {
  return c.tau ? *c.tau : select_tau(data, c.tau_quantile);
}

inline std::string fmt(double v) { return io::format_double(v); }

// Fixed-precision text for human-readable tables.
inline std::string fixed(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

inline std::string learner_label(const LearnerSpec& s) {
  std::string out = s.name;
  const auto& defaults = with_defaults(LearnerSpec{s.name, {}});
  std::string extra;
  for (const auto& [k, v] : s.params) {
    if (defaults.params.at(k) == v) continue;
    if (!extra.empty()) extra += ",";
    extra += k + "=" + fmt(v);
  }
  return extra.empty() ? out : out + "(" + extra + ")";
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline SuperLearnerModel read_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
    return j.get<SuperLearnerModel>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, "cli", path + ": not a model file: " + e.what());
  }
}

}  // namespace detail

/// simulate: data.csv (time, event, z1..zd) and truth.json (latent times, tau, settings).
inline void cmd_simulate(const RunConfig& c) {
  const auto sim = simulate(c.simulation);
  io::write_file(detail::output_path(c, "data.csv"), io::format_dataset(sim.observed));
  nlohmann::json truth;
  truth["format"] = "pobs-sl-truth/1";
  truth["seed"] = c.seed;
  truth["simulation"] = simulation_json(c.simulation);
  truth["tau"] = sim.tau;
  truth["latent_event_times"] = sim.latent_event_times;
  truth["latent_censor_times"] = sim.latent_censor_times;
  io::write_file(detail::output_path(c, "truth.json"), detail::dump(truth));
}

/// pobs: pobs.csv with one gamma per row (standard) or per evaluation row (split).
inline void cmd_pobs(const RunConfig& c) {
  const auto data = io::read_dataset(detail::required(c.data, "data"));
  if (data.empty()) throw Error(ErrorCode::EmptyData, "cli", "pobs: no rows");
  const double tau = detail::horizon(c, data);
  std::vector<std::size_t> rows;
  PseudoObservationSet set;
  std::string header;
  if (c.pobs.kind == "standard") {
    set = standard_pobs(data, tau);
    rows.resize(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    header = "# kind=standard tau=" + detail::fmt(tau) + " n=" + std::to_string(data.size()) + "\n";
  } else {
    const std::size_t n = data.size();
    if (n < 2) throw Error(ErrorCode::EmptyData, "cli", "pobs: split kind needs at least 2 rows");
    const auto n2 = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(c.pobs.split_ratio * static_cast<double>(n))), 1, n - 1);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(c.seed, detail::kSplitPartitionStream);
    rng.shuffle(perm);
    rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n2));
    std::vector<std::size_t> km(perm.begin() + static_cast<std::ptrdiff_t>(n2), perm.end());
    std::sort(rows.begin(), rows.end());
    std::sort(km.begin(), km.end());
    set = split_pobs(data.subset(km), data.subset(rows), tau);
    header = "# kind=split tau=" + detail::fmt(tau) + " n1=" + std::to_string(km.size()) +
             " n2=" + std::to_string(n2) + "\n";
  }
  std::string out = header + "index,time,event,gamma\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& o = data[rows[r]];
    out += std::to_string(rows[r]) + "," + detail::fmt(o.time) + (o.event ? ",1," : ",0,") +
           detail::fmt(set.values[r]) + "\n";
  }
  io::write_file(detail::output_path(c, "pobs.csv"), out);
}

/// fit: model.json holding the fitted super learner.
inline void cmd_fit(const RunConfig& c) {
  const auto data = io::read_dataset(detail::required(c.data, "data"));
  if (data.empty()) throw Error(ErrorCode::EmptyData, "cli", "fit: no rows");
  const double tau = detail::horizon(c, data);
  SuperLearnerOptions opt;
  opt.folds = c.super_learner.folds;
  opt.mode = c.super_learner.mode;
  opt.algorithm = c.super_learner.algorithm;
  opt.clamp = c.super_learner.clamp;
  opt.seed = c.seed;
  opt.threads = c.threads;
  const auto model = fit_super_learner(data, c.super_learner.library, tau, opt);
  io::write_file(detail::output_path(c, "model.json"), detail::dump(nlohmann::json(model)));
}

/// predict: predictions.csv (index, prediction) for the covariates in `data`.
inline void cmd_predict(const RunConfig& c) {
  const auto model = detail::read_model(detail::required(c.model, "model"));
  const auto data = io::read_dataset(detail::required(c.data, "data"), false);
  const Vector pred = sl_predict(model, data.covariate_matrix());
  std::string out = "index,prediction\n";
  for (Eigen::Index i = 0; i < pred.size(); ++i) out += std::to_string(i) + "," + detail::fmt(pred(i)) + "\n";
  io::write_file(detail::output_path(c, "predictions.csv"), out);
}

namespace detail {

struct TruthFile {
  SimConfig simulation;
  std::vector<double> latent_event_times;
};

inline TruthFile read_truth(const std::string& path) {
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "pobs-sl-truth/1")
      throw Error(ErrorCode::Parse, "cli", path + ": not a truth file written by simulate");
    TruthFile t;
    t.simulation = parse_simulation_json(j.at("simulation"));
    t.simulation.seed = j.at("seed").get<std::uint64_t>();
    t.latent_event_times = j.at("latent_event_times").get<std::vector<double>>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, "cli", path + ": " + e.what());
  }
}

inline double mean_sq(const Vector& a, const Vector& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

}  // namespace detail

/// evaluate: report.json / report.txt with IPCW WRSS of the super learner and
/// its final candidates on `data`, plus latent-truth risks when a truth file
/// from `simulate` is given.
inline void cmd_evaluate(const RunConfig& c) {
  const auto model = detail::read_model(detail::required(c.model, "model"));
  const auto data = io::read_dataset(detail::required(c.data, "data"));
  const double tau = model.tau;
  const Matrix x = data.covariate_matrix();
  const std::optional<double> clamp = model.clamp ? std::optional<double>(tau) : std::nullopt;
  const Vector sl = sl_predict(model, x);

  nlohmann::json rep;
  rep["format"] = "pobs-sl-report/1";
  rep["tau"] = tau;
  rep["n"] = data.size();
  rep["censored_fraction"] = 1.0 - static_cast<double>(data.event_count()) / static_cast<double>(data.size());
  rep["wrss_weights"] =
      "w_i = Delta_i(tau) / G(min(t_i, tau)-), Delta_i(tau) = 1 if the event was observed or t_i >= tau; "
      "G = Kaplan-Meier curve of the censoring times";
  rep["super_learner"] = {{"mode", model.mode}, {"algorithm", model.algorithm}, {"wrss", wrss(data, sl, tau)}};

  std::vector<std::optional<Vector>> cand_pred(model.library.size());
  if (model.mode == SlMode::Continuous) {
    for (std::size_t k = 0; k < model.library.size(); ++k) cand_pred[k] = predict(model.final_models[k], x, clamp);
  } else {
    cand_pred[model.selected] = predict(model.final_models.at(0), x, clamp);
  }
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t k = 0; k < model.library.size(); ++k) {
    nlohmann::json e{{"learner", model.library[k]},
                     {"weight", model.weights(static_cast<Eigen::Index>(k))},
                     {"cv_risk", model.cv_risks(static_cast<Eigen::Index>(k))}};
    e["wrss"] = cand_pred[k] ? nlohmann::json(wrss(data, *cand_pred[k], tau)) : nlohmann::json(nullptr);
    cands.push_back(e);
  }

  std::optional<detail::TruthFile> truth;
  if (c.truth) {
    truth = detail::read_truth(*c.truth);
    if (truth->latent_event_times.size() != data.size())
      throw Error(ErrorCode::DimensionMismatch, "cli", "evaluate: truth file and data have different row counts");
    if (covariate_dim(truth->simulation.scheme) != data.dim())
      throw Error(ErrorCode::DimensionMismatch, "cli", "evaluate: truth file scheme does not match data covariates");
    // Risks against the latent times of these rows.
    Vector restricted(x.rows()), optimal(x.rows());
    for (std::size_t i = 0; i < data.size(); ++i) {
      restricted(static_cast<Eigen::Index>(i)) = std::min(truth->latent_event_times[i], tau);
      optimal(static_cast<Eigen::Index>(i)) = true_rmst(truth->simulation, data[i].covariates, tau);
    }
    // Risks on a fresh sample from the same law.
    const auto fresh = truth_sample(truth->simulation, tau, c.evaluate.test_n, detail::kFreshTruthStream);
    const Vector fresh_sl = sl_predict(model, fresh.x);
    rep["true_risk"] = {{"optimal", detail::mean_sq(restricted, optimal)},
                        {"super_learner", detail::mean_sq(restricted, sl)},
                        {"fresh_test_n", c.evaluate.test_n},
                        {"fresh_optimal", detail::mean_sq(fresh.restricted_time, fresh.optimal)},
                        {"fresh_super_learner", detail::mean_sq(fresh.restricted_time, fresh_sl)}};
    for (std::size_t k = 0; k < model.library.size(); ++k) {
      if (!cand_pred[k]) {
        cands[k]["true_risk"] = nullptr;
        cands[k]["fresh_true_risk"] = nullptr;
        continue;
      }
      const auto& fm = model.mode == SlMode::Continuous ? model.final_models[k] : model.final_models.at(0);
      cands[k]["true_risk"] = detail::mean_sq(restricted, *cand_pred[k]);
      cands[k]["fresh_true_risk"] = detail::mean_sq(fresh.restricted_time, predict(fm, fresh.x, clamp));
    }
  }
  rep["candidates"] = cands;
  io::write_file(detail::output_path(c, "report.json"), detail::dump(rep));

  std::ostringstream txt;
  txt << "tau " << detail::fixed(tau) << "  n " << data.size() << "  censored "
      << detail::fixed(rep["censored_fraction"].get<double>(), 3) << "\n";
  txt << "WRSS weights: " << rep["wrss_weights"].get<std::string>() << "\n\n";
  txt << detail::pad("learner", 34) << detail::pad("weight", 12) << detail::pad("cv_risk", 12)
      << detail::pad("wrss", 12) << (truth ? "true_risk   fresh_risk" : "") << "\n";
  auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string("-") : detail::fixed(v.get<double>()); };
  for (std::size_t k = 0; k < model.library.size(); ++k) {
    txt << detail::pad(detail::learner_label(model.library[k]), 34) << detail::pad(cell(cands[k]["weight"]), 12)
        << detail::pad(cell(cands[k]["cv_risk"]), 12) << detail::pad(cell(cands[k]["wrss"]), 12);
    if (truth) txt << detail::pad(cell(cands[k]["true_risk"]), 12) << cell(cands[k]["fresh_true_risk"]);
    txt << "\n";
  }
  txt << detail::pad("super learner", 34) << detail::pad("", 12) << detail::pad("", 12)
      << detail::pad(cell(rep["super_learner"]["wrss"]), 12);
  if (truth)
    txt << detail::pad(cell(rep["true_risk"]["super_learner"]), 12) << cell(rep["true_risk"]["fresh_super_learner"]);
  txt << "\n";
  if (truth)
    txt << detail::pad("optimum (true conditional RMST)", 70) << detail::pad(cell(rep["true_risk"]["optimal"]), 12)
        << cell(rep["true_risk"]["fresh_optimal"]) << "\n";
  io::write_file(detail::output_path(c, "report.txt"), txt.str());
}

/// audit: audit.json / audit.txt with both sides of the finite-sample oracle
/// bound and per-replication rows.
inline void cmd_audit(const RunConfig& c) {
  const auto rep = audit_oracle_inequality(c.simulation, c.super_learner.library, c.audit);
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["format"] = "pobs-sl-audit/1";
  j["note"] =
      "theta* (risk of the true conditional RMST, Monte Carlo on fresh latent-truth samples) stands in for the "
      "pseudo-observation optimum; the audited gap therefore omits the pseudo-observation remainder terms";
  j["simulation"] = simulation_json(c.simulation);
  j["seed"] = c.seed;
  j["library"] = c.super_learner.library;
  j["tau"] = rep.tau;
  j["M"] = rep.M;
  j["K"] = rep.K;
  j["n"] = c.audit.n;
  j["folds"] = c.audit.folds;
  j["n_times_p"] = rep.n_times_p;
  j["test_n"] = c.audit.test_n;
  j["dominance_rate"] = rep.dominance_rate;
  j["above_optimum_rate"] = rep.above_optimum_rate;
  j["bounds"] = nlohmann::json::array();
  for (const auto& b : rep.bounds)
    j["bounds"].push_back({{"gamma", b.gamma},
                           {"M", b.M},
                           {"M1", b.M1},
                           {"M2", b.M2},
                           {"c", b.c},
                           {"lhs", b.lhs},
                           {"rhs", b.rhs},
                           {"penalty", b.penalty},
                           {"diff_stderr", b.diff_stderr},
                           {"violated", b.violated},
                           {"replications", b.replications}});
  j["replications"] = nlohmann::json::array();
  for (const auto& r : rep.rows)
    j["replications"].push_back({{"selected", r.selected},
                                 {"oracle", r.oracle},
                                 {"cv_risk", vec(r.cv_risk)},
                                 {"true_risk", vec(r.true_risk)},
                                 {"gap_stderr", vec(r.gap_stderr)},
                                 {"optimal_risk", r.optimal_risk},
                                 {"optimal_stderr", r.optimal_stderr},
                                 {"dominance", r.dominance},
                                 {"above_optimum", r.above_optimum},
                                 {"redraws", r.redraws}});
  io::write_file(detail::output_path(c, "audit.json"), detail::dump(j));

  std::ostringstream txt;
  txt << "tau " << detail::fixed(rep.tau) << "  M " << detail::fixed(rep.M) << "  K " << rep.K << "  n*p "
      << detail::fixed(rep.n_times_p, 3) << "  replications " << rep.rows.size() << "\n";
  txt << "dominance rate " << detail::fixed(rep.dominance_rate, 3) << "  above-optimum rate "
      << detail::fixed(rep.above_optimum_rate, 3) << "\n";
  txt << "note: " << j["note"].get<std::string>() << "\n\n";
  txt << detail::pad("gamma", 8) << detail::pad("c", 14) << detail::pad("lhs", 12) << detail::pad("rhs", 14)
      << detail::pad("penalty", 14) << detail::pad("2*stderr", 12) << "violated\n";
  for (const auto& b : rep.bounds)
    txt << detail::pad(detail::fixed(b.gamma, 3), 8) << detail::pad(detail::fixed(b.c, 4), 14)
        << detail::pad(detail::fixed(b.lhs), 12) << detail::pad(detail::fixed(b.rhs, 4), 14)
        << detail::pad(detail::fixed(b.penalty, 4), 14) << detail::pad(detail::fixed(2.0 * b.diff_stderr), 12)
        << (b.violated ? "yes" : "no") << "\n";
  txt << "\n" << detail::pad("rep", 6) << detail::pad("selected", 10) << detail::pad("oracle", 8)
      << detail::pad("risk(selected)", 16) << detail::pad("risk(oracle)", 14) << "optimum\n";
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    const auto& row = rep.rows[r];
    txt << detail::pad(std::to_string(r), 6) << detail::pad(std::to_string(row.selected), 10)
        << detail::pad(std::to_string(row.oracle), 8)
        << detail::pad(detail::fixed(row.true_risk(static_cast<Eigen::Index>(row.selected))), 16)
        << detail::pad(detail::fixed(row.true_risk(static_cast<Eigen::Index>(row.oracle))), 14)
        << detail::fixed(row.optimal_risk) << "\n";
  }
  io::write_file(detail::output_path(c, "audit.txt"), txt.str());
}

/// bench: timings of the pseudo-observation routes and a super-learner fit,
/// printed to stdout; bench.json keeps only the deterministic checksums.
inline void cmd_bench(const RunConfig& c, std::ostream& log = std::cout) {
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  nlohmann::json j;
  j["format"] = "pobs-sl-bench/1";
  j["runs"] = nlohmann::json::array();
  log << detail::pad("n", 8) << detail::pad("fast_ms", 12) << detail::pad("naive_ms", 12) << detail::pad("sl_fit_ms", 12)
      << "max_abs_diff\n";
  for (std::size_t n : c.bench.sizes) {
    SimConfig sim = c.simulation;
    sim.n = n;
    const auto data = simulate(sim).observed;
    const double tau = select_tau(data, c.tau_quantile);
    double fast_ms = 0.0, naive_ms = 0.0, sl_ms = 0.0;
    PseudoObservationSet fast, naive;
    Vector sl_pred;
    for (std::size_t r = 0; r < c.bench.repeats; ++r) {
      auto t0 = clock::now();
      fast = standard_pobs(data, tau);
      auto t1 = clock::now();
      naive = standard_pobs_naive(data, tau);
      auto t2 = clock::now();
      SuperLearnerOptions opt;
      opt.folds = c.super_learner.folds;
      opt.mode = c.super_learner.mode;
      opt.algorithm = c.super_learner.algorithm;
      opt.clamp = c.super_learner.clamp;
      opt.seed = c.seed;
      opt.threads = c.threads;
      const auto model = fit_super_learner(data, c.super_learner.library, tau, opt);
      sl_pred = sl_predict(model, data.covariate_matrix());
      auto t3 = clock::now();
      fast_ms += ms(t1 - t0);
      naive_ms += ms(t2 - t1);
      sl_ms += ms(t3 - t2);
    }
    double max_diff = 0.0;
    long double checksum = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      max_diff = std::max(max_diff, std::abs(fast.values[i] - naive.values[i]));
      checksum += fast.values[i];
    }
    const double R = static_cast<double>(c.bench.repeats);
    log << detail::pad(std::to_string(n), 8) << detail::pad(detail::fixed(fast_ms / R, 3), 12)
        << detail::pad(detail::fixed(naive_ms / R, 3), 12) << detail::pad(detail::fixed(sl_ms / R, 1), 12) << max_diff
        << "\n";
    j["runs"].push_back({{"n", n},
                         {"tau", tau},
                         {"pobs_checksum", static_cast<double>(checksum)},
                         {"fast_vs_naive_max_abs_diff", max_diff},
                         {"sl_prediction_checksum", sl_pred.sum()}});
  }
  io::write_file(detail::output_path(c, "bench.json"), detail::dump(j));
}

}  // namespace pobs_sl::cli
