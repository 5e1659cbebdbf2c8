#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pobs_sl/error.hpp"
#include "pobs_sl/evaluation.hpp"
#include "pobs_sl/learners.hpp"
#include "pobs_sl/simulation.hpp"
#include "pobs_sl/super_learner.hpp"

namespace pobs_sl::cli {

struct PobsSection {
  std::string kind = "standard";  // standard | split
  double split_ratio = 0.2;       // share of rows in the evaluation set for kind=split
};

struct SuperLearnerSection {
  std::vector<LearnerSpec> library = default_library();
  std::size_t folds = 6;
  SlMode mode = SlMode::Continuous;
  SlAlgorithm algorithm = SlAlgorithm::StandardPobs;
  bool clamp = false;
};

struct EvaluateSection {
  std::size_t test_n = 10000;
};

struct BenchSection {
  std::vector<std::size_t> sizes{100, 200, 500};
  std::size_t repeats = 3;
};

/// One JSON document configures every command. Paths are relative to the
/// working directory; outputs go to `out`.
struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out = "out";
  std::optional<std::string> data;
  std::optional<std::string> model;
  std::optional<std::string> truth;
  std::optional<double> tau;
  double tau_quantile = 0.9;
  SimConfig simulation;
  PobsSection pobs;
  SuperLearnerSection super_learner;
  EvaluateSection evaluate;
  AuditOptions audit;
  BenchSection bench;
};

namespace detail {

inline std::string scheme_name(Scheme s) { return s == Scheme::One ? "one" : "two"; }

// Reads the members of one JSON object, remembering which keys were consumed
// so that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "/" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const nlohmann::json& at(const std::string& key) const { return j_.at(key); }
  std::string path(const std::string& key) const { return path_ + "/" + key; }

  void number(const std::string& key, double& dst, double lo, double hi, bool open_lo = false) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(path(key), "expected a number");
    const double x = v.get<double>();
    if (!(open_lo ? x > lo : x >= lo) || !(x <= hi))
      fail(path(key), "value " + nlohmann::json(x).dump() + " out of range");
    dst = x;
  }

  template <class Int>
  void integer(const std::string& key, Int& dst, std::uint64_t lo, std::uint64_t hi) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(path(key), "expected a non-negative integer");
    const auto x = v.get<std::uint64_t>();
    if (x < lo || x > hi) fail(path(key), "value " + std::to_string(x) + " out of range");
    dst = static_cast<Int>(x);
  }

  void string(const std::string& key, std::string& dst) {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) fail(path(key), "expected a string");
    dst = j_.at(key).get<std::string>();
  }

  void boolean(const std::string& key, bool& dst) {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) fail(path(key), "expected true or false");
    dst = j_.at(key).get<bool>();
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) fail(path(key), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::Schema, "cli", "config " + where + ": " + what);
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<double> number_list(ObjectReader& r, const std::string& key) {
  const auto& v = r.at(key);
  if (!v.is_array()) ObjectReader::fail(r.path(key), "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) ObjectReader::fail(r.path(key), "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline void read_simulation(const nlohmann::json& j, SimConfig& s) {
  ObjectReader r(j, "/simulation");
  if (r.has("scheme")) {
    const auto& v = r.at("scheme");
    if (v == 1 || v == "one" || v == "1")
      s.scheme = Scheme::One;
    else if (v == 2 || v == "two" || v == "2")
      s.scheme = Scheme::Two;
    else
      ObjectReader::fail(r.path("scheme"), "unknown scheme " + v.dump() + " (expected \"one\" or \"two\")");
  }
  r.integer("n", s.n, 1, 100'000'000);
  r.number("kappa", s.kappa, 0.0, 1e12, true);
  r.number("nu", s.nu, 0.0, 1e6, true);
  r.number("a", s.a, 0.0, 1e12, true);
  r.number("lambda_cens", s.lambda_cens, 0.0, 1e12, true);
  r.number("tau_quantile", s.tau_quantile, 0.0, 1.0, true);
  if (s.tau_quantile >= 1.0) ObjectReader::fail(r.path("tau_quantile"), "must be below 1");
  if (r.has("beta")) {
    const auto b = number_list(r, "beta");
    if (b.size() != 3) ObjectReader::fail(r.path("beta"), "expected 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) s.beta[i] = b[i];
  }
  r.finish();
}

inline void read_super_learner(const nlohmann::json& j, SuperLearnerSection& s) {
  ObjectReader r(j, "/super_learner");
  if (r.has("library")) {
    const auto& lib = r.at("library");
    if (!lib.is_array() || lib.empty()) ObjectReader::fail(r.path("library"), "expected a nonempty array");
    s.library.clear();
    for (std::size_t i = 0; i < lib.size(); ++i) {
      const auto where = r.path("library") + "/" + std::to_string(i);
      try {
        s.library.push_back(lib[i].get<LearnerSpec>());
      } catch (const Error& e) {
        throw Error(e.code(), "cli", "config " + where + ": " + e.what());
      } catch (const nlohmann::json::exception& e) {
        ObjectReader::fail(where, e.what());
      }
    }
  }
  r.integer("folds", s.folds, 2, 1'000'000);
  std::string mode = s.mode == SlMode::Continuous ? "continuous" : "discrete";
  r.string("mode", mode);
  if (mode == "continuous")
    s.mode = SlMode::Continuous;
  else if (mode == "discrete")
    s.mode = SlMode::Discrete;
  else
    ObjectReader::fail(r.path("mode"), "expected \"continuous\" or \"discrete\"");
  std::string alg = s.algorithm == SlAlgorithm::StandardPobs ? "standard" : "split";
  r.string("algorithm", alg);
  if (alg == "standard")
    s.algorithm = SlAlgorithm::StandardPobs;
  else if (alg == "split")
    s.algorithm = SlAlgorithm::SplitPobs;
  else
    ObjectReader::fail(r.path("algorithm"), "expected \"standard\" or \"split\"");
  r.boolean("clamp", s.clamp);
  r.finish();
}

inline void read_audit(const nlohmann::json& j, AuditOptions& a) {
  ObjectReader r(j, "/audit");
  r.integer("n", a.n, 3, 100'000'000);
  r.integer("folds", a.folds, 3, 1'000'000);
  if (r.has("gammas")) {
    a.gammas = number_list(r, "gammas");
    for (double g : a.gammas)
      if (!(g > 0.0)) ObjectReader::fail(r.path("gammas"), "every gamma must be positive");
  }
  if (r.has("M")) {
    double m = 0.0;
    r.number("M", m, 0.0, 1e12, true);
    a.M = m;
  }
  if (r.has("tau")) {
    double t = 0.0;
    r.number("tau", t, 0.0, 1e12, true);
    a.tau = t;
  }
  r.integer("replications", a.replications, 1, 1'000'000);
  r.integer("test_n", a.test_n, 1, 100'000'000);
  r.integer("pilot_n", a.pilot_n, 1, 100'000'000);
  r.boolean("clamp", a.clamp);
  r.finish();
}

}  // namespace detail

/// Parses and validates a run configuration. Unknown keys anywhere are errors.
inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema, "cli", std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  detail::ObjectReader r(j, "");
  r.integer("seed", c.seed, 0, UINT64_MAX);
  r.integer("threads", c.threads, 1, 1024);
  r.string("out", c.out);
  auto optional_string = [&](const std::string& key, std::optional<std::string>& dst) {
    std::string s;
    if (r.has(key)) {
      r.string(key, s);
      dst = s;
    }
  };
  optional_string("data", c.data);
  optional_string("model", c.model);
  optional_string("truth", c.truth);
  if (r.has("tau")) {
    double t = 0.0;
    r.number("tau", t, 0.0, 1e12, true);
    c.tau = t;
  }
  r.number("tau_quantile", c.tau_quantile, 0.0, 1.0, true);
  if (c.tau_quantile >= 1.0) detail::ObjectReader::fail("/tau_quantile", "must be below 1");
  if (r.has("simulation")) detail::read_simulation(r.at("simulation"), c.simulation);
  if (r.has("pobs")) {
    detail::ObjectReader p(r.at("pobs"), "/pobs");
    p.string("kind", c.pobs.kind);
    if (c.pobs.kind != "standard" && c.pobs.kind != "split")
      detail::ObjectReader::fail("/pobs/kind", "expected \"standard\" or \"split\"");
    p.number("split_ratio", c.pobs.split_ratio, 0.0, 1.0, true);
    if (c.pobs.split_ratio >= 1.0) detail::ObjectReader::fail("/pobs/split_ratio", "must be below 1");
    p.finish();
  }
  if (r.has("super_learner")) detail::read_super_learner(r.at("super_learner"), c.super_learner);
  if (r.has("evaluate")) {
    detail::ObjectReader e(r.at("evaluate"), "/evaluate");
    e.integer("test_n", c.evaluate.test_n, 1, 100'000'000);
    e.finish();
  }
  if (r.has("audit")) detail::read_audit(r.at("audit"), c.audit);
  if (r.has("bench")) {
    detail::ObjectReader b(r.at("bench"), "/bench");
    if (b.has("sizes")) {
      c.bench.sizes.clear();
      for (double v : detail::number_list(b, "sizes")) {
        if (!(v >= 3.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
          detail::ObjectReader::fail("/bench/sizes", "sizes must be integers >= 3");
        c.bench.sizes.push_back(static_cast<std::size_t>(v));
      }
    }
    b.integer("repeats", c.bench.repeats, 1, 1000);
    b.finish();
  }
  r.finish();
  c.simulation.seed = c.seed;
  c.audit.threads = c.threads;
  return c;
}

inline nlohmann::json simulation_json(const SimConfig& s) {
  return {{"scheme", detail::scheme_name(s.scheme)},
          {"n", s.n},
          {"kappa", s.kappa},
          {"nu", s.nu},
          {"a", s.a},
          {"beta", s.beta},
          {"lambda_cens", s.lambda_cens},
          {"tau_quantile", s.tau_quantile}};
}

/// Every setting with its effective value. Thread count is left out when
/// `for_artifacts` is set, since outputs must not depend on it.
inline nlohmann::json config_json(const RunConfig& c, bool for_artifacts = false) {
  nlohmann::json j;
  j["seed"] = c.seed;
  if (!for_artifacts) {
    j["threads"] = c.threads;
    j["out"] = c.out;
  }
  j["data"] = c.data ? nlohmann::json(*c.data) : nlohmann::json(nullptr);
  j["model"] = c.model ? nlohmann::json(*c.model) : nlohmann::json(nullptr);
  j["truth"] = c.truth ? nlohmann::json(*c.truth) : nlohmann::json(nullptr);
  j["tau"] = c.tau ? nlohmann::json(*c.tau) : nlohmann::json(nullptr);
  j["tau_quantile"] = c.tau_quantile;
  j["simulation"] = simulation_json(c.simulation);
  j["pobs"] = {{"kind", c.pobs.kind}, {"split_ratio", c.pobs.split_ratio}};
  j["super_learner"] = {{"library", c.super_learner.library},
                        {"folds", c.super_learner.folds},
                        {"mode", c.super_learner.mode},
                        {"algorithm", c.super_learner.algorithm},
                        {"clamp", c.super_learner.clamp}};
  j["evaluate"] = {{"test_n", c.evaluate.test_n}};
  j["audit"] = {{"n", c.audit.n},
                {"folds", c.audit.folds},
                {"gammas", c.audit.gammas},
                {"M", c.audit.M ? nlohmann::json(*c.audit.M) : nlohmann::json(nullptr)},
                {"tau", c.audit.tau ? nlohmann::json(*c.audit.tau) : nlohmann::json(nullptr)},
                {"replications", c.audit.replications},
                {"test_n", c.audit.test_n},
                {"pilot_n", c.audit.pilot_n},
                {"clamp", c.audit.clamp}};
  j["bench"] = {{"sizes", c.bench.sizes}, {"repeats", c.bench.repeats}};
  return j;
}

inline SimConfig parse_simulation_json(const nlohmann::json& j) {
  SimConfig s;
  detail::read_simulation(j, s);
  return s;
}

}  // namespace pobs_sl::cli
