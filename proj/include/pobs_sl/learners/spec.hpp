#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pobs_sl/error.hpp"

namespace pobs_sl {

/// A candidate learner: registry name plus numeric hyperparameters.
/// Hyperparameters left out take the registry defaults.
struct LearnerSpec {
  std::string name;
  std::map<std::string, double> params;

  double param(const std::string& key) const;

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

namespace detail {

struct HyperparameterInfo {
  std::string_view key;
  double default_value;
  double min_value;
  double max_value;
  bool integral;
};

struct RegistryEntry {
  std::string_view name;
  std::vector<HyperparameterInfo> params;
};

inline constexpr double kInf = 1e300;

// Registry of built-in learners and their hyperparameter ranges.
//   mean   : constant predictor
//   ols    : least squares; min_norm=1 falls back to the minimum-norm solution when rank deficient
//   ridge  : (X'X + n*lambda*I) b = X'y on standardized features
//   lasso  : (1/2n)||y - Xb||^2 + lambda*||b||_1 on standardized features, cyclic coordinate descent
//   knn    : k nearest neighbours, Euclidean distance on standardized features
//   tree   : CART regression tree; max_depth=0 means unlimited
//   forest : bagged CART trees; mtry=0 means max(1, floor(d/3))
inline const std::array<RegistryEntry, 7>& registry() {
  static const std::array<RegistryEntry, 7> entries{{
      {"mean", {}},
      {"ols", {{"min_norm", 1, 0, 1, true}}},
      {"ridge", {{"lambda", 0.1, 0, kInf, false}}},
      {"lasso",
       {{"lambda", 0.01, 0, kInf, false}, {"tol", 1e-12, 0, 1, false}, {"max_sweeps", 100000, 1, 1e9, true}}},
      {"knn", {{"k", 15, 1, 1e9, true}}},
      {"tree", {{"max_depth", 8, 0, 1e6, true}, {"min_leaf", 5, 1, 1e9, true}}},
      {"forest",
       {{"n_trees", 100, 1, 1e6, true},
        {"mtry", 0, 0, 1e6, true},
        {"min_leaf", 5, 1, 1e9, true},
        {"max_depth", 0, 0, 1e6, true},
        {"bootstrap", 1, 0, 1, true},
        {"seed", 1, 0, 9.007199254740992e15, true}}},
  }};
  return entries;
}

inline const RegistryEntry& registry_entry(std::string_view name) {
  for (const auto& e : registry())
    if (e.name == name) return e;
  throw Error(ErrorCode::UnknownLearner, "learners", "unknown learner '" + std::string(name) + "'");
}

}  // namespace detail

/// Throws UnknownLearner / BadHyperparameter when the learner spec is not usable.
inline void validate(const LearnerSpec& spec) {
  const auto& entry = detail::registry_entry(spec.name);
  for (const auto& [key, value] : spec.params) {
    auto it = std::find_if(entry.params.begin(), entry.params.end(),
                           [&](const detail::HyperparameterInfo& h) { return h.key == key; });
    if (it == entry.params.end())
      throw Error(ErrorCode::BadHyperparameter, "learners",
                  "learner '" + spec.name + "' has no hyperparameter '" + key + "'");
    if (!std::isfinite(value) || value < it->min_value || value > it->max_value ||
        (it->integral && value != std::floor(value)))
      throw Error(ErrorCode::BadHyperparameter, "learners",
                  "hyperparameter " + spec.name + "." + key + "=" + std::to_string(value) + " is out of range");
  }
}

inline double LearnerSpec::param(const std::string& key) const {
  if (auto it = params.find(key); it != params.end()) return it->second;
  const auto& entry = detail::registry_entry(name);
  for (const auto& h : entry.params)
    if (h.key == key) return h.default_value;
  throw Error(ErrorCode::BadHyperparameter, "learners", "learner '" + name + "' has no hyperparameter '" + key + "'");
}

/// Fills in every default so the learner spec documents itself when serialized.
inline LearnerSpec with_defaults(LearnerSpec spec) {
  for (const auto& h : detail::registry_entry(spec.name).params) spec.params.try_emplace(std::string(h.key), h.default_value);
  return spec;
}

/// Default five-candidate library.
inline std::vector<LearnerSpec> default_library() {
  return {
      {"ols", {}},
      {"lasso", {{"lambda", 0.01}}},
      {"knn", {{"k", 15}}},
      {"tree", {{"max_depth", 6}, {"min_leaf", 10}}},
      {"forest", {{"n_trees", 100}, {"min_leaf", 5}}},
  };
}

}  // namespace pobs_sl
