#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"
#include "pobs_sl/learners/knn.hpp"
#include "pobs_sl/learners/linear.hpp"
#include "pobs_sl/learners/spec.hpp"
#include "pobs_sl/learners/tree.hpp"

namespace pobs_sl {

struct ConstantModel {
  double value = 0.0;
};

using ModelState = std::variant<ConstantModel, LinearModel, KnnModel, RegressionTree, RandomForest>;

/// A trained candidate. Immutable after fit_learner returns.
struct FittedModel {
  LearnerSpec spec;
  std::size_t train_d = 0;
  ModelState state;
};

namespace detail {

inline void check_finite(const Matrix& x, const Vector& y) {
  if (!x.allFinite() || !y.allFinite())
    throw Error(ErrorCode::NonFinite, "learners", "fit_learner: non-finite training data");
}

inline std::size_t as_count(double v) { return static_cast<std::size_t>(v); }

}  // namespace detail

/// Fits the learner named by spec to (x, y). Deterministic given its inputs;
/// the forest's randomness comes from spec.params["seed"].
inline FittedModel fit_learner(const LearnerSpec& spec, const Matrix& x, const Vector& y) {
  validate(spec);
  if (x.rows() != y.size())
    throw Error(ErrorCode::DimensionMismatch, "learners", "fit_learner: X and y have different row counts");
  if (x.rows() < 1) throw Error(ErrorCode::EmptyData, "learners", "fit_learner: no training rows");
  detail::check_finite(x, y);

  FittedModel m;
  m.spec = with_defaults(spec);
  m.train_d = static_cast<std::size_t>(x.cols());
  const auto& name = spec.name;
  if (name == "mean") {
    m.state = ConstantModel{y.mean()};
  } else if (name == "ols") {
    m.state = fit_ols(x, y, spec.param("min_norm") != 0.0);
  } else if (name == "ridge") {
    m.state = fit_ridge(x, y, spec.param("lambda"));
  } else if (name == "lasso") {
    LassoControl ctl;
    ctl.lambda = spec.param("lambda");
    ctl.tol = spec.param("tol");
    ctl.max_sweeps = detail::as_count(spec.param("max_sweeps"));
    m.state = fit_lasso(x, y, ctl);
  } else if (name == "knn") {
    m.state = fit_knn(x, y, detail::as_count(spec.param("k")));
  } else if (name == "tree") {
    TreeParams tp;
    tp.max_depth = detail::as_count(spec.param("max_depth"));
    tp.min_leaf = detail::as_count(spec.param("min_leaf"));
    m.state = fit_tree(x, y, tp);
  } else if (name == "forest") {
    ForestParams fp;
    fp.n_trees = detail::as_count(spec.param("n_trees"));
    fp.tree.min_leaf = detail::as_count(spec.param("min_leaf"));
    fp.tree.max_depth = detail::as_count(spec.param("max_depth"));
    const auto mtry = detail::as_count(spec.param("mtry"));
    fp.tree.mtry = mtry == 0 ? std::max<std::size_t>(1, m.train_d / 3) : mtry;
    fp.bootstrap = spec.param("bootstrap") != 0.0;
    fp.seed = static_cast<std::uint64_t>(spec.param("seed"));
    m.state = fit_forest(x, y, fp);
  }
  return m;
}

/// Predictions for the rows of x; optionally clamped into [0, clamp_tau].
inline Vector predict(const FittedModel& model, const Matrix& x, std::optional<double> clamp_tau = std::nullopt) {
  if (static_cast<std::size_t>(x.cols()) != model.train_d)
    throw Error(ErrorCode::DimensionMismatch, "learners",
                "predict: model trained on " + std::to_string(model.train_d) + " covariates, got " +
                    std::to_string(x.cols()));
  Vector out = std::visit(
      [&](const auto& s) -> Vector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantModel>) {
          return Vector::Constant(x.rows(), s.value);
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          return predict_linear(s, x);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return predict_knn(s, x);
        } else if constexpr (std::is_same_v<T, RegressionTree>) {
          return predict_tree(s, x);
        } else {
          return predict_forest(s, x);
        }
      },
      model.state);
  if (clamp_tau) out = out.cwiseMax(0.0).cwiseMin(*clamp_tau);
  return out;
}

// JSON persistence. Doubles are written with round-trip precision.

inline void to_json(nlohmann::json& j, const LearnerSpec& s) {
  j = nlohmann::json{{"name", s.name}, {"params", s.params}};
}

inline void from_json(const nlohmann::json& j, LearnerSpec& s) {
  for (const auto& [key, _] : j.items())
    if (key != "name" && key != "params")
      throw Error(ErrorCode::Schema, "learners", "learner spec: unknown key '" + key + "'");
  s.name = j.at("name").get<std::string>();
  s.params.clear();
  if (j.contains("params")) s.params = j.at("params").get<std::map<std::string, double>>();
  validate(s);
}

namespace detail {

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_vector(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Matrix json_matrix(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = json_vector(data.at(static_cast<std::size_t>(r))).transpose();
  return m;
}

inline nlohmann::json tree_json(const RegressionTree& t) {
  std::vector<int> feature, left, right;
  std::vector<double> threshold, value;
  for (const auto& nd : t.nodes) {
    feature.push_back(nd.feature);
    threshold.push_back(nd.threshold);
    left.push_back(nd.left);
    right.push_back(nd.right);
    value.push_back(nd.value);
  }
  return nlohmann::json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

inline RegressionTree json_tree(const nlohmann::json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  RegressionTree t;
  t.nodes.resize(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) t.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
  return t;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const FittedModel& m) {
  j = nlohmann::json{{"spec", m.spec}, {"train_d", m.train_d}};
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantModel>) {
          j["constant"] = s.value;
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          j["linear"] = {{"intercept", s.intercept}, {"coef", detail::vector_json(s.coef)}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          j["knn"] = {{"k", s.k},
                      {"center", detail::vector_json(s.standardizer.center)},
                      {"scale", detail::vector_json(s.standardizer.scale)},
                      {"x", detail::matrix_json(s.train_x)},
                      {"y", detail::vector_json(s.train_y)}};
        } else if constexpr (std::is_same_v<T, RegressionTree>) {
          j["tree"] = detail::tree_json(s);
        } else {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : s.trees) trees.push_back(detail::tree_json(t));
          j["forest"] = trees;
        }
      },
      m.state);
}

inline void from_json(const nlohmann::json& j, FittedModel& m) {
  m.spec = j.at("spec").get<LearnerSpec>();
  m.train_d = j.at("train_d").get<std::size_t>();
  if (j.contains("constant")) {
    m.state = ConstantModel{j.at("constant").get<double>()};
  } else if (j.contains("linear")) {
    LinearModel lm;
    lm.intercept = j.at("linear").at("intercept").get<double>();
    lm.coef = detail::json_vector(j.at("linear").at("coef"));
    m.state = lm;
  } else if (j.contains("knn")) {
    const auto& k = j.at("knn");
    KnnModel km;
    km.k = k.at("k").get<std::size_t>();
    km.standardizer.center = detail::json_vector(k.at("center"));
    km.standardizer.scale = detail::json_vector(k.at("scale"));
    km.train_x = detail::json_matrix(k.at("x"));
    km.train_y = detail::json_vector(k.at("y"));
    m.state = km;
  } else if (j.contains("tree")) {
    m.state = detail::json_tree(j.at("tree"));
  } else if (j.contains("forest")) {
    RandomForest f;
    for (const auto& t : j.at("forest")) f.trees.push_back(detail::json_tree(t));
    m.state = f;
  } else {
    throw Error(ErrorCode::Schema, "learners", "fitted model has no learned state");
  }
}

}  // namespace pobs_sl
