#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"
#include "pobs_sl/learners.hpp"
#include "pobs_sl/nnls.hpp"
#include "pobs_sl/parallel.hpp"
#include "pobs_sl/pseudo_obs.hpp"
#include "pobs_sl/rng.hpp"

namespace pobs_sl {

/// Balanced random partition of n rows into V folds (0-based fold ids).
struct FoldAssignment {
  std::size_t n = 0;
  std::size_t folds = 0;
  std::vector<std::size_t> fold_of;

  std::vector<std::size_t> members(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
      if (fold_of[i] == v) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> members_except(std::span<const std::size_t> excluded) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
      if (std::find(excluded.begin(), excluded.end(), fold_of[i]) == excluded.end()) out.push_back(i);
    return out;
  }
};

inline FoldAssignment make_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || folds > n)
    throw Error(ErrorCode::BadFoldCount, "super_learner",
                "make_folds: need 2 <= V <= n, got V=" + std::to_string(folds) + ", n=" + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, 0xF01D5);
  rng.shuffle(perm);
  FoldAssignment fa{n, folds, std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) fa.fold_of[perm[i]] = i % folds;
  return fa;
}

/// Out-of-fold candidate predictions and the pseudo-values they are scored on.
struct LevelOneData {
  Matrix predictions;  // n x K
  Vector targets;      // pseudo-values (standard, or split per rotation)
  Vector cv_risks;     // K: mean squared residual of each column
  std::vector<std::vector<FittedModel>> fold_models;  // [rotation][candidate], when kept
};

struct LevelOneOptions {
  bool clamp = false;  // clamp pseudo-values and predictions into [0, tau]
  std::size_t threads = 1;
  bool keep_fold_models = false;
  // Called once per rotation with the rows the candidates are trained on.
  std::function<void(std::size_t rotation, std::span<const std::size_t> train_rows)> on_train;
};

namespace detail {

inline Vector cv_risks_of(const Matrix& predictions, const Vector& targets) {
  const double n = static_cast<double>(targets.size());
  Vector risks(predictions.cols());
  for (Eigen::Index k = 0; k < predictions.cols(); ++k)
    risks(k) = (targets - predictions.col(k)).squaredNorm() / n;
  return risks;
}

inline Vector as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector pobs_targets(const Dataset& data, double tau, bool clamp) {
  auto pobs = standard_pobs(data, tau);
  if (clamp) clamp_to_horizon(pobs);
  return as_vector(pobs.values);
}

inline void fit_rotation(const Dataset& data, std::span<const LearnerSpec> library,
                         std::span<const std::size_t> train, const Vector& train_targets,
                         std::span<const std::size_t> predict_rows, double tau, bool clamp,
                         LevelOneData& out, std::vector<FittedModel>* keep) {
  const Matrix x_train = data.covariate_matrix(train);
  const Matrix x_pred = data.covariate_matrix(predict_rows);
  for (std::size_t k = 0; k < library.size(); ++k) {
    auto model = fit_learner(library[k], x_train, train_targets);
    const Vector pred = predict(model, x_pred, clamp ? std::optional<double>(tau) : std::nullopt);
    for (std::size_t r = 0; r < predict_rows.size(); ++r)
      out.predictions(static_cast<Eigen::Index>(predict_rows[r]), static_cast<Eigen::Index>(k)) =
          pred(static_cast<Eigen::Index>(r));
    if (keep) (*keep)[k] = std::move(model);
  }
}

}  // namespace detail

/// Level-one data from standard pseudo-observations: pseudo-values are computed
/// once on all rows, then for each fold v the candidates are trained on the
/// other folds and predict fold v.
inline LevelOneData cv_level_one_standard(const Dataset& data, std::span<const LearnerSpec> library,
                                          const FoldAssignment& folds, double tau,
                                          const LevelOneOptions& opt = {}) {
  if (folds.n != data.size())
    throw Error(ErrorCode::DimensionMismatch, "super_learner", "fold assignment does not match the dataset");
  const Vector gamma = detail::pobs_targets(data, tau, opt.clamp);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto K = static_cast<Eigen::Index>(library.size());

  LevelOneData out;
  out.predictions = Matrix::Zero(n, K);
  out.targets = gamma;
  if (opt.keep_fold_models) out.fold_models.assign(folds.folds, std::vector<FittedModel>(library.size()));

  parallel_for(folds.folds, opt.threads, [&](std::size_t v) {
    const auto val = folds.members(v);
    const std::size_t excluded[] = {v};
    const auto train = folds.members_except(excluded);
    if (opt.on_train) opt.on_train(v, train);
    Vector train_targets(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r)
      train_targets(static_cast<Eigen::Index>(r)) = gamma(static_cast<Eigen::Index>(train[r]));
    detail::fit_rotation(data, library, train, train_targets, val, tau, opt.clamp, out,
                         opt.keep_fold_models ? &out.fold_models[v] : nullptr);
  });
  out.cv_risks = detail::cv_risks_of(out.predictions, out.targets);
  return out;
}

/// Level-one data from split pseudo-observations. In rotation v, fold v is
/// validated, fold v+1 (wrapping to the first) is the KM set, and the rest is
/// the training set. Validation targets are split pseudo-values against the
/// KM set; candidates are trained on standard pseudo-values of the training
/// set alone.
inline LevelOneData cv_level_one_split(const Dataset& data, std::span<const LearnerSpec> library,
                                       const FoldAssignment& folds, double tau, const LevelOneOptions& opt = {}) {
  if (folds.n != data.size())
    throw Error(ErrorCode::DimensionMismatch, "super_learner", "fold assignment does not match the dataset");
  if (folds.folds < 3)
    throw Error(ErrorCode::BadFoldCount, "super_learner",
                "split pseudo-observations need V >= 3, got V=" + std::to_string(folds.folds));
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto K = static_cast<Eigen::Index>(library.size());

  LevelOneData out;
  out.predictions = Matrix::Zero(n, K);
  out.targets = Vector::Zero(n);
  if (opt.keep_fold_models) out.fold_models.assign(folds.folds, std::vector<FittedModel>(library.size()));

  parallel_for(folds.folds, opt.threads, [&](std::size_t v) {
    const std::size_t km_fold = (v + 1) % folds.folds;
    const auto val = folds.members(v);
    const auto km = folds.members(km_fold);
    const std::size_t excluded[] = {v, km_fold};
    const auto train = folds.members_except(excluded);
    if (opt.on_train) opt.on_train(v, train);

    const Dataset km_set = data.subset(km);
    if (!km_set.has_event())
      throw Error(ErrorCode::DegenerateKMFold, "super_learner",
                  "rotation " + std::to_string(v + 1) + ": KM fold " + std::to_string(km_fold + 1) +
                      " contains no event");
    auto split = split_pobs(km_set, data.subset(val), tau);
    if (opt.clamp) clamp_to_horizon(split);
    for (std::size_t r = 0; r < val.size(); ++r) out.targets(static_cast<Eigen::Index>(val[r])) = split.values[r];

    const Vector train_targets = detail::pobs_targets(data.subset(train), tau, opt.clamp);
    detail::fit_rotation(data, library, train, train_targets, val, tau, opt.clamp, out,
                         opt.keep_fold_models ? &out.fold_models[v] : nullptr);
  });
  out.cv_risks = detail::cv_risks_of(out.predictions, out.targets);
  return out;
}

/// Index of the smallest cross-validated risk; ties go to the smallest index.
inline std::size_t select_discrete(const LevelOneData& level1) {
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < level1.cv_risks.size(); ++k)
    if (level1.cv_risks(k) < level1.cv_risks(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(k);
  return best;
}

enum class SlMode { Discrete, Continuous };
enum class SlAlgorithm { StandardPobs, SplitPobs };

struct SuperLearnerOptions {
  std::size_t folds = 6;
  SlMode mode = SlMode::Continuous;
  SlAlgorithm algorithm = SlAlgorithm::StandardPobs;
  std::uint64_t seed = 1;
  bool clamp = false;
  std::size_t threads = 1;
  bool keep_fold_models = false;
};

/// Fitted super learner. Continuous: final_models holds every candidate and
/// weights is a point of the simplex. Discrete: final_models holds only the
/// selected candidate and weights is the matching vertex.
struct SuperLearnerModel {
  SlMode mode = SlMode::Continuous;
  SlAlgorithm algorithm = SlAlgorithm::StandardPobs;
  std::vector<LearnerSpec> library;
  Vector weights;
  std::size_t selected = 0;
  std::vector<FittedModel> final_models;
  double tau = 0.0;
  bool clamp = false;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  Vector cv_risks;
};

struct SuperLearnerFit {
  SuperLearnerModel model;
  LevelOneData level1;
  FoldAssignment folds;
};

/// Fits the super learner and keeps the level-one data alongside the model.
/// The final candidates are always trained on standard pseudo-observations of
/// the full dataset, for both algorithms.
inline SuperLearnerFit fit_super_learner_detailed(const Dataset& data, std::span<const LearnerSpec> library,
                                                  double tau, const SuperLearnerOptions& opt = {}) {
  if (library.empty()) throw Error(ErrorCode::Schema, "super_learner", "empty learner library");
  for (const auto& spec : library) validate(spec);

  SuperLearnerFit fit;
  fit.folds = make_folds(data.size(), opt.folds, opt.seed);
  LevelOneOptions lo;
  lo.clamp = opt.clamp;
  lo.threads = opt.threads;
  lo.keep_fold_models = opt.keep_fold_models;
  fit.level1 = opt.algorithm == SlAlgorithm::StandardPobs
                   ? cv_level_one_standard(data, library, fit.folds, tau, lo)
                   : cv_level_one_split(data, library, fit.folds, tau, lo);

  auto& m = fit.model;
  m.mode = opt.mode;
  m.algorithm = opt.algorithm;
  for (const auto& spec : library) m.library.push_back(with_defaults(spec));
  m.tau = tau;
  m.clamp = opt.clamp;
  m.folds = opt.folds;
  m.seed = opt.seed;
  m.cv_risks = fit.level1.cv_risks;

  const Vector gamma = detail::pobs_targets(data, tau, opt.clamp);
  const Matrix x = data.covariate_matrix();
  const auto K = static_cast<Eigen::Index>(library.size());
  if (opt.mode == SlMode::Discrete) {
    m.selected = select_discrete(fit.level1);
    m.weights = Vector::Zero(K);
    m.weights(static_cast<Eigen::Index>(m.selected)) = 1.0;
    m.final_models.push_back(fit_learner(library[m.selected], x, gamma));
  } else {
    m.weights = nnls(fit.level1.predictions, fit.level1.targets);
    m.selected = select_discrete(fit.level1);
    m.final_models.resize(library.size());
    parallel_for(library.size(), opt.threads,
                 [&](std::size_t k) { m.final_models[k] = fit_learner(library[k], x, gamma); });
  }
  return fit;
}

inline SuperLearnerModel fit_super_learner(const Dataset& data, std::span<const LearnerSpec> library, double tau,
                                           const SuperLearnerOptions& opt = {}) {
  return fit_super_learner_detailed(data, library, tau, opt).model;
}

inline Vector sl_predict(const SuperLearnerModel& model, const Matrix& x) {
  const std::optional<double> clamp = model.clamp ? std::optional<double>(model.tau) : std::nullopt;
  if (model.mode == SlMode::Discrete) return predict(model.final_models.at(0), x, clamp);
  Vector out = Vector::Zero(x.rows());
  for (std::size_t k = 0; k < model.final_models.size(); ++k) {
    const double w = model.weights(static_cast<Eigen::Index>(k));
    if (w == 0.0) continue;
    out += w * predict(model.final_models[k], x, clamp);
  }
  return out;
}

NLOHMANN_JSON_SERIALIZE_ENUM(SlMode, {{SlMode::Discrete, "discrete"}, {SlMode::Continuous, "continuous"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SlAlgorithm, {{SlAlgorithm::StandardPobs, "standard"}, {SlAlgorithm::SplitPobs, "split"}})

inline void to_json(nlohmann::json& j, const SuperLearnerModel& m) {
  j = nlohmann::json{{"format", "pobs-sl-model/1"},
                     {"mode", m.mode},
                     {"algorithm", m.algorithm},
                     {"tau", m.tau},
                     {"clamp", m.clamp},
                     {"folds", m.folds},
                     {"seed", m.seed},
                     {"library", m.library},
                     {"weights", detail::vector_json(m.weights)},
                     {"selected", m.selected},
                     {"cv_risks", detail::vector_json(m.cv_risks)},
                     {"final_models", m.final_models}};
}

inline void from_json(const nlohmann::json& j, SuperLearnerModel& m) {
  if (j.value("format", std::string{}) != "pobs-sl-model/1")
    throw Error(ErrorCode::Schema, "super_learner", "not a serialized super learner model");
  m.mode = j.at("mode").get<SlMode>();
  m.algorithm = j.at("algorithm").get<SlAlgorithm>();
  m.tau = j.at("tau").get<double>();
  m.clamp = j.at("clamp").get<bool>();
  m.folds = j.at("folds").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.library = j.at("library").get<std::vector<LearnerSpec>>();
  m.weights = detail::json_vector(j.at("weights"));
  m.selected = j.at("selected").get<std::size_t>();
  m.cv_risks = detail::json_vector(j.at("cv_risks"));
  m.final_models = j.at("final_models").get<std::vector<FittedModel>>();
  const std::size_t expected = m.mode == SlMode::Discrete ? 1 : m.library.size();
  if (m.final_models.size() != expected || static_cast<std::size_t>(m.weights.size()) != m.library.size())
    throw Error(ErrorCode::Schema, "super_learner", "model weights and fitted candidates do not match the library");
}

}  // namespace pobs_sl
