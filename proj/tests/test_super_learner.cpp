#include <gtest/gtest.h>

#include <mutex>

#include "oracles.hpp"
#include "pobs_sl/simulation.hpp"
#include "pobs_sl/super_learner.hpp"

using namespace pobs_sl;

namespace {

Dataset scheme_one(std::size_t n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  return simulate(cfg).observed;
}

Dataset uncensored_linear(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rng.uniform(), z2 = rng.uniform();
    d.push_back({0.5 + 2.0 * z1 + z2, true, {z1, z2}});
  }
  return d;
}

std::vector<LearnerSpec> small_library() {
  return {{"mean", {}}, {"ols", {}}, {"knn", {{"k", 7}}}, {"tree", {{"max_depth", 3}, {"min_leaf", 5}}}};
}

}  // namespace

TEST(Folds, BalancedAndDeterministic) {
  for (auto [n, v] : std::vector<std::pair<std::size_t, std::size_t>>{{6, 3}, {7, 3}, {200, 6}, {13, 13}}) {
    const auto f = make_folds(n, v, 42);
    std::vector<std::size_t> sizes(v, 0);
    for (auto k : f.fold_of) ++sizes.at(k);
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_GE(*lo, 1u);
    EXPECT_LE(*hi - *lo, 1u);
    EXPECT_EQ(make_folds(n, v, 42).fold_of, f.fold_of);
  }
  EXPECT_NE(make_folds(100, 5, 1).fold_of, make_folds(100, 5, 2).fold_of);
  for (auto [n, v] : std::vector<std::pair<std::size_t, std::size_t>>{{5, 1}, {3, 4}}) {
    try {
      make_folds(n, v, 1);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::BadFoldCount);
    }
  }
}

TEST(LevelOne, OutOfFoldPurityStandard) {
  const auto data = scheme_one(120, 3);
  const auto lib = small_library();
  const auto folds = make_folds(data.size(), 6, 9);
  LevelOneOptions opt;
  std::vector<std::vector<std::size_t>> seen(6);
  opt.on_train = [&](std::size_t v, std::span<const std::size_t> rows) { seen[v].assign(rows.begin(), rows.end()); };
  const auto l1 = cv_level_one_standard(data, lib, folds, 3.0, opt);
  for (std::size_t v = 0; v < 6; ++v) {
    ASSERT_FALSE(seen[v].empty());
    for (auto r : seen[v]) EXPECT_NE(folds.fold_of[r], v);
    EXPECT_EQ(seen[v].size() + folds.members(v).size(), data.size());
  }
  EXPECT_EQ(l1.predictions.rows(), 120);
  EXPECT_EQ(l1.predictions.cols(), 4);
}

TEST(LevelOne, OutOfFoldPuritySplitAndBookkeeping) {
  const auto data = scheme_one(6, 1);
  Dataset six(3);
  for (std::size_t i = 0; i < 6; ++i) six.push_back({1.0 + static_cast<double>(i), true, data[i].covariates});
  const auto folds = make_folds(6, 3, 5);
  LevelOneOptions opt;
  opt.threads = 3;
  std::mutex mu;
  std::vector<std::vector<std::size_t>> seen(3);
  opt.on_train = [&](std::size_t v, std::span<const std::size_t> rows) {
    std::lock_guard lock(mu);
    seen[v].assign(rows.begin(), rows.end());
  };
  const std::vector<LearnerSpec> lib = {{"mean", {}}};
  cv_level_one_split(six, lib, folds, 4.0, opt);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(seen[v].size(), 2u);
    for (auto r : seen[v]) {
      EXPECT_NE(folds.fold_of[r], v);
      EXPECT_NE(folds.fold_of[r], (v + 1) % 3);
    }
  }
}

TEST(LevelOne, MeanLearnerStandardColumnIsOutOfFoldMean) {
  const auto data = scheme_one(90, 4);
  const double tau = 3.0;
  const auto folds = make_folds(data.size(), 5, 2);
  const std::vector<LearnerSpec> lib = {{"mean", {}}};
  const auto l1 = cv_level_one_standard(data, lib, folds, tau);
  const auto gamma = standard_pobs_naive(data, tau).values;
  long double risk = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i) {
    long double s = 0.0L;
    std::size_t c = 0;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (folds.fold_of[j] != folds.fold_of[i]) {
        s += gamma[j];
        ++c;
      }
    const double expect = static_cast<double>(s / static_cast<long double>(c));
    EXPECT_NEAR(l1.predictions(static_cast<Eigen::Index>(i), 0), expect, 1e-10);
    EXPECT_NEAR(l1.targets(static_cast<Eigen::Index>(i)), gamma[i], 1e-10);
    risk += (gamma[i] - expect) * (gamma[i] - expect);
  }
  EXPECT_NEAR(l1.cv_risks(0), static_cast<double>(risk / static_cast<long double>(data.size())), 1e-10);
}

TEST(LevelOne, MeanLearnerSplitRiskMatchesRecomputation) {
  const auto data = scheme_one(120, 8);
  const double tau = 2.5;
  const auto folds = make_folds(data.size(), 4, 7);
  const std::vector<LearnerSpec> lib = {{"mean", {}}};
  const auto l1 = cv_level_one_split(data, lib, folds, tau);
  long double risk = 0.0L;
  for (std::size_t v = 0; v < 4; ++v) {
    const auto val = folds.members(v);
    const auto km = data.subset(folds.members((v + 1) % 4));
    const std::size_t excl[] = {v, (v + 1) % 4};
    const auto train_pobs = standard_pobs_naive(data.subset(folds.members_except(excl)), tau).values;
    long double s = 0.0L;
    for (double g : train_pobs) s += g;
    const double train_mean = static_cast<double>(s / static_cast<long double>(train_pobs.size()));
    for (auto i : val) {
      const double target = oracle::split_pobs_value(km, data[i], tau);
      EXPECT_NEAR(l1.targets(static_cast<Eigen::Index>(i)), target, 1e-10);
      EXPECT_NEAR(l1.predictions(static_cast<Eigen::Index>(i), 0), train_mean, 1e-10);
      risk += (target - train_mean) * (target - train_mean);
    }
  }
  EXPECT_NEAR(l1.cv_risks(0), static_cast<double>(risk / static_cast<long double>(data.size())), 1e-10);
}

TEST(LevelOne, UncensoredStandardEqualsDirectStacking) {
  const auto data = uncensored_linear(60, 11);
  const double tau = 2.8;
  const auto lib = small_library();
  const auto folds = make_folds(data.size(), 5, 3);
  const auto l1 = cv_level_one_standard(data, lib, folds, tau);
  Vector restricted(60);
  for (std::size_t i = 0; i < 60; ++i) restricted(static_cast<Eigen::Index>(i)) = std::min(data[i].time, tau);
  for (std::size_t v = 0; v < 5; ++v) {
    const std::size_t excl[] = {v};
    const auto train = folds.members_except(excl);
    const auto val = folds.members(v);
    Vector y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) y(static_cast<Eigen::Index>(r)) = restricted(static_cast<Eigen::Index>(train[r]));
    for (std::size_t k = 0; k < lib.size(); ++k) {
      const auto m = fit_learner(lib[k], data.covariate_matrix(train), y);
      const Vector p = predict(m, data.covariate_matrix(val));
      for (std::size_t r = 0; r < val.size(); ++r)
        EXPECT_NEAR(l1.predictions(static_cast<Eigen::Index>(val[r]), static_cast<Eigen::Index>(k)),
                    p(static_cast<Eigen::Index>(r)), 1e-9);
    }
  }
  for (Eigen::Index i = 0; i < 60; ++i) EXPECT_NEAR(l1.targets(i), restricted(i), 1e-12);
}

TEST(LevelOne, UncensoredStandardAndSplitTargetsAgree) {
  const auto data = uncensored_linear(48, 12);
  const auto lib = small_library();
  const auto folds = make_folds(data.size(), 6, 1);
  const auto a = cv_level_one_standard(data, lib, folds, 2.5);
  const auto b = cv_level_one_split(data, lib, folds, 2.5);
  for (Eigen::Index i = 0; i < a.targets.size(); ++i) EXPECT_NEAR(a.targets(i), b.targets(i), 1e-12);
}

TEST(LevelOne, SplitErrors) {
  const auto data = scheme_one(30, 2);
  const std::vector<LearnerSpec> lib = {{"mean", {}}};
  try {
    cv_level_one_split(data, lib, make_folds(30, 2, 1), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadFoldCount);
  }
  // All-censored fold 2 serves as the KM set of rotation 1.
  Dataset d(1);
  FoldAssignment f{9, 3, {0, 1, 2, 0, 1, 2, 0, 1, 2}};
  for (std::size_t i = 0; i < 9; ++i) d.push_back({1.0 + static_cast<double>(i), f.fold_of[i] != 1, {0.1 * static_cast<double>(i)}});
  try {
    cv_level_one_split(d, lib, f, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateKMFold);
    EXPECT_NE(std::string(e.what()).find("rotation 1"), std::string::npos);
  }
}

TEST(LevelOne, ThreadCountDoesNotChangeResults) {
  const auto data = scheme_one(150, 21);
  const auto lib = default_library();
  const auto folds = make_folds(data.size(), 6, 4);
  LevelOneOptions one, four;
  four.threads = 4;
  const auto a = cv_level_one_split(data, lib, folds, 3.0, one);
  const auto b = cv_level_one_split(data, lib, folds, 3.0, four);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.targets, b.targets);
}

TEST(Selection, ArgminWithFirstIndexTies) {
  LevelOneData l1;
  l1.cv_risks = Vector(3);
  l1.cv_risks << 0.3, 0.1, 0.2;
  EXPECT_EQ(select_discrete(l1), 1u);
  l1.cv_risks << 0.5, 0.5, 0.5;
  EXPECT_EQ(select_discrete(l1), 0u);
  l1.cv_risks = Vector::Constant(1, 2.0);
  EXPECT_EQ(select_discrete(l1), 0u);
}

TEST(SuperLearner, DiscreteSelectionIsArgminAndContinuousBeatsBestVertex) {
  for (auto alg : {SlAlgorithm::StandardPobs, SlAlgorithm::SplitPobs}) {
    const auto data = scheme_one(200, 5);
    const auto lib = default_library();
    SuperLearnerOptions opt;
    opt.algorithm = alg;
    const auto fit = fit_super_learner_detailed(data, lib, 3.0, opt);
    const auto& l1 = fit.level1;
    for (Eigen::Index k = 0; k < l1.cv_risks.size(); ++k)
      EXPECT_LE(l1.cv_risks(static_cast<Eigen::Index>(fit.model.selected)), l1.cv_risks(k));
    EXPECT_NEAR(fit.model.weights.sum(), 1.0, 1e-12);
    EXPECT_TRUE((fit.model.weights.array() >= 0.0).all());
    // The unnormalized NNLS fit is no worse than any single column.
    const Vector raw = nnls_solve(l1.predictions, l1.targets).weights;
    const double obj = (l1.targets - l1.predictions * raw).squaredNorm();
    for (Eigen::Index k = 0; k < l1.predictions.cols(); ++k)
      EXPECT_LE(obj, (l1.targets - l1.predictions.col(k)).squaredNorm() + 1e-8);
  }
}

TEST(SuperLearner, SingleMeanCandidate) {
  const auto data = scheme_one(80, 6);
  const std::vector<LearnerSpec> lib = {{"mean", {}}};
  SuperLearnerOptions cont, disc;
  disc.mode = SlMode::Discrete;
  const auto a = fit_super_learner(data, lib, 3.0, cont);
  const auto b = fit_super_learner(data, lib, 3.0, disc);
  EXPECT_EQ(a.weights(0), 1.0);
  EXPECT_EQ(b.selected, 0u);
  const auto gamma = standard_pobs(data, 3.0).values;
  double mean = 0.0;
  for (double g : gamma) mean += g;
  mean /= static_cast<double>(gamma.size());
  const Matrix x = data.covariate_matrix();
  const Vector pa = sl_predict(a, x), pb = sl_predict(b, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_NEAR(pa(i), mean, 1e-10);
    EXPECT_EQ(pa(i), pb(i));
  }
}

TEST(SuperLearner, LinearTargetsConcentrateOnOls) {
  const auto data = uncensored_linear(150, 13);
  const std::vector<LearnerSpec> lib = {{"ols", {}}, {"mean", {}}};
  const auto m = fit_super_learner(data, lib, data.max_time());
  EXPECT_GE(m.weights(0), 0.99);
}

TEST(SuperLearner, ConvexCombinationOfConstants) {
  SuperLearnerModel m;
  m.mode = SlMode::Continuous;
  Matrix x(3, 1);
  x << 0, 1, 2;
  m.library = {{"mean", {}}, {"mean", {}}};
  m.final_models = {fit_learner(m.library[0], x, Vector::Constant(3, 2.0)),
                    fit_learner(m.library[1], x, Vector::Constant(3, 4.0))};
  m.weights = Vector(2);
  m.weights << 0.5, 0.5;
  const Vector mixed = sl_predict(m, x);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(mixed(i), 3.0);
  m.weights << 1.0, 0.0;
  EXPECT_EQ(sl_predict(m, x), predict(m.final_models[0], x));
}

TEST(SuperLearner, FinalRefitUsesFullDataStandardPseudoValues) {
  const auto data = scheme_one(100, 7);
  const std::vector<LearnerSpec> lib = {{"ols", {}}};
  SuperLearnerOptions opt;
  opt.algorithm = SlAlgorithm::SplitPobs;
  opt.folds = 4;
  const auto m = fit_super_learner(data, lib, 3.0, opt);
  const auto gamma = standard_pobs(data, 3.0).values;
  const auto direct = fit_learner(lib[0], data.covariate_matrix(), Eigen::Map<const Vector>(gamma.data(), 100));
  EXPECT_EQ(sl_predict(m, data.covariate_matrix()), predict(direct, data.covariate_matrix()));
}

TEST(SuperLearner, SerializationRoundTrip) {
  const auto data = scheme_one(120, 9);
  const auto lib = default_library();
  for (auto mode : {SlMode::Continuous, SlMode::Discrete}) {
    SuperLearnerOptions opt;
    opt.mode = mode;
    opt.clamp = true;
    const auto m = fit_super_learner(data, lib, 3.0, opt);
    const nlohmann::json j = m;
    const auto back = nlohmann::json::parse(j.dump()).get<SuperLearnerModel>();
    EXPECT_EQ(back.mode, m.mode);
    EXPECT_EQ(back.selected, m.selected);
    EXPECT_EQ(back.weights, m.weights);
    EXPECT_EQ(sl_predict(back, data.covariate_matrix()), sl_predict(m, data.covariate_matrix()));
    EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  }
}

TEST(SuperLearner, DimensionMismatchOnPredict) {
  const auto data = scheme_one(60, 10);
  const std::vector<LearnerSpec> lib = {{"ols", {}}};
  const auto m = fit_super_learner(data, lib, 3.0);
  try {
    sl_predict(m, Matrix::Zero(2, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
