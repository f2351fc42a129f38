#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "nnvp/scg.hpp"
#include "support/synthetic.hpp"

namespace nnvp {
namespace {

std::string data_path(const std::string& name) { return std::string(NNVP_DATA_DIR) + "/" + name; }

Batch normalized_batch(const Dataset& ds) { return to_batch(apply_normalization(fit_normalization(ds), ds)); }

double accuracy(const MLPModel& m, const Batch& b) {
  const Eigen::MatrixXd o = forward_batch(m, b.inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    Eigen::Index k = 0;
    o.col(static_cast<Eigen::Index>(i)).maxCoeff(&k);
    hits += k == b.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(b.size());
}

TEST(Scg, SeparableToyIsFitPerfectly) {
  const Batch train = normalized_batch(testing::separable_toy(60, 1));
  const Batch val = normalized_batch(testing::separable_toy(30, 2));
  MLPConfig cfg;
  cfg.hidden_units = 3;
  cfg.init_seed = 4;
  const TrainedModel t = scg_train(cfg, train, val);
  EXPECT_EQ(accuracy(t.model, train), 1.0);
  EXPECT_LT(loss(t.model, train) / static_cast<double>(train.size()), 0.01);
}

TEST(Scg, ZeroPatienceReturnsInitialWeights) {
  const Batch train = normalized_batch(testing::separable_toy(30, 1));
  const Batch val = normalized_batch(testing::separable_toy(10, 2));
  MLPConfig cfg;
  cfg.patience = 0;
  cfg.init_seed = 9;
  const TrainedModel t = scg_train(cfg, train, val);
  Rng rng(cfg.init_seed);
  const MLPModel init = MLPModel::random(2, cfg.hidden_units, 2, rng);
  EXPECT_EQ(t.model.parameters(), init.parameters());
  EXPECT_EQ(t.epochs_run, 0);
  EXPECT_EQ(t.best_epoch, 0);
}

TEST(Scg, SameSeedGivesBitwiseIdenticalWeights) {
  const Batch train = normalized_batch(testing::gaussian_blobs(80, 3, 3, 1.5, 1));
  const Batch val = normalized_batch(testing::gaussian_blobs(30, 3, 3, 1.5, 2));
  MLPConfig cfg;
  cfg.init_seed = 17;
  const TrainedModel a = scg_train(cfg, train, val);
  const TrainedModel b = scg_train(cfg, train, val);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
  cfg.init_seed = 18;
  EXPECT_NE(scg_train(cfg, train, val).model.parameters(), a.model.parameters());
}

TEST(Scg, ReturnsBestValidationEpoch) {
  const Batch train = normalized_batch(testing::gaussian_blobs(60, 4, 3, 2.5, 3));
  const Batch val = normalized_batch(testing::gaussian_blobs(40, 4, 3, 2.5, 4));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MLPConfig cfg;
    cfg.hidden_units = 8;
    cfg.init_seed = seed;
    const TrainedModel t = scg_train(cfg, train, val);
    const double best = *std::min_element(t.validation_curve.begin(), t.validation_curve.end());
    EXPECT_EQ(t.validation_loss, best);
    EXPECT_EQ(t.validation_curve[static_cast<std::size_t>(t.best_epoch)], best);
    EXPECT_DOUBLE_EQ(loss(t.model, val), t.validation_loss);
    EXPECT_LE(t.epochs_run, cfg.max_epochs);
  }
}

TEST(Scg, MaxEpochsBoundsTheRun) {
  const Batch train = normalized_batch(testing::separable_toy(30, 1));
  const Batch val = normalized_batch(testing::separable_toy(10, 2));
  MLPConfig cfg;
  cfg.max_epochs = 5;
  cfg.patience = 100;
  const TrainedModel t = scg_train(cfg, train, val);
  EXPECT_LE(t.epochs_run, 5);
  EXPECT_EQ(t.validation_curve.size(), static_cast<std::size_t>(t.epochs_run) + 1);
}

TEST(Scg, NonFiniteLossAbortsWithEpoch) {
  Batch train = normalized_batch(testing::separable_toy(20, 1));
  const Batch val = normalized_batch(testing::separable_toy(10, 2));
  MLPModel bad(2, 3, 2);
  bad.parameters()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    scg_fit(bad, MLPConfig{}, train, val);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 0);
  }
}

TEST(Restarts, SingleRestartEqualsPlainScgOnTheSplit) {
  const Batch full = normalized_batch(testing::gaussian_blobs(70, 3, 3, 1.5, 6));
  MLPConfig cfg;
  cfg.num_restarts = 1;
  cfg.init_seed = 123;
  const TrainedModel via_restarts = train_with_restarts(cfg, full);

  const ValidationPartition part = validation_partition(full.size(), cfg);
  EXPECT_EQ(part.validation.size(), 21u);  // round(0.3 * 70)
  const TrainedModel direct = scg_train(restart_config(cfg, 0), select_columns(full, part.fit),
                                        select_columns(full, part.validation));
  EXPECT_EQ(via_restarts.model.parameters(), direct.model.parameters());
  EXPECT_EQ(via_restarts.validation_loss, direct.validation_loss);
}

TEST(Restarts, SelectsLowestValidationLoss) {
  const Batch full = normalized_batch(testing::gaussian_blobs(90, 4, 4, 2.0, 8));
  MLPConfig cfg;
  cfg.num_restarts = 4;
  cfg.init_seed = 5;
  const RestartOutcome out = train_with_restarts_detailed(cfg, full);
  ASSERT_EQ(out.restart_validation_losses.size(), 4u);
  for (double v : out.restart_validation_losses) EXPECT_LE(out.best.validation_loss, v);
  EXPECT_EQ(out.restart_validation_losses[static_cast<std::size_t>(out.best_restart)],
            out.best.validation_loss);
}

TEST(Restarts, AllAbortedIsAnError) {
  Batch full = normalized_batch(testing::separable_toy(20, 1));
  full.inputs(0, 0) = std::numeric_limits<double>::quiet_NaN();
  MLPConfig cfg;
  cfg.num_restarts = 2;
  // the NaN example may land in either partition; both make every restart fail
  EXPECT_THROW(train_with_restarts(cfg, full), TrainingError);
}

TEST(Restarts, TooSmallForValidationSplit) {
  const Batch full = normalized_batch(testing::separable_toy(1, 1));
  EXPECT_THROW(train_with_restarts(MLPConfig{}, full), TrainingError);
}

// Pooled over five 90/10 splits; the three TA classes are roughly balanced,
// so chance level is about 1/3.
TEST(Restarts, TeachingAssistantBeatsChance) {
  const Dataset ds = load_csv(data_path("tae.csv"));
  MLPConfig cfg;
  cfg.hidden_units = 5;
  const SplitPlan plan{2024, 0.10, 5};
  std::size_t hits = 0, total = 0;
  for (int r = 0; r < plan.num_repeats; ++r) {
    const auto [train, test] = split(ds, plan, r);
    cfg.init_seed = static_cast<std::uint64_t>(r);
    const NeuralClassifier clf = fit_classifier(cfg, train);
    const Eigen::MatrixXd o = clf.predict_proba(test);
    for (std::size_t i = 0; i < test.size(); ++i) {
      Eigen::Index k = 0;
      o.col(static_cast<Eigen::Index>(i)).maxCoeff(&k);
      hits += k == test[i].label;
      ++total;
    }
  }
  EXPECT_GT(static_cast<double>(hits) / static_cast<double>(total), 0.40);
}

}  // namespace
}  // namespace nnvp
