#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nnvp/dataset.hpp"

namespace nnvp {
namespace {

std::string data_path(const std::string& name) { return std::string(NNVP_DATA_DIR) + "/" + name; }

Dataset from_text(const std::string& text, CsvSchema schema = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

Dataset random_dataset(std::size_t n, std::size_t d, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(3.0, 5.0);
  std::uniform_int_distribution<int> lab(0, c - 1);
  std::vector<Example> ex;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    for (std::size_t j = 0; j < d; ++j) e.attributes.push_back(z(rng) * static_cast<double>(j + 1));
    e.label = lab(rng);
    ex.push_back(e);
  }
  std::vector<std::string> names;
  for (int k = 0; k < c; ++k) names.push_back(std::to_string(k));
  return Dataset(std::move(ex), d, names);
}

struct TableOne {
  const char* file;
  std::size_t examples, attributes;
  int classes;
};

TEST(LoadCsv, BenchmarkFilesMatchPublishedCounts) {
  for (const TableOne& t : {TableOne{"tae.csv", 151, 5, 3}, TableOne{"glass.csv", 214, 9, 6},
                            TableOne{"ecoli.csv", 336, 7, 8}, TableOne{"vehicle.csv", 846, 18, 4}}) {
    SCOPED_TRACE(t.file);
    const Dataset ds = load_csv(data_path(t.file));
    EXPECT_EQ(ds.size(), t.examples);
    EXPECT_EQ(ds.num_attributes(), t.attributes);
    EXPECT_EQ(ds.num_classes(), t.classes);
  }
}

TEST(LoadCsv, EcoliClassSizesRangeFrom143To2) {
  const auto counts = load_csv(data_path("ecoli.csv")).class_counts();
  EXPECT_EQ(*std::max_element(counts.begin(), counts.end()), 143u);
  EXPECT_EQ(*std::min_element(counts.begin(), counts.end()), 2u);
}

TEST(LoadCsv, LabelsMappedInFirstAppearanceOrder) {
  const Dataset ds = from_text("1.0,2.0,a\n3.0,4.0,b\n");
  ASSERT_EQ(ds.num_classes(), 2);
  EXPECT_EQ(ds.class_names()[0], "a");
  EXPECT_EQ(ds.class_names()[1], "b");
  EXPECT_EQ(ds[0].label, 0);
  EXPECT_EQ(ds[1].label, 1);

  const Dataset ints = from_text("0,3\n0,1\n0,3\n");
  EXPECT_EQ(ints.class_names()[0], "3");
  EXPECT_EQ(ints.labels(), (std::vector<int>{0, 1, 0}));
}

TEST(LoadCsv, OptionalHeaderAndRowOrder) {
  const Dataset ds = from_text("x,y,class\n5,6,p\n7,8,q\n", {.has_header = true, .delimiter = ',', .num_attributes = {}});
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].attributes, (std::vector<double>{5, 6}));
  EXPECT_EQ(ds[1].attributes, (std::vector<double>{7, 8}));
}

TEST(LoadCsv, WrongColumnCountNamesRow) {
  try {
    from_text("1,2,a\n3,4,b\n5,c\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, NonNumericAttributeNamesRow) {
  try {
    from_text("1,2,a\n3,oops,b\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, EmptyInputAndMissingFileFail) {
  EXPECT_THROW(from_text(""), DataError);
  EXPECT_THROW(from_text("\n\n"), DataError);
  EXPECT_THROW(load_csv(data_path("does-not-exist.csv")), DataError);
  EXPECT_THROW(from_text("1,a\n2,a\n"), DataError);  // a single class
}

TEST(Normalization, TwoPointColumn) {
  const Dataset ds = from_text("1,a\n3,b\n");
  const NormalizationStats s = fit_normalization(ds);
  EXPECT_DOUBLE_EQ(s.means[0], 2.0);
  EXPECT_DOUBLE_EQ(s.std_devs[0], 1.0);
}

TEST(Normalization, ConstantColumnKeepsUnitScale) {
  const Dataset ds = from_text("5,1,a\n5,2,b\n5,3,a\n");
  const NormalizationStats s = fit_normalization(ds);
  EXPECT_DOUBLE_EQ(s.means[0], 5.0);
  EXPECT_DOUBLE_EQ(s.std_devs[0], 1.0);
  const Dataset z = apply_normalization(s, ds);
  for (const Example& e : z.examples()) EXPECT_EQ(e.attributes[0], 0.0);
}

TEST(Normalization, ApplyValues) {
  NormalizationStats s{{2.0}, {1.0}};
  EXPECT_DOUBLE_EQ(s.apply(std::vector<double>{2.0})[0], 0.0);
  s.std_devs[0] = 2.0;
  EXPECT_DOUBLE_EQ(s.apply(std::vector<double>{4.0})[0], 1.0);
}

TEST(Normalization, DimensionMismatchThrows) {
  const NormalizationStats s{{0.0, 0.0}, {1.0, 1.0}};
  EXPECT_THROW(apply_normalization(s, from_text("1,a\n2,b\n")), std::invalid_argument);
  EXPECT_THROW(fit_normalization(Dataset({}, 2, {"a", "b"})), std::invalid_argument);
}

// Recompute moments after the transform, independently of the fitting code.
TEST(Normalization, RenormalizedTrainingDataHasZeroMeanUnitStd) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset ds = random_dataset(10 + seed * 7, 4, 3, seed);
    const Dataset z = apply_normalization(fit_normalization(ds), ds);
    for (std::size_t j = 0; j < ds.num_attributes(); ++j) {
      double mean = 0.0, var = 0.0;
      for (const Example& e : z.examples()) mean += e.attributes[j];
      mean /= static_cast<double>(z.size());
      for (const Example& e : z.examples()) var += (e.attributes[j] - mean) * (e.attributes[j] - mean);
      EXPECT_LT(std::abs(mean), 1e-9);
      EXPECT_LT(std::abs(std::sqrt(var / static_cast<double>(z.size())) - 1.0), 1e-9);
    }
  }
}

TEST(Normalization, InverseRecoversOriginal) {
  const Dataset ds = random_dataset(40, 5, 2, 7);
  const NormalizationStats s = fit_normalization(ds);
  const Dataset back = invert_normalization(s, apply_normalization(s, ds));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.num_attributes(); ++j)
      EXPECT_NEAR(back[i].attributes[j], ds[i].attributes[j], 1e-9);
}

TEST(Split, TestSizeRoundsHalfUp) {
  EXPECT_EQ(split_indices(846, {1, 0.10, 10}, 0).test.size(), 85u);
  EXPECT_EQ(split_indices(151, {1, 0.10, 10}, 0).test.size(), 15u);
  EXPECT_EQ(split_indices(214, {1, 0.10, 10}, 0).test.size(), 21u);
  EXPECT_EQ(split_indices(336, {1, 0.10, 10}, 0).test.size(), 34u);
  EXPECT_EQ(split_indices(25, {1, 0.10, 1}, 0).test.size(), 3u);  // 2.5 -> 3
}

TEST(Split, HalfOfTwo) {
  const auto [train, test] = split(from_text("1,a\n2,b\n"), {3, 0.5, 1}, 0);
  EXPECT_EQ(train.size(), 1u);
  EXPECT_EQ(test.size(), 1u);
}

TEST(Split, DeterministicAndDistinctAcrossRepeats) {
  const SplitPlan plan{42, 0.1, 10};
  EXPECT_EQ(split_indices(200, plan, 3).test, split_indices(200, plan, 3).test);
  EXPECT_NE(split_indices(200, plan, 3).test, split_indices(200, plan, 4).test);
}

TEST(Split, EveryRepeatPartitionsTheIndices) {
  for (std::size_t n : {10u, 20u, 151u, 846u}) {
    const SplitPlan plan{n, 0.1, 10};
    for (int r = 0; r < plan.num_repeats; ++r) {
      const SplitIndices s = split_indices(n, plan, r);
      std::set<std::size_t> all(s.train.begin(), s.train.end());
      all.insert(s.test.begin(), s.test.end());
      EXPECT_EQ(s.train.size() + s.test.size(), n);
      EXPECT_EQ(all.size(), n);
    }
  }
}

TEST(Split, RejectsDegenerateFractionsAndRepeats) {
  EXPECT_THROW(split_indices(10, {0, 0.01, 1}, 0), std::invalid_argument);  // empty test
  EXPECT_THROW(split_indices(10, {0, 0.99, 1}, 0), std::invalid_argument);  // empty train
  EXPECT_THROW(split_indices(10, {0, 1.5, 1}, 0), std::invalid_argument);
  EXPECT_THROW(split_indices(10, {0, 0.1, 2}, 2), std::invalid_argument);
}

TEST(OnlineStream, StepCountsAndPrefixes) {
  const Dataset ds = random_dataset(151, 2, 3, 1);
  const OnlineStream stream(ds, 50, 9);
  EXPECT_EQ(stream.num_steps(), 101u);

  const OnlineStream last(ds, 150, 9);
  EXPECT_EQ(last.num_steps(), 1u);

  const auto step = stream.step(10);
  EXPECT_EQ(step.position, 61u);
  ASSERT_EQ(step.train.size(), 60u);
  for (std::size_t i = 0; i < 60; ++i)
    EXPECT_EQ(step.train[i].attributes, ds[stream.order()[i]].attributes);
  EXPECT_EQ(step.next.attributes, ds[stream.order()[60]].attributes);
}

TEST(OnlineStream, SeededOrderIsReproducible) {
  const Dataset ds = random_dataset(60, 2, 2, 4);
  EXPECT_EQ(OnlineStream(ds, 10, 5).order(), OnlineStream(ds, 10, 5).order());
  EXPECT_NE(OnlineStream(ds, 10, 5).order(), OnlineStream(ds, 10, 6).order());
}

TEST(OnlineStream, InitialSizeMustLeaveAStep) {
  const Dataset ds = random_dataset(20, 2, 2, 4);
  EXPECT_THROW(OnlineStream(ds, 20, 0), std::invalid_argument);
  EXPECT_THROW(OnlineStream(ds, 25, 0), std::invalid_argument);
}

TEST(DatasetInvariants, RejectsBadShapes) {
  EXPECT_THROW(Dataset({{{1.0}, 0}}, 2, {"a", "b"}), std::invalid_argument);
  EXPECT_THROW(Dataset({{{1.0}, 2}}, 1, {"a", "b"}), std::invalid_argument);
  EXPECT_THROW(Dataset({}, 1, {"a"}), std::invalid_argument);
}

}  // namespace
}  // namespace nnvp
