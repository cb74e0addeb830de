#include <gtest/gtest.h>

#include "cfmaps/dataset.hpp"
#include "cfmaps/error.hpp"
#include "cfmaps/training.hpp"

namespace cfmaps {
namespace {

Dataset separable_line() {
  return parse_csv("x,y\n0.0,0\n1.0,0\n3.0,1\n4.0,1\n", "line");
}

TEST(TrainForest, SeparablePointsSingleStump) {
  const Dataset d = separable_line();
  const Ensemble e = train_forest(d, ForestConfig{1, 1, 0, false, 0});
  ASSERT_EQ(e.trees().size(), 1u);
  const TreeNode& root = e.trees()[0].nodes[0];
  ASSERT_FALSE(root.is_leaf());
  EXPECT_GT(root.threshold, 1.0);
  EXPECT_LT(root.threshold, 3.0);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(e.predict(d.rows[i]), d.labels[i]);
}

TEST(TrainForest, SingleClassGivesLeaves) {
  const Dataset d = parse_csv("a,b,y\n0,1,7\n1,3,7\n2,2,7\n", "one");
  const Ensemble e = train_forest(d, ForestConfig{4, 3, 1, true, 0});
  for (const Tree& t : e.trees()) {
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.leaf_class(0), 0);
  }
  EXPECT_EQ(e.classes(), (std::vector<std::string>{"7"}));
}

TEST(TrainForest, DeterministicForSeed) {
  const Dataset d = make_blobs(150, 3, 2);
  const ForestConfig cfg{6, 4, 99, true, 0};
  EXPECT_EQ(save_model(train_forest(d, cfg)), save_model(train_forest(d, cfg)));
  ForestConfig other = cfg;
  other.seed = 100;
  EXPECT_NE(save_model(train_forest(d, cfg)), save_model(train_forest(d, other)));
}

TEST(TrainForest, RespectsDepth) {
  const Dataset d = make_blobs(300, 4, 5);
  const Ensemble e = train_forest(d, ForestConfig{3, 2, 0, true, 0});
  for (const Tree& t : e.trees()) EXPECT_LE(t.depth(), 2);
}

TEST(TrainForest, FitsTrainingDataWell) {
  const Dataset d = make_blobs(300, 3, 0);
  const Ensemble e = train_forest(d, ForestConfig{10, 5, 0, true, 0});
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += e.predict(d.rows[i]) == d.labels[i];
  EXPECT_GT(static_cast<double>(hits) / d.size(), 0.9);
}

TEST(TrainForest, RejectsBadInput) {
  Dataset empty = separable_line().subset({});
  EXPECT_THROW(train_forest(empty, ForestConfig{}), ConfigError);
  EXPECT_THROW(train_forest(separable_line(), ForestConfig{0, 3, 0, true, 0}), ConfigError);
  EXPECT_THROW(train_forest(separable_line(), ForestConfig{1, 0, 0, true, 0}), ConfigError);
}

TEST(Dataset, CsvTypesAndDomains) {
  const Dataset d = parse_csv("a,flag,label\n0.5,1,b\n2.5,0,a\n1.0,1,b\n", "t");
  EXPECT_EQ(d.schema.features[0].lo, 0.5);
  EXPECT_EQ(d.schema.features[0].hi, 2.5);
  EXPECT_EQ(d.schema.features[1].kind, FeatureKind::kBinary);
  EXPECT_EQ(d.classes, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.labels, (std::vector<ClassIndex>{1, 0, 1}));
}

TEST(Dataset, MalformedCsv) {
  EXPECT_THROW(parse_csv("a,label\n1,x,3\n", "bad"), FormatError);
  EXPECT_THROW(parse_csv("a,label\nzz,x\n", "bad"), FormatError);
}

TEST(Dataset, BundledSetsResolve) {
  const Dataset bc = resolve_dataset("breast_cancer", CFMAPS_DATA_DIR);
  EXPECT_EQ(bc.size(), 569u);
  EXPECT_EQ(bc.classes.size(), 2u);
  const Dataset iris = resolve_dataset("iris_binary", CFMAPS_DATA_DIR);
  EXPECT_EQ(iris.size(), 100u);
  EXPECT_EQ(iris.schema.size(), 4u);
  EXPECT_EQ(resolve_dataset("blobs", CFMAPS_DATA_DIR).size(), 300u);
  EXPECT_THROW(resolve_dataset("no_such_set", CFMAPS_DATA_DIR), NotFoundError);
}

TEST(Dataset, SplitIsSeededPartition) {
  const Dataset d = make_blobs(100, 2, 1);
  const auto [train, test] = train_test_split(d, 0.2, 5);
  EXPECT_EQ(train.size() + test.size(), 100u);
  EXPECT_EQ(test.size(), 20u);
  const auto [train2, test2] = train_test_split(d, 0.2, 5);
  EXPECT_EQ(test.rows, test2.rows);
}

}  // namespace
}  // namespace cfmaps
