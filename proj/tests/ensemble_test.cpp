#include <gtest/gtest.h>

#include <random>

#include "cfmaps/dataset.hpp"
#include "cfmaps/ensemble.hpp"
#include "cfmaps/error.hpp"
#include "cfmaps/training.hpp"
#include "fixtures.hpp"

namespace cfmaps {
namespace {

using testing::class_names;
using testing::leaf;
using testing::stump;
using testing::unit_schema;

// Independent evaluator: walks the tree recursively instead of iterating.
int walk(const Tree& t, int node, std::span<const double> x) {
  const TreeNode& n = t.nodes[node];
  if (n.is_leaf()) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(n.votes.size()); ++c) {
      if (n.votes[c] > n.votes[best]) best = c;
    }
    return best;
  }
  return walk(t, x[n.feature] <= n.threshold ? n.left : n.right, x);
}

int reference_predict(const Ensemble& e, std::span<const double> x) {
  std::vector<int> counts(e.n_classes(), 0);
  for (const Tree& t : e.trees()) ++counts[walk(t, 0, x)];
  int best = 0;
  for (int c = 1; c < e.n_classes(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

TEST(Predict, SingleSplit) {
  Ensemble e(unit_schema(1), class_names(2), {stump(0, 0.5, 0, 1, 2)});
  EXPECT_EQ(e.predict(std::vector<double>{0.2}), 0);
  EXPECT_EQ(e.predict(std::vector<double>{0.7}), 1);
}

TEST(Predict, BoundaryRoutesLeft) {
  Ensemble e(unit_schema(1), class_names(2), {stump(0, 0.5, 0, 1, 2)});
  EXPECT_EQ(e.predict(std::vector<double>{0.5}), 0);
  EXPECT_EQ(e.predict(std::vector<double>{std::nextafter(0.5, 1.0)}), 1);
}

TEST(Predict, ThreeTreeVote) {
  // Trees vote 0, 1, 1 at x = (0.3, 0.8).
  std::vector<Tree> trees{stump(0, 0.5, 0, 1, 2), stump(1, 0.5, 0, 1, 2), stump(0, 0.2, 0, 1, 2)};
  Ensemble e(unit_schema(2), class_names(2), trees);
  const std::vector<double> x{0.3, 0.8};
  EXPECT_EQ(walk(e.trees()[0], 0, x), 0);
  EXPECT_EQ(walk(e.trees()[1], 0, x), 1);
  EXPECT_EQ(walk(e.trees()[2], 0, x), 1);
  EXPECT_EQ(e.vote_counts(x), (std::vector<int>{1, 2}));
  EXPECT_EQ(e.predict(x), 1);
}

TEST(Predict, AgreesWithRecursiveEvaluator) {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Ensemble e = testing::random_ensemble(seed, 3, 5, 4, 3);
    for (int i = 0; i < 500; ++i) {
      const auto x = testing::random_point(rng, 3);
      ASSERT_EQ(e.predict(x), reference_predict(e, x));
    }
  }
}

TEST(Predict, VoteTieGoesToLowestClass) {
  std::vector<Tree> trees{testing::constant_tree(2, 3), testing::constant_tree(1, 3)};
  Ensemble e(unit_schema(1), class_names(3), trees);
  EXPECT_EQ(e.predict(std::vector<double>{0.4}), 1);
  const std::vector<int> counts{2, 0, 2};
  EXPECT_EQ(majority(counts), 0);
}

TEST(Predict, LeafVoteTieGoesToLowestClass) {
  Tree t;
  TreeNode n;
  n.votes = {0.0, 3.0, 3.0};
  t.nodes.push_back(n);
  EXPECT_EQ(t.leaf_class(0), 1);
}

TEST(Predict, RejectsBadPoints) {
  Ensemble e(unit_schema(2), class_names(2), {stump(0, 0.5, 0, 1, 2)});
  EXPECT_THROW(e.predict(std::vector<double>{0.5}), SchemaError);
  EXPECT_THROW(e.predict(std::vector<double>{0.5, 1.5}), DomainError);
}

TEST(EnsembleInvariants, RejectsThresholdOnDomainEdge) {
  EXPECT_THROW(Ensemble(unit_schema(1), class_names(2), {stump(0, 1.0, 0, 1, 2)}), InvariantError);
}

TEST(EnsembleInvariants, RejectsBadFeatureIndex) {
  EXPECT_THROW(Ensemble(unit_schema(1), class_names(2), {stump(3, 0.5, 0, 1, 2)}), SchemaError);
}

TEST(EnsembleInvariants, RejectsBadVotes) {
  Tree t = stump(0, 0.5, 0, 1, 2);
  t.nodes[1].votes = {0.0, 0.0};
  EXPECT_THROW(Ensemble(unit_schema(1), class_names(2), {t}), InvariantError);
  t.nodes[1].votes = {1.0};
  EXPECT_THROW(Ensemble(unit_schema(1), class_names(2), {t}), InvariantError);
}

TEST(EnsembleInvariants, RejectsSharedChild) {
  Tree t = stump(0, 0.5, 0, 1, 2);
  t.nodes[0].right = 1;
  EXPECT_THROW(Ensemble(unit_schema(1), class_names(2), {t}), InvariantError);
}

TEST(ModelIo, RoundTripOnTrainedForest) {
  const Dataset d = make_blobs(200, 3, 4);
  const Ensemble e = train_forest(d, ForestConfig{5, 4, 11, true, 0});
  const Ensemble back = load_model(save_model(e));
  EXPECT_EQ(save_model(back), save_model(e));
  std::mt19937_64 rng(3);
  const Box dom = e.schema().domain();
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(2);
    for (std::size_t k = 0; k < 2; ++k) {
      x[k] = std::uniform_real_distribution<double>(dom.lo[k], dom.hi[k])(rng);
    }
    ASSERT_EQ(back.predict(x), e.predict(x));
  }
}

TEST(ModelIo, RoundTripOnExhaustiveGrid) {
  const Ensemble e = testing::random_ensemble(5, 2, 4, 4, 2);
  const Ensemble back = load_model(save_model(e));
  // Lattice includes every threshold k/16 and the points in between.
  for (int i = 0; i <= 64; ++i) {
    for (int j = 0; j <= 64; ++j) {
      const std::vector<double> x{i / 64.0, j / 64.0};
      ASSERT_EQ(back.predict(x), e.predict(x));
    }
  }
}

TEST(ModelIo, MissingClassesNamesTheField) {
  const std::string doc = R"({"version":1,"schema":{"features":[{"name":"a","kind":"continuous","lo":0,"hi":1}]},
    "trees":[{"votes":[1]}]})";
  try {
    load_model(doc);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& err) {
    EXPECT_NE(std::string(err.what()).find("classes"), std::string::npos) << err.what();
  }
}

TEST(ModelIo, DistinctDiagnostics) {
  EXPECT_THROW(load_model("{not json"), FormatError);
  EXPECT_THROW(load_model(R"({"version":7})"), VersionError);
  const std::string bad_threshold = R"({"version":1,
    "schema":{"features":[{"name":"a","kind":"continuous","lo":0,"hi":1}]},
    "classes":["n","y"],
    "trees":[{"feature":0,"threshold":2.0,"left":{"votes":[1,0]},"right":{"votes":[0,1]}}]})";
  EXPECT_THROW(load_model(bad_threshold), InvariantError);
}

TEST(ModelIo, HandWrittenDocument) {
  const std::string doc = R"({"version":1,
    "schema":{"features":[
      {"name":"age","kind":"continuous","lo":18,"hi":90},
      {"name":"smoker","kind":"binary","lo":0,"hi":1}]},
    "classes":["low","high"],
    "trees":[{"feature":1,"threshold":0.5,
              "left":{"votes":[4,1]},
              "right":{"feature":0,"threshold":40,"left":{"votes":[3,2]},"right":{"votes":[0,5]}}}]})";
  const Ensemble e = load_model(doc);
  EXPECT_EQ(e.n_features(), 2u);
  EXPECT_EQ(e.classes(), (std::vector<std::string>{"low", "high"}));
  EXPECT_EQ(e.schema().features[1].kind, FeatureKind::kBinary);
  EXPECT_EQ(e.predict(std::vector<double>{60, 0}), 0);
  EXPECT_EQ(e.predict(std::vector<double>{30, 1}), 0);
  EXPECT_EQ(e.predict(std::vector<double>{40, 1}), 0);
  EXPECT_EQ(e.predict(std::vector<double>{41, 1}), 1);
}

TEST(ModelHash, StableAndSensitive) {
  const Ensemble a = testing::random_ensemble(1, 2, 2, 2, 2);
  const Ensemble b = testing::random_ensemble(2, 2, 2, 2, 2);
  EXPECT_EQ(model_hash(a), model_hash(load_model(save_model(a))));
  EXPECT_NE(model_hash(a), model_hash(b));
  EXPECT_EQ(model_hash(a).size(), 16u);
  // Published FNV-1a 64 test vector.
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace cfmaps
