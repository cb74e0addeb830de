#include "cfmaps/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cfmaps/error.hpp"

namespace cfmaps {

namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += c * c;
  return 1.0 - sum_sq / (total * total);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();  // weighted child impurity
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestConfig& config, std::mt19937_64& rng)
      : data_(data), config_(config), rng_(rng), n_classes_(static_cast<int>(data.classes.size())) {
    const int m = static_cast<int>(data.schema.size());
    max_features_ = config.max_features > 0
                        ? std::min(config.max_features, m)
                        : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(m)))));
  }

  Tree build(std::vector<std::size_t> samples) {
    tree_ = Tree{};
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  std::vector<double> class_counts(const std::vector<std::size_t>& samples) const {
    std::vector<double> counts(n_classes_, 0.0);
    for (std::size_t i : samples) counts[data_.labels[i]] += 1.0;
    return counts;
  }

  int grow(std::vector<std::size_t> samples, int depth) {
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> counts = class_counts(samples);
    const int distinct = static_cast<int>(std::count_if(counts.begin(), counts.end(),
                                                        [](double c) { return c > 0.0; }));
    Split split;
    if (depth < config_.max_depth && distinct > 1) split = best_split(samples, counts);
    if (split.feature < 0) {
      tree_.nodes[index].votes = std::move(counts);
      return index;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : samples) {
      (data_.rows[i][split.feature] <= split.threshold ? left : right).push_back(i);
    }
    samples.clear();
    samples.shrink_to_fit();
    tree_.nodes[index].feature = split.feature;
    tree_.nodes[index].threshold = split.threshold;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[index].left = l;
    tree_.nodes[index].right = r;
    return index;
  }

  // Best split over a random feature subset; when none of the sampled features
  // admits a split the remaining features are tried before giving up.
  Split best_split(const std::vector<std::size_t>& samples, const std::vector<double>& counts) {
    const int m = static_cast<int>(data_.schema.size());
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    Split best;
    for (int visited = 0; visited < m; ++visited) {
      if (visited >= max_features_ && best.feature >= 0) break;
      consider_feature(order[visited], samples, counts, best);
    }
    return best;
  }

  void consider_feature(int f, const std::vector<std::size_t>& samples,
                        const std::vector<double>& counts, Split& best) const {
    std::vector<std::pair<double, ClassIndex>> values;
    values.reserve(samples.size());
    for (std::size_t i : samples) values.emplace_back(data_.rows[i][f], data_.labels[i]);
    std::sort(values.begin(), values.end());
    const double total = static_cast<double>(values.size());
    const Feature& feature = data_.schema.features[f];
    std::vector<double> left(n_classes_, 0.0);
    std::vector<double> right = counts;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      left[values[i].second] += 1.0;
      right[values[i].second] -= 1.0;
      const double a = values[i].first;
      const double b = values[i + 1].first;
      if (!(a < b)) continue;
      const double t = a + (b - a) / 2.0;
      if (!(t >= a && t < b) || !(t > feature.lo && t < feature.hi)) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = total - nl;
      const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
      if (score < best.score) {
        best.score = score;
        best.feature = f;
        best.threshold = t;
      }
    }
  }

  const Dataset& data_;
  const ForestConfig& config_;
  std::mt19937_64& rng_;
  int n_classes_;
  int max_features_ = 1;
  Tree tree_;
};

}  // namespace

Ensemble train_forest(const Dataset& data, const ForestConfig& config) {
  if (data.size() == 0) throw ConfigError("cannot train on an empty dataset");
  if (config.n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (config.max_depth < 1) throw ConfigError("max_depth must be >= 1");
  for (const auto& row : data.rows) {
    if (row.size() != data.schema.size()) throw SchemaError("dataset row does not match schema");
  }
  std::mt19937_64 rng(config.seed);
  TreeBuilder builder(data, config, rng);
  std::vector<Tree> trees;
  const std::size_t n = data.size();
  for (int t = 0; t < config.n_trees; ++t) {
    std::vector<std::size_t> samples(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t& s : samples) s = pick(rng);
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    trees.push_back(builder.build(std::move(samples)));
  }
  return Ensemble(data.schema, data.classes, std::move(trees));
}

}  // namespace cfmaps
