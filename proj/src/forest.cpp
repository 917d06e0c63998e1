#include "rfk/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "rfk/parallel.hpp"
#include "rfk/random.hpp"

namespace rfk {

Partition::Partition(std::vector<int> cell_of) : cell_of_(std::move(cell_of)) {
  if (cell_of_.empty()) throw std::invalid_argument("partition over zero observations");
  const int max_cell = *std::max_element(cell_of_.begin(), cell_of_.end());
  if (*std::min_element(cell_of_.begin(), cell_of_.end()) < 0) {
    throw std::invalid_argument("partition has a negative cell index");
  }
  num_cells_ = max_cell + 1;
  std::vector<char> seen(static_cast<std::size_t>(num_cells_), 0);
  for (int c : cell_of_) seen[static_cast<std::size_t>(c)] = 1;
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::invalid_argument("partition has an empty cell");
  }
}

Partition Partition::single_cell(std::size_t n) { return Partition(std::vector<int>(n, 0)); }

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("tree has no nodes");
  std::vector<int> leaf_ids;
  const int count = static_cast<int>(nodes_.size());
  for (const TreeNode& node : nodes_) {
    if (node.is_leaf()) {
      leaf_ids.push_back(node.leaf_id);
    } else if (node.left <= 0 || node.right <= 0 || node.left >= count || node.right >= count ||
               node.left == node.right) {
      throw std::invalid_argument("internal tree node needs two distinct children");
    }
  }
  std::sort(leaf_ids.begin(), leaf_ids.end());
  for (std::size_t i = 0; i < leaf_ids.size(); ++i) {
    if (leaf_ids[i] != static_cast<int>(i)) {
      throw std::invalid_argument("leaf ids must be distinct and contiguous from 0");
    }
  }
  num_leaves_ = static_cast<int>(leaf_ids.size());
}

std::size_t Tree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.is_leaf()) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

int Tree::leaf_of(const DataMatrix& x, std::size_t row) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    const double v = x(row, static_cast<std::size_t>(node->split_feature));
    node = &nodes_[static_cast<std::size_t>(v <= node->split_threshold ? node->left : node->right)];
  }
  return node->leaf_id;
}

Partition Tree::route(const DataMatrix& x) const {
  std::vector<int> cells(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) cells[i] = leaf_of(x, i);
  return Partition(std::move(cells));
}

void ForestConfig::validate(std::size_t num_features) const {
  if (num_trees < 1) throw std::invalid_argument("num_trees must be >= 1");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  if (mtry < 0 || static_cast<std::size_t>(mtry) > num_features) {
    throw std::invalid_argument("mtry must lie in [1, p] (or 0 for the default), got " +
                                std::to_string(mtry));
  }
}

int ForestConfig::resolved_mtry(std::size_t num_features, bool supervised) const {
  if (mtry > 0) return mtry;
  const int p = static_cast<int>(num_features);
  return supervised ? std::max(1, p / 3) : p;
}

std::string to_string(ForestKind kind) {
  switch (kind) {
    case ForestKind::supervised: return "supervised";
    case ForestKind::unsupervised: return "unsupervised";
    case ForestKind::identity: return "identity";
  }
  return "unknown";
}

Forest::Forest(ForestKind kind, std::vector<Partition> partitions, std::size_t identity_count)
    : kind_(kind), partitions_(std::move(partitions)), identity_count_(identity_count) {
  for (const Partition& part : partitions_) {
    if (part.size() != partitions_.front().size()) {
      throw std::invalid_argument("forest partitions disagree on the number of observations");
    }
  }
  if (identity_count_ > partitions_.size()) {
    throw std::invalid_argument("identity_count exceeds the number of partitions");
  }
}

namespace {

// Draws k distinct feature indices and returns them in ascending order.
std::vector<std::size_t> sample_features(std::size_t p, int k, Engine& rng,
                                         std::vector<std::size_t>& pool) {
  pool.resize(p);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < kk; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, p - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<std::size_t> out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kk));
  std::sort(out.begin(), out.end());
  return out;
}

class TreeGrower {
 public:
  TreeGrower(const DataMatrix& x, std::span<const std::size_t> sample, int mtry, int min_leaf,
             int max_depth, std::uint64_t seed)
      : x_(x),
        members_(sample.begin(), sample.end()),
        mtry_(mtry),
        min_leaf_(static_cast<std::size_t>(min_leaf)),
        max_depth_(max_depth),
        rng_(seed) {
    if (members_.empty()) throw std::invalid_argument("tree needs a nonempty training sample");
    if (mtry < 1 || static_cast<std::size_t>(mtry) > x.cols()) {
      throw std::invalid_argument("mtry must lie in [1, p]");
    }
    for (std::size_t row : members_) {
      if (row >= x.rows()) throw std::invalid_argument("training sample row out of range");
    }
  }

  template <typename SplitFinder>
  Tree grow(SplitFinder&& find_split) {
    build(0, members_.size(), 0, find_split);
    return Tree(std::move(nodes_));
  }

 protected:
  struct Split {
    int feature = TreeNode::kLeaf;
    double threshold = 0.0;
  };

  const DataMatrix& x_;
  std::vector<std::size_t> members_;
  int mtry_;
  std::size_t min_leaf_;
  int max_depth_;
  Engine rng_;
  std::vector<std::size_t> feature_pool_;

 private:
  template <typename SplitFinder>
  int build(std::size_t begin, std::size_t end, int depth, SplitFinder& find_split) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    Split split;
    const bool may_split =
        end - begin >= 2 * min_leaf_ && (max_depth_ == 0 || depth < max_depth_);
    if (may_split) split = find_split(begin, end);

    if (split.feature == TreeNode::kLeaf) {
      nodes_[static_cast<std::size_t>(id)].leaf_id = next_leaf_++;
      return id;
    }

    const auto f = static_cast<std::size_t>(split.feature);
    auto first = members_.begin() + static_cast<std::ptrdiff_t>(begin);
    auto last = members_.begin() + static_cast<std::ptrdiff_t>(end);
    auto mid = std::stable_partition(first, last, [&](std::size_t row) {
      return x_(row, f) <= split.threshold;
    });
    const auto cut = static_cast<std::size_t>(mid - members_.begin());

    const int left = build(begin, cut, depth + 1, find_split);
    const int right = build(cut, end, depth + 1, find_split);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.split_feature = split.feature;
    node.split_threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  std::vector<TreeNode> nodes_;
  int next_leaf_ = 0;
};

// Row indices of x sorted by each feature; shared by all trees of a forest.
struct FeatureOrder {
  explicit FeatureOrder(const DataMatrix& x) : order(x.cols()) {
    for (std::size_t f = 0; f < x.cols(); ++f) {
      auto& o = order[f];
      o.resize(x.rows());
      std::iota(o.begin(), o.end(), std::size_t{0});
      std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }
  }
  std::vector<std::vector<std::size_t>> order;
};

class RegressionGrower : public TreeGrower {
 public:
  RegressionGrower(const DataMatrix& x, std::span<const double> y,
                   std::span<const std::size_t> sample, int mtry, int min_leaf, int max_depth,
                   std::uint64_t seed, const FeatureOrder& order)
      : TreeGrower(x, sample, mtry, min_leaf, max_depth, seed),
        y_(y),
        order_(order),
        multiplicity_(x.rows(), 0) {}

  Tree run() {
    return grow([this](std::size_t b, std::size_t e) { return best_split(b, e); });
  }

 private:
  struct Entry {
    double x;
    double y_sum;
    std::size_t weight;
  };

  // Members of [begin, end) sorted by feature f, with repeated rows merged into one entry.
  void sorted_entries(std::size_t f, std::size_t begin, std::size_t end, double mean) {
    entries_.clear();
    const std::size_t count = end - begin;
    const std::size_t n = x_.rows();
    const double log_count = std::log2(static_cast<double>(count) + 1.0);
    if (static_cast<double>(count) * log_count > static_cast<double>(n)) {
      for (std::size_t row : order_.order[f]) {
        const std::size_t w = multiplicity_[row];
        if (w == 0) continue;
        entries_.push_back({x_(row, f), static_cast<double>(w) * (y_[row] - mean), w});
      }
    } else {
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t row = members_[k];
        entries_.push_back({x_(row, f), y_[row] - mean, 1});
      }
      std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.x < b.x || (a.x == b.x && a.y_sum < b.y_sum);
      });
    }
  }

  Split best_split(std::size_t begin, std::size_t end) {
    const std::size_t count = end - begin;
    double mean = 0.0;
    bool pure = true;
    const double first_y = y_[members_[begin]];
    for (std::size_t k = begin; k < end; ++k) {
      const double v = y_[members_[k]];
      mean += v;
      pure = pure && v == first_y;
    }
    if (pure) return {};
    mean /= static_cast<double>(count);

    double node_sse = 0.0;
    double total = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t row = members_[k];
      const double d = y_[row] - mean;
      node_sse += d * d;
      total += d;
      ++multiplicity_[row];
    }

    const auto candidates = sample_features(x_.cols(), mtry_, rng_, feature_pool_);

    // Centered responses: maximizing sum_L^2/n_L + sum_R^2/n_R minimizes the child SSE.
    Split best;
    double best_score = 1e-12 * node_sse;
    for (std::size_t f : candidates) {
      sorted_entries(f, begin, end, mean);
      double left_sum = 0.0;
      std::size_t n_left = 0;
      for (std::size_t k = 0; k + 1 < entries_.size(); ++k) {
        left_sum += entries_[k].y_sum;
        n_left += entries_[k].weight;
        const std::size_t n_right = count - n_left;
        if (n_left < min_leaf_) continue;
        if (n_right < min_leaf_) break;
        const double lo = entries_[k].x;
        const double hi = entries_[k + 1].x;
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n_right);
        if (score > best_score) {
          best_score = score;
          best.feature = static_cast<int>(f);
          double t = 0.5 * lo + 0.5 * hi;
          if (!(t < hi) || t < lo) t = lo;
          best.threshold = t;
        }
      }
    }

    for (std::size_t k = begin; k < end; ++k) multiplicity_[members_[k]] = 0;
    return best;
  }

  std::span<const double> y_;
  const FeatureOrder& order_;
  std::vector<std::size_t> multiplicity_;
  std::vector<Entry> entries_;
};

class RandomGrower : public TreeGrower {
 public:
  using TreeGrower::TreeGrower;

  Tree run() {
    return grow([this](std::size_t b, std::size_t e) { return random_split(b, e); });
  }

 private:
  // Candidates are drawn one at a time (lazy Fisher-Yates); the first one that is not constant
  // on the node is uniform over the non-constant features among the mtry candidates.
  Split random_split(std::size_t begin, std::size_t end) {
    const std::size_t p = x_.cols();
    feature_pool_.resize(p);
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
    for (std::size_t i = 0; i < static_cast<std::size_t>(mtry_); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p - 1);
      std::swap(feature_pool_[i], feature_pool_[pick(rng_)]);
      const std::size_t f = feature_pool_[i];
      double lo = x_(members_[begin], f);
      double hi = lo;
      for (std::size_t k = begin + 1; k < end; ++k) {
        const double v = x_(members_[k], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(lo < hi)) continue;
      std::uniform_real_distribution<double> draw(lo, hi);
      double t = draw(rng_);
      while (!(t > lo && t < hi)) t = draw(rng_);
      return {static_cast<int>(f), t};
    }
    return {};
  }
};

std::vector<std::size_t> draw_sample(std::size_t n, bool bootstrap, Engine& rng) {
  std::vector<std::size_t> sample(n);
  if (bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& s : sample) s = pick(rng);
    std::sort(sample.begin(), sample.end());
  } else {
    std::iota(sample.begin(), sample.end(), std::size_t{0});
  }
  return sample;
}

template <typename GrowOne>
std::vector<Partition> grow_partitions(const DataMatrix& x, const ForestConfig& cfg,
                                       GrowOne&& grow_one) {
  const auto m = static_cast<std::size_t>(cfg.num_trees);
  std::vector<Partition> partitions(m, Partition::single_cell(x.rows()));
  parallel_for(m, cfg.threads, [&](std::size_t t) {
    Engine sampler = make_engine(cfg.seed, {t, 0});
    const auto sample = draw_sample(x.rows(), cfg.bootstrap, sampler);
    const Tree tree = grow_one(sample, derive_seed(cfg.seed, {t, 1}));
    partitions[t] = tree.route(x);
  });
  return partitions;
}

}  // namespace

Tree grow_regression_tree(const DataMatrix& x, std::span<const double> y,
                          std::span<const std::size_t> sample, int mtry, int min_leaf,
                          int max_depth, std::uint64_t seed) {
  if (y.size() != x.rows()) throw std::invalid_argument("y length does not match X rows");
  const FeatureOrder order(x);
  return RegressionGrower(x, y, sample, mtry, min_leaf, max_depth, seed, order).run();
}

Tree grow_random_tree(const DataMatrix& x, std::span<const std::size_t> sample, int mtry,
                      int min_leaf, int max_depth, std::uint64_t seed) {
  return RandomGrower(x, sample, mtry, min_leaf, max_depth, seed).run();
}

Forest build_supervised_forest(const DataMatrix& x, std::span<const double> y,
                               const ForestConfig& cfg) {
  cfg.validate(x.cols());
  if (y.size() != x.rows()) {
    throw std::invalid_argument("y has " + std::to_string(y.size()) + " values but X has " +
                                std::to_string(x.rows()) + " rows");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw DataError("non-finite response at row " + std::to_string(i + 1));
    }
  }
  const int mtry = cfg.resolved_mtry(x.cols(), true);
  const FeatureOrder order(x);
  auto partitions = grow_partitions(x, cfg, [&](std::span<const std::size_t> sample, std::uint64_t seed) {
    return RegressionGrower(x, y, sample, mtry, cfg.min_leaf, cfg.max_depth, seed, order).run();
  });
  return Forest(ForestKind::supervised, std::move(partitions));
}

Forest build_unsupervised_forest(const DataMatrix& x, const ForestConfig& cfg) {
  cfg.validate(x.cols());
  const int mtry = cfg.resolved_mtry(x.cols(), false);
  auto partitions = grow_partitions(x, cfg, [&](std::span<const std::size_t> sample, std::uint64_t seed) {
    return grow_random_tree(x, sample, mtry, cfg.min_leaf, cfg.max_depth, seed);
  });
  return Forest(ForestKind::unsupervised, std::move(partitions));
}

Partition identity_partition(const DataMatrix& x) {
  std::map<std::vector<std::uint64_t>, int> cell_of_row;
  std::vector<int> cells(x.rows());
  std::vector<std::uint64_t> key(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) key[j] = std::bit_cast<std::uint64_t>(x(i, j));
    auto [it, inserted] = cell_of_row.try_emplace(key, static_cast<int>(cell_of_row.size()));
    cells[i] = it->second;
  }
  return Partition(std::move(cells));
}

Forest identity_forest(const DataMatrix& x, std::size_t count) {
  if (count == 0) throw std::invalid_argument("identity forest needs count >= 1");
  std::vector<Partition> partitions(count, identity_partition(x));
  return Forest(ForestKind::identity, std::move(partitions), count);
}

}  // namespace rfk
