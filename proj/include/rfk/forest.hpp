#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfk/data.hpp"

namespace rfk {

/// Leaf-cell assignment of the n training observations for one tree.
/// Cells are numbered 0..num_cells()-1 and every cell is nonempty.
class Partition {
 public:
  explicit Partition(std::vector<int> cell_of);

  std::size_t size() const { return cell_of_.size(); }
  int num_cells() const { return num_cells_; }
  int operator[](std::size_t i) const { return cell_of_[i]; }
  const std::vector<int>& cells() const { return cell_of_; }

  /// The one-cell partition of n points.
  static Partition single_cell(std::size_t n);

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> cell_of_;
  int num_cells_ = 0;
};

struct TreeNode {
  static constexpr int kLeaf = -1;

  int split_feature = kLeaf;
  double split_threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_id = -1;

  bool is_leaf() const { return split_feature == kLeaf; }
};

/// Binary axis-aligned tree. Node 0 is the root; rows with x[feature] <= threshold go left.
class Tree {
 public:
  explicit Tree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int num_leaves() const { return num_leaves_; }
  std::size_t depth() const;

  int leaf_of(const DataMatrix& x, std::size_t row) const;
  /// Routes every row of x, including rows not used to grow the tree.
  Partition route(const DataMatrix& x) const;

 private:
  std::vector<TreeNode> nodes_;
  int num_leaves_ = 0;
};

struct ForestConfig {
  int num_trees = 500;
  /// Candidate features per split; 0 picks the kind-specific default
  /// (max(1, floor(p/3)) supervised, p unsupervised).
  int mtry = 0;
  int min_leaf = 5;
  /// 0 means unlimited depth.
  int max_depth = 0;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  /// 0 means available parallelism. Results never depend on this value.
  unsigned threads = 1;

  void validate(std::size_t num_features) const;
  int resolved_mtry(std::size_t num_features, bool supervised) const;
};

enum class ForestKind { supervised, unsupervised, identity };

std::string to_string(ForestKind kind);

class Forest {
 public:
  Forest(ForestKind kind, std::vector<Partition> partitions, std::size_t identity_count = 0);

  ForestKind kind() const { return kind_; }
  const std::vector<Partition>& partitions() const { return partitions_; }
  std::size_t num_partitions() const { return partitions_.size(); }
  std::size_t num_observations() const { return partitions_.empty() ? 0 : partitions_.front().size(); }
  /// Partitions that are identity partitions (appended by the nondegeneracy mixture).
  std::size_t identity_count() const { return identity_count_; }

 private:
  ForestKind kind_;
  std::vector<Partition> partitions_;
  std::size_t identity_count_ = 0;
};

/// One CART regression tree minimizing child sum of squares of y. `sample` lists the training
/// rows (with repetition for bootstrap draws). Used by build_supervised_forest.
Tree grow_regression_tree(const DataMatrix& x, std::span<const double> y,
                          std::span<const std::size_t> sample, int mtry, int min_leaf,
                          int max_depth, std::uint64_t seed);

/// One completely random tree: random feature among non-constant candidates, threshold
/// uniform in the node's open (min, max) range.
Tree grow_random_tree(const DataMatrix& x, std::span<const std::size_t> sample, int mtry,
                      int min_leaf, int max_depth, std::uint64_t seed);

Forest build_supervised_forest(const DataMatrix& x, std::span<const double> y,
                               const ForestConfig& cfg);

/// Defaults differ from the supervised forest: callers typically pass bootstrap = false.
Forest build_unsupervised_forest(const DataMatrix& x, const ForestConfig& cfg);

/// The partition placing each distinct row (bitwise) in its own cell.
Partition identity_partition(const DataMatrix& x);

Forest identity_forest(const DataMatrix& x, std::size_t count);

}  // namespace rfk
