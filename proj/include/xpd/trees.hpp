#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xpd/common.hpp"

namespace xpd {

/// Per-feature quantile bin edges. A value v falls in bin k where k is the
/// number of edges <= v, so a feature with e edges has e + 1 bins.
class BinMap {
 public:
  BinMap() = default;
  explicit BinMap(std::vector<std::vector<double>> edges);

  std::size_t features() const { return edges_.size(); }
  std::size_t bins(std::size_t feature) const { return edges_[feature].size() + 1; }
  const std::vector<double>& edges(std::size_t feature) const { return edges_[feature]; }
  const std::vector<std::vector<double>>& all_edges() const { return edges_; }

  /// Values outside the training range clamp to the boundary bins.
  std::uint8_t bin(std::size_t feature, double value) const;

  bool operator==(const BinMap&) const = default;

 private:
  std::vector<std::vector<double>> edges_;
};

BinMap build_binmap(const Matrix& x, std::size_t max_bins = 256);

/// Column-major bin codes for a matrix under a BinMap.
class BinnedMatrix {
 public:
  BinnedMatrix(const Matrix& x, const BinMap& map);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }
  std::span<const std::uint8_t> column(std::size_t feature) const { return columns_[feature]; }
  const BinMap& binmap() const { return *map_; }

 private:
  std::size_t rows_;
  std::vector<std::vector<std::uint8_t>> columns_;
  const BinMap* map_;
};

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Binary tree stored as a node array; node 0 is the root.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes);

  static Tree leaf(double value, double cover);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t depth() const;
  std::size_t leaves() const;

  bool operator==(const Tree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct TreeParams {
  std::size_t max_depth = 6;
  std::size_t max_leaves = 0;  // 0 = unlimited
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  std::vector<std::size_t> allowed_features;  // empty = all
};

/// Second-order split gain of a candidate partition.
double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda, double gamma);

/// Newton leaf weight -G / (H + lambda).
double leaf_weight(double g, double h, double lambda);

/// Greedy best-first tree growth over histogram bins. Nodes are expanded in
/// order of decreasing gain (ties: creation order); growth stops on depth,
/// leaf budget, non-positive gain or a child below min_child_weight. Gain
/// ties go to the lowest feature index, then the lowest threshold.
Tree fit_tree(const BinnedMatrix& x, std::span<const GradPair> grad, const TreeParams& params);

/// Routes left iff value < threshold.
double predict_tree(const Tree& tree, std::span<const double> row);

}  // namespace xpd
