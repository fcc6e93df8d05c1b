#include "xpd/trees.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace xpd {

BinMap::BinMap(std::vector<std::vector<double>> edges) : edges_(std::move(edges)) {
  for (const auto& e : edges_) {
    if (e.size() > 255) throw std::invalid_argument("BinMap: at most 255 edges per feature");
    for (std::size_t i = 1; i < e.size(); ++i) {
      if (!(e[i - 1] < e[i])) throw std::invalid_argument("BinMap: edges must be strictly increasing");
    }
  }
}

std::uint8_t BinMap::bin(std::size_t feature, double value) const {
  const auto& e = edges_[feature];
  return static_cast<std::uint8_t>(std::upper_bound(e.begin(), e.end(), value) - e.begin());
}

namespace {

// A cut strictly above `lo` and at most `hi`, so lo bins left and hi bins right.
double cut_between(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

}  // namespace

BinMap build_binmap(const Matrix& x, std::size_t max_bins) {
  if (max_bins < 2 || max_bins > 256) throw std::invalid_argument("build_binmap: max_bins must lie in [2, 256]");
  std::vector<std::vector<double>> all(x.cols());
  std::vector<double> column(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x(r, f);
    std::sort(column.begin(), column.end());

    std::vector<double> distinct;
    std::vector<std::size_t> counts;
    for (double v : column) {
      if (distinct.empty() || distinct.back() != v) {
        distinct.push_back(v);
        counts.push_back(1);
      } else {
        ++counts.back();
      }
    }

    auto& edges = all[f];
    if (distinct.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) edges.push_back(cut_between(distinct[i], distinct[i + 1]));
      continue;
    }
    const double n = static_cast<double>(column.size());
    std::size_t cumulative = 0;
    std::size_t next_target = 1;
    for (std::size_t i = 0; i + 1 < distinct.size() && next_target < max_bins; ++i) {
      cumulative += counts[i];
      const double target = n * static_cast<double>(next_target) / static_cast<double>(max_bins);
      if (static_cast<double>(cumulative) >= target) {
        edges.push_back(cut_between(distinct[i], distinct[i + 1]));
        while (next_target < max_bins &&
               static_cast<double>(cumulative) >= n * static_cast<double>(next_target) / static_cast<double>(max_bins)) {
          ++next_target;
        }
      }
    }
  }
  return BinMap(std::move(all));
}

BinnedMatrix::BinnedMatrix(const Matrix& x, const BinMap& map) : rows_(x.rows()), columns_(x.cols()), map_(&map) {
  if (map.features() != x.cols()) throw std::invalid_argument("BinnedMatrix: binmap feature count mismatch");
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& col = columns_[f];
    col.resize(rows_);
    for (std::size_t r = 0; r < rows_; ++r) col[r] = map.bin(f, x(r, f));
  }
}

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("Tree: no nodes");
  const auto n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n)) {
      throw std::invalid_argument("Tree: child index out of range");
    }
    if (node.is_leaf() && !std::isfinite(node.value)) throw std::invalid_argument("Tree: non-finite leaf value");
  }
}

Tree Tree::leaf(double value, double cover) {
  TreeNode node;
  node.value = value;
  node.cover = cover;
  return Tree({node});
}

std::size_t Tree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.is_leaf()) {
      best = std::max(best, d);
    } else {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return best;
}

std::size_t Tree::leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda, double gamma) {
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda) - g * g / (h + lambda)) -
         gamma;
}

double leaf_weight(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? -g / denom : 0.0;
}

namespace {

struct SplitChoice {
  bool valid = false;
  std::size_t feature = 0;
  std::size_t bin = 0;  // left = bins <= bin
  double gain = 0.0;
  double g_left = 0.0, h_left = 0.0;
};

struct OpenNode {
  int id = 0;
  std::size_t begin = 0, end = 0;
  std::size_t depth = 0;
  double g = 0.0, h = 0.0;
  SplitChoice split;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& x, std::span<const GradPair> grad, const TreeParams& params)
      : x_(x), grad_(grad), params_(params) {
    if (params_.allowed_features.empty()) {
      features_.resize(x.cols());
      std::iota(features_.begin(), features_.end(), std::size_t{0});
    } else {
      features_ = params_.allowed_features;
      std::sort(features_.begin(), features_.end());
      features_.erase(std::unique(features_.begin(), features_.end()), features_.end());
      for (auto f : features_) {
        if (f >= x.cols()) throw std::invalid_argument("fit_tree: allowed feature out of range");
      }
    }
    rows_.resize(x.rows());
    std::iota(rows_.begin(), rows_.end(), std::size_t{0});
  }

  Tree grow() {
    OpenNode root;
    root.id = 0;
    root.begin = 0;
    root.end = rows_.size();
    for (auto r : rows_) {
      root.g += grad_[r].g;
      root.h += grad_[r].h;
    }
    nodes_.push_back(make_leaf(root));
    evaluate(root);

    auto worse = [](const OpenNode& a, const OpenNode& b) {
      if (a.split.gain != b.split.gain) return a.split.gain < b.split.gain;
      return a.id > b.id;
    };
    std::priority_queue<OpenNode, std::vector<OpenNode>, decltype(worse)> open(worse);
    if (root.split.valid) open.push(root);
    std::size_t leaves = 1;

    while (!open.empty() && (params_.max_leaves == 0 || leaves < params_.max_leaves)) {
      OpenNode node = open.top();
      open.pop();
      auto [left, right] = apply_split(node);
      ++leaves;
      evaluate(left);
      evaluate(right);
      if (left.split.valid) open.push(left);
      if (right.split.valid) open.push(right);
    }

    // Internal covers are the sum of their children so additivity is exact.
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      auto& node = nodes_[i];
      if (!node.is_leaf()) {
        node.cover = nodes_[static_cast<std::size_t>(node.left)].cover +
                     nodes_[static_cast<std::size_t>(node.right)].cover;
      }
    }
    return Tree(preorder(nodes_));
  }

 private:
  // Renumbers nodes in depth-first pre-order (left before right).
  static std::vector<TreeNode> preorder(const std::vector<TreeNode>& in) {
    std::vector<TreeNode> out;
    out.reserve(in.size());
    auto visit = [&](auto&& self, int i) -> int {
      const int id = static_cast<int>(out.size());
      out.push_back(in[static_cast<std::size_t>(i)]);
      if (!out.back().is_leaf()) {
        const int l = self(self, in[static_cast<std::size_t>(i)].left);
        const int r = self(self, in[static_cast<std::size_t>(i)].right);
        out[static_cast<std::size_t>(id)].left = l;
        out[static_cast<std::size_t>(id)].right = r;
      }
      return id;
    };
    visit(visit, 0);
    return out;
  }

  TreeNode make_leaf(const OpenNode& node) const {
    TreeNode leaf;
    leaf.value = leaf_weight(node.g, node.h, params_.lambda);
    leaf.cover = node.h;
    return leaf;
  }

  void evaluate(OpenNode& node) {
    node.split = SplitChoice{};
    if (node.depth >= params_.max_depth || node.end - node.begin < 2) return;

    std::vector<SplitChoice> per_feature(features_.size());
    parallel_for(features_.size(), [&](std::size_t k) { per_feature[k] = best_for_feature(node, features_[k]); });

    const double parent_score = node.g * node.g / (node.h + params_.lambda);
    const double min_gain = 1e-12 * (1.0 + std::abs(parent_score));
    for (const auto& choice : per_feature) {
      if (!choice.valid || !(choice.gain > min_gain)) continue;
      if (!node.split.valid || choice.gain > node.split.gain) node.split = choice;
    }
  }

  SplitChoice best_for_feature(const OpenNode& node, std::size_t feature) const {
    const std::size_t n_bins = x_.binmap().bins(feature);
    SplitChoice best;
    if (n_bins < 2) return best;
    std::vector<double> hist_g(n_bins, 0.0), hist_h(n_bins, 0.0);
    const auto column = x_.column(feature);
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const auto r = rows_[i];
      hist_g[column[r]] += grad_[r].g;
      hist_h[column[r]] += grad_[r].h;
    }
    double g_left = 0.0, h_left = 0.0;
    for (std::size_t b = 0; b + 1 < n_bins; ++b) {
      g_left += hist_g[b];
      h_left += hist_h[b];
      const double g_right = node.g - g_left;
      const double h_right = node.h - h_left;
      if (h_left < params_.min_child_weight || h_right < params_.min_child_weight) continue;
      const double gain = split_gain(g_left, h_left, g_right, h_right, params_.lambda, params_.gamma);
      if (!best.valid || gain > best.gain) {
        best = {true, feature, b, gain, g_left, h_left};
      }
    }
    return best;
  }

  std::pair<OpenNode, OpenNode> apply_split(const OpenNode& node) {
    const auto& s = node.split;
    const auto column = x_.column(s.feature);
    const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(node.begin),
                                              rows_.begin() + static_cast<std::ptrdiff_t>(node.end),
                                              [&](std::size_t r) { return column[r] <= s.bin; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

    OpenNode left, right;
    left.begin = node.begin;
    left.end = mid;
    right.begin = mid;
    right.end = node.end;
    left.depth = right.depth = node.depth + 1;
    for (std::size_t i = left.begin; i < left.end; ++i) {
      left.g += grad_[rows_[i]].g;
      left.h += grad_[rows_[i]].h;
    }
    for (std::size_t i = right.begin; i < right.end; ++i) {
      right.g += grad_[rows_[i]].g;
      right.h += grad_[rows_[i]].h;
    }
    left.id = static_cast<int>(nodes_.size());
    right.id = left.id + 1;
    nodes_.push_back(make_leaf(left));
    nodes_.push_back(make_leaf(right));

    auto& parent = nodes_[static_cast<std::size_t>(node.id)];
    parent.feature = static_cast<int>(s.feature);
    parent.threshold = x_.binmap().edges(s.feature)[s.bin];
    parent.left = left.id;
    parent.right = right.id;
    parent.value = 0.0;
    return {left, right};
  }

  const BinnedMatrix& x_;
  std::span<const GradPair> grad_;
  const TreeParams& params_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> rows_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

Tree fit_tree(const BinnedMatrix& x, std::span<const GradPair> grad, const TreeParams& params) {
  if (x.rows() == 0) throw std::invalid_argument("fit_tree: empty input");
  if (grad.size() != x.rows()) throw std::invalid_argument("fit_tree: gradient count does not match row count");
  return TreeGrower(x, grad, params).grow();
}

double predict_tree(const Tree& tree, std::span<const double> row) {
  std::size_t i = 0;
  while (true) {
    const auto& node = tree.node(i);
    if (node.is_leaf()) return node.value;
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right);
  }
}

}  // namespace xpd
