#include "xpd/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace xpd {

std::vector<double> AttributionMatrix::mean_abs() const {
  std::vector<double> out(phi.cols(), 0.0);
  if (phi.rows() == 0) return out;
  for (std::size_t r = 0; r < phi.rows(); ++r) {
    for (std::size_t c = 0; c < phi.cols(); ++c) out[c] += std::abs(phi(r, c));
  }
  for (auto& v : out) v /= static_cast<double>(phi.rows());
  return out;
}

std::vector<std::size_t> AttributionMatrix::ranking() const {
  const auto importance = mean_abs();
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  return order;
}

double expected_value(const Tree& tree) {
  const double root_cover = tree.root().cover;
  if (!(root_cover > 0.0)) throw ModelError("tree has no cover at its root");
  double total = 0.0;
  for (const auto& node : tree.nodes()) {
    if (node.is_leaf()) total += node.value * node.cover;
  }
  return total / root_cover;
}

namespace {

// Path-dependent TreeSHAP (polynomial-time recursion over unique feature
// paths with EXTEND / UNWIND of the permutation weights).
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double denom = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / denom;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / denom;
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one_portion * denom / (static_cast<double>(i + 1) * one_fraction);
      next_one_portion = tmp - path[i].weight * zero_fraction * static_cast<double>(depth - i) / denom;
    } else {
      path[i].weight = path[i].weight * denom / (zero_fraction * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight with element `index` removed from the path.
double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * denom / (static_cast<double>(i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero_fraction * static_cast<double>(depth - i) / denom;
    } else {
      total += path[i].weight / zero_fraction / (static_cast<double>(depth - i) / denom);
    }
  }
  return total;
}

class TreeShapWalker {
 public:
  TreeShapWalker(const Tree& tree, std::span<const double> row, std::span<double> phi, double scale)
      : tree_(tree), row_(row), phi_(phi), scale_(scale) {
    const std::size_t levels = tree.depth() + 3;
    buffer_.resize(levels * (levels + 1) / 2 + levels);
  }

  void run() { recurse(0, buffer_.data(), 0, 1.0, 1.0, -1); }

 private:
  void recurse(std::size_t node_index, PathElement* parent_path, std::size_t depth, double zero_fraction,
               double one_fraction, int feature) {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);

    const auto& node = tree_.node(node_index);
    if (node.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] += scale_ * w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }

    const auto split = static_cast<std::size_t>(node.feature);
    const bool go_left = row_[split] < node.threshold;
    const auto hot = static_cast<std::size_t>(go_left ? node.left : node.right);
    const auto cold = static_cast<std::size_t>(go_left ? node.right : node.left);
    const double hot_zero_fraction = tree_.node(hot).cover / node.cover;
    const double cold_zero_fraction = tree_.node(cold).cover / node.cover;
    double incoming_zero_fraction = 1.0;
    double incoming_one_fraction = 1.0;

    std::size_t path_index = 0;
    for (; path_index <= depth; ++path_index) {
      if (path[path_index].feature == node.feature) break;
    }
    if (path_index != depth + 1) {
      incoming_zero_fraction = path[path_index].zero_fraction;
      incoming_one_fraction = path[path_index].one_fraction;
      unwind_path(path, depth, path_index);
      --depth;
    }
    recurse(hot, path, depth + 1, hot_zero_fraction * incoming_zero_fraction, incoming_one_fraction, node.feature);
    recurse(cold, path, depth + 1, cold_zero_fraction * incoming_zero_fraction, 0.0, node.feature);
  }

  const Tree& tree_;
  std::span<const double> row_;
  std::span<double> phi_;
  double scale_;
  std::vector<PathElement> buffer_;
};

}  // namespace

Attribution tree_shap(const GbdtModel& model, std::span<const double> row) {
  if (row.size() != model.n_features) {
    throw DataError("tree_shap: expected " + std::to_string(model.n_features) + " features, got " +
                    std::to_string(row.size()));
  }
  Attribution out;
  out.phi.assign(model.n_features, 0.0);
  double expected_sum = 0.0;
  for (const auto& tree : model.trees) {
    if (!(tree.root().cover > 0.0)) throw ModelError("tree_shap: cover missing or zero at a tree root");
    expected_sum += expected_value(tree);
    TreeShapWalker(tree, row, out.phi, model.learning_rate).run();
  }
  out.base_value = model.base_score + model.learning_rate * expected_sum;
  out.model_margin = gbdt_margin(model, row);
  return out;
}

Attribution ebm_attribution(const EbmModel& model, std::span<const double> row) {
  if (row.size() != model.n_features()) {
    throw DataError("ebm_attribution: expected " + std::to_string(model.n_features()) + " features, got " +
                    std::to_string(row.size()));
  }
  Attribution out;
  out.phi.resize(row.size());
  for (std::size_t f = 0; f < row.size(); ++f) out.phi[f] = model.shapes[f][model.binmap.bin(f, row[f])];
  out.base_value = model.intercept;
  out.model_margin = ebm_margin(model, row);
  return out;
}

namespace {

int build_bin_tree(const EbmModel& model, std::size_t feature, std::size_t lo, std::size_t hi,
                   std::vector<TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  TreeNode node;
  if (hi - lo == 1) {
    node.value = model.shapes[feature][lo];
    node.cover = static_cast<double>(model.bin_counts[feature][lo]);
  } else {
    const std::size_t mid = (lo + hi) / 2;
    node.feature = static_cast<int>(feature);
    node.threshold = model.binmap.edges(feature)[mid - 1];
    node.left = build_bin_tree(model, feature, lo, mid, nodes);
    node.right = build_bin_tree(model, feature, mid, hi, nodes);
    node.cover = nodes[static_cast<std::size_t>(node.left)].cover + nodes[static_cast<std::size_t>(node.right)].cover;
  }
  nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace

GbdtModel ebm_as_tree_ensemble(const EbmModel& model) {
  GbdtModel out;
  out.base_score = model.intercept;
  out.learning_rate = 1.0;
  out.n_features = model.n_features();
  out.feature_names = model.feature_names;
  for (std::size_t f = 0; f < model.n_features(); ++f) {
    std::vector<TreeNode> nodes;
    build_bin_tree(model, f, 0, model.shapes[f].size(), nodes);
    out.trees.emplace_back(std::move(nodes));
  }
  return out;
}

std::vector<double> shapley_from_value_fn(std::size_t d, const std::function<double(const std::vector<bool>&)>& value) {
  if (d > 20) throw std::invalid_argument("shapley_from_value_fn: too many players for enumeration");
  const std::uint32_t n_masks = 1u << d;
  std::vector<double> v(n_masks);
  std::vector<bool> members(d);
  for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
    for (std::size_t j = 0; j < d; ++j) members[j] = (mask >> j) & 1u;
    v[mask] = value(members);
  }
  // weight(|S|) = |S|! (d - |S| - 1)! / d!
  std::vector<double> weight(d, 0.0);
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = std::exp(std::lgamma(static_cast<double>(s + 1)) + std::lgamma(static_cast<double>(d - s)) -
                         std::lgamma(static_cast<double>(d + 1)));
  }
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      phi[i] += weight[size] * (v[mask | bit] - v[mask]);
    }
  }
  return phi;
}

Attribution brute_force_shapley(const MarginFn& predict, const Dataset& background, std::span<const double> row) {
  const std::size_t d = row.size();
  if (d > 12) throw std::invalid_argument("brute_force_shapley: at most 12 features");
  if (background.rows() == 0) throw DataError("brute_force_shapley: empty background");
  if (background.cols() != d) throw DataError("brute_force_shapley: background feature count differs");
  std::vector<double> z(d);
  auto value = [&](const std::vector<bool>& in_coalition) {
    double total = 0.0;
    for (std::size_t r = 0; r < background.rows(); ++r) {
      const auto bg = background.row(r);
      for (std::size_t j = 0; j < d; ++j) z[j] = in_coalition[j] ? row[j] : bg[j];
      total += predict(z);
    }
    return total / static_cast<double>(background.rows());
  };
  Attribution out;
  out.phi = shapley_from_value_fn(d, value);
  out.base_value = value(std::vector<bool>(d, false));
  out.model_margin = predict(row);
  return out;
}

AttributionMatrix attribution_matrix(const AttributeFn& attribute, const Matrix& x) {
  std::vector<Attribution> rows(x.rows());
  parallel_for(x.rows(), [&](std::size_t i) { rows[i] = attribute(x.row(i)); });
  AttributionMatrix out;
  out.phi = Matrix(x.rows(), x.cols());
  out.base_values.resize(x.rows());
  out.margins.resize(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].phi.size() != x.cols()) throw DataError("attribution_matrix: attribution width differs from data");
    std::copy(rows[i].phi.begin(), rows[i].phi.end(), out.phi.row(i).begin());
    out.base_values[i] = rows[i].base_value;
    out.margins[i] = rows[i].model_margin;
  }
  return out;
}

AttributeFn gbdt_attributor(const GbdtModel& model) {
  return [&model](std::span<const double> row) { return tree_shap(model, row); };
}

AttributeFn ebm_attributor(const EbmModel& model) {
  return [&model](std::span<const double> row) { return ebm_attribution(model, row); };
}

MarginFn gbdt_margin_fn(const GbdtModel& model) {
  return [&model](std::span<const double> row) { return gbdt_margin(model, row); };
}

MarginFn ebm_margin_fn(const EbmModel& model) {
  return [&model](std::span<const double> row) { return ebm_margin(model, row); };
}

}  // namespace xpd
