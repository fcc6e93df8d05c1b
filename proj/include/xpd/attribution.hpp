#pragma once

#include <functional>
#include <span>
#include <vector>

#include "xpd/dataset.hpp"
#include "xpd/ebm.hpp"
#include "xpd/gbdt.hpp"

namespace xpd {

/// Per-feature contributions in margin units. base_value + sum(phi) equals
/// model_margin up to rounding.
struct Attribution {
  std::vector<double> phi;
  double base_value = 0.0;
  double model_margin = 0.0;
};

/// Row-aligned attributions for a whole table.
struct AttributionMatrix {
  Matrix phi;
  std::vector<double> base_values;
  std::vector<double> margins;

  std::size_t rows() const { return phi.rows(); }
  /// Mean |phi| per feature, the global importance used for rankings.
  std::vector<double> mean_abs() const;
  /// Feature indices by descending mean |phi|, ties to the lower index.
  std::vector<std::size_t> ranking() const;
};

using MarginFn = std::function<double(std::span<const double>)>;
using AttributeFn = std::function<Attribution(std::span<const double>)>;

/// Cover-weighted expectation of a tree's leaf values.
double expected_value(const Tree& tree);

/// Path-dependent TreeSHAP. Throws ModelError if a root has no cover.
Attribution tree_shap(const GbdtModel& model, std::span<const double> row);

/// Closed form for an additive model: phi_i is the centred shape score.
Attribution ebm_attribution(const EbmModel& model, std::span<const double> row);

/// The same additive function as a tree ensemble: one balanced tree per
/// feature over its bin edges, covers from the training bin counts,
/// learning rate 1 and base score equal to the intercept.
GbdtModel ebm_as_tree_ensemble(const EbmModel& model);

/// Exact Shapley values of an arbitrary coalition game over d players by
/// subset enumeration. value(mask) receives a membership mask.
std::vector<double> shapley_from_value_fn(std::size_t d, const std::function<double(const std::vector<bool>&)>& value);

/// Interventional brute-force Shapley: the value of coalition S is the
/// background mean of predict with features in S taken from x.
/// d must be at most 12 and the background non-empty.
Attribution brute_force_shapley(const MarginFn& predict, const Dataset& background, std::span<const double> row);

/// Attributes every row, in parallel, assembled in row order.
AttributionMatrix attribution_matrix(const AttributeFn& attribute, const Matrix& x);

AttributeFn gbdt_attributor(const GbdtModel& model);
AttributeFn ebm_attributor(const EbmModel& model);
MarginFn gbdt_margin_fn(const GbdtModel& model);
MarginFn ebm_margin_fn(const EbmModel& model);

}  // namespace xpd
