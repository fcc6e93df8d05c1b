#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xpd/common.hpp"

namespace xpd {

struct BeeswarmOptions {
  std::size_t max_features = 15;
  std::uint64_t jitter_seed = 0;
  std::string title;
};

/// Within-feature midrank percentile of each value, in [0,1]. A constant
/// column (or a single row) maps to 0.5.
std::vector<double> value_percentiles(const Matrix& x, std::size_t feature);

/// Renders a SHAP-style summary plot as standalone SVG text: one band per
/// feature ordered by mean |phi|, one dot per instance at x = phi, coloured
/// from blue (low value) to red (high value).
std::string render_beeswarm(const Matrix& phis, const Matrix& x, const std::vector<std::string>& names,
                            const BeeswarmOptions& options = {});

void emit_beeswarm(const Matrix& phis, const Matrix& x, const std::vector<std::string>& names,
                   const std::filesystem::path& path, const BeeswarmOptions& options = {});

}  // namespace xpd
