#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xpd/dataset.hpp"
#include "xpd/trees.hpp"

#include "json.hpp"

namespace xpd {

struct EbmConfig {
  std::size_t max_cycles = 1000;
  double learning_rate = 0.01;
  std::size_t max_leaves_per_step = 3;
  std::size_t early_stopping_patience = 50;
  double min_child_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Additive model: margin(x) = intercept + sum_i shape_i[bin_i(x_i)].
/// Shape tables are centred so their training-count-weighted mean is zero.
struct EbmModel {
  BinMap binmap;
  std::vector<std::vector<double>> shapes;
  std::vector<std::vector<std::size_t>> bin_counts;
  double intercept = 0.0;
  std::vector<std::string> feature_names;
  double fit_seconds = 0.0;

  std::size_t n_features() const { return shapes.size(); }

  bool operator==(const EbmModel& o) const {
    return binmap == o.binmap && shapes == o.shapes && bin_counts == o.bin_counts && intercept == o.intercept &&
           feature_names == o.feature_names;
  }
};

struct EbmTrace {
  std::vector<double> train_loss;  // index 0 = intercept only, then after each cycle
  std::vector<double> valid_auc;
  std::size_t best_cycles = 0;
};

/// Cyclic round-robin boosting: one small single-feature tree per feature per
/// cycle, validation-AUC early stopping over cycles, final mean-centring.
/// Throws DataError if `train` is single-class.
EbmModel ebm_fit(const Dataset& train, const Dataset& valid, const EbmConfig& cfg, EbmTrace* trace = nullptr);

double ebm_margin(const EbmModel& model, std::span<const double> row);
double ebm_proba(const EbmModel& model, std::span<const double> row);

nlohmann::json ebm_to_json(const EbmModel& model);
EbmModel ebm_from_json(const nlohmann::json& doc);

/// One CSV per feature (shape_<name>.csv) with bin_lower,bin_upper,score,train_count.
std::vector<std::filesystem::path> write_shape_tables(const EbmModel& model, const std::filesystem::path& dir);

}  // namespace xpd
