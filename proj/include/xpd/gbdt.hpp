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

struct GbdtConfig {
  std::size_t n_rounds = 300;
  std::size_t max_depth = 6;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  std::size_t early_stopping_patience = 25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// margin(x) = base_score + learning_rate * sum_t tree_t(x)
struct GbdtModel {
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  std::vector<std::string> feature_names;
  std::size_t n_features = 0;
  double fit_seconds = 0.0;

  bool operator==(const GbdtModel& o) const {
    return base_score == o.base_score && learning_rate == o.learning_rate && trees == o.trees &&
           feature_names == o.feature_names && n_features == o.n_features;
  }
};

/// Per-round diagnostics, kept so training-loss and early-stopping
/// behaviour can be inspected.
struct GbdtTrace {
  std::vector<double> train_loss;  // after each round, index 0 = base score only
  std::vector<double> valid_auc;   // after each round, index 0 = base score only
  std::size_t best_rounds = 0;
};

/// Newton boosting on logistic loss with validation-AUC early stopping.
/// Throws DataError if `train` is single-class.
GbdtModel gbdt_fit(const Dataset& train, const Dataset& valid, const GbdtConfig& cfg, GbdtTrace* trace = nullptr);

double gbdt_margin(const GbdtModel& model, std::span<const double> row);
double gbdt_proba(const GbdtModel& model, std::span<const double> row);

nlohmann::json gbdt_to_json(const GbdtModel& model);
GbdtModel gbdt_from_json(const nlohmann::json& doc);

/// Mean logistic loss of margins against 0/1 labels.
double logistic_loss(std::span<const double> margins, std::span<const int> labels);

}  // namespace xpd
