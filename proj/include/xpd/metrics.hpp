#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xpd {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct PredictiveReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fp_rate = 0.0;
  double roc_auc = 0.0;
  double runtime_seconds = 0.0;

  bool operator==(const PredictiveReport&) const = default;
};

struct McNemarResult {
  std::size_t b = 0;  // a correct, b wrong
  std::size_t c = 0;  // a wrong, b correct
  double statistic = 0.0;
  double p_value = 1.0;

  bool operator==(const McNemarResult&) const = default;
};

/// Label predicted at the fixed 0.5 probability threshold.
inline int label_from_proba(double p) { return p >= 0.5 ? 1 : 0; }
inline int label_from_margin(double m) { return m >= 0.0 ? 1 : 0; }

ConfusionCounts confusion(std::span<const int> preds, std::span<const int> labels);

/// Mann-Whitney AUC with tied scores contributing one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Degenerate denominators: precision is 1 with no predicted positives and no
/// missed positives (else 0); recall is 1 with no actual positives; fp_rate is
/// 0 with no actual negatives. roc_auc is 0.5 when labels are single-class.
PredictiveReport predictive_report(const ConfusionCounts& counts, std::span<const double> scores,
                                   std::span<const int> labels, double runtime_seconds);

/// Survival function of the chi-square distribution with one degree of freedom.
double chi2_1dof_sf(double x);

/// Continuity-corrected McNemar test on paired predictions.
McNemarResult mcnemar(std::span<const int> preds_a, std::span<const int> preds_b, std::span<const int> labels);
McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c);

}  // namespace xpd
