#include "xpd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xpd/common.hpp"

namespace xpd {

ConfusionCounts confusion(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw DataError("confusion: prediction and label lengths differ");
  if (preds.empty()) throw DataError("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1;
    const bool y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p && !y) ++c.fp;
    else if (!p && !y) ++c.tn;
    else ++c.fn;
  }
  return c;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: score and label lengths differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

PredictiveReport predictive_report(const ConfusionCounts& c, std::span<const double> scores,
                                   std::span<const int> labels, double runtime_seconds) {
  if (scores.size() != labels.size()) throw DataError("predictive_report: score and label lengths differ");
  if (c.total() != labels.size()) throw DataError("predictive_report: counts do not match label count");
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  PredictiveReport r;
  r.accuracy = d(c.tp + c.tn) / d(c.total());
  if (c.tp + c.fp > 0) r.precision = d(c.tp) / d(c.tp + c.fp);
  else r.precision = c.fn == 0 ? 1.0 : 0.0;
  r.recall = c.tp + c.fn > 0 ? d(c.tp) / d(c.tp + c.fn) : 1.0;
  r.fp_rate = c.fp + c.tn > 0 ? d(c.fp) / d(c.fp + c.tn) : 0.0;
  const bool both = c.tp + c.fn > 0 && c.fp + c.tn > 0;
  r.roc_auc = both ? roc_auc(scores, labels) : 0.5;
  r.runtime_seconds = runtime_seconds;
  return r;
}

double chi2_1dof_sf(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  if (b + c == 0) return r;
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
  r.statistic = diff * diff / static_cast<double>(b + c);
  r.p_value = std::clamp(chi2_1dof_sf(r.statistic), 0.0, 1.0);
  return r;
}

McNemarResult mcnemar(std::span<const int> preds_a, std::span<const int> preds_b, std::span<const int> labels) {
  if (preds_a.size() != labels.size() || preds_b.size() != labels.size()) {
    throw DataError("mcnemar: prediction and label lengths differ");
  }
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a_ok = preds_a[i] == labels[i];
    const bool b_ok = preds_b[i] == labels[i];
    if (a_ok && !b_ok) ++b;
    else if (!a_ok && b_ok) ++c;
  }
  return mcnemar_from_counts(b, c);
}

}  // namespace xpd
