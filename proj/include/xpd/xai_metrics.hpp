#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xpd/attribution.hpp"
#include "xpd/dataset.hpp"

namespace xpd {

enum class Ordinal { Low, LowModerate, Moderate, ModerateHigh, High };

/// Equal-width buckets: [0,.2) Low, [.2,.4) LowModerate, [.4,.6) Moderate,
/// [.6,.8) ModerateHigh, [.8,1] High. Throws std::out_of_range outside [0,1].
Ordinal to_ordinal(double score);
std::string_view ordinal_name(Ordinal o);
Ordinal ordinal_from_name(std::string_view name);

/// Raised when a metric has no instances to average over.
class MetricNotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricValue {
  std::optional<double> score;  // empty = not applicable
  std::string note;

  std::optional<Ordinal> ordinal() const {
    return score ? std::optional<Ordinal>(to_ordinal(*score)) : std::nullopt;
  }
  bool operator==(const MetricValue&) const = default;
};

struct XaiReport {
  MetricValue fidelity;
  MetricValue simplicity;
  MetricValue comprehensiveness;
  MetricValue consistency;
  MetricValue explanation_accuracy;
  MetricValue stability;
  MetricValue actionability;

  static constexpr std::array<std::string_view, 7> kNames{
      "fidelity", "simplicity", "comprehensiveness", "consistency", "explanation_accuracy", "stability", "actionability"};

  const MetricValue& get(std::string_view name) const;
  MetricValue& get(std::string_view name);
  bool operator==(const XaiReport&) const = default;
};

struct PerturbConfig {
  double sigma = 0.05;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cosine similarity; 1 if both vectors are zero, 0 if exactly one is.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Feature indices by descending |v|, ties to the lower index.
std::vector<std::size_t> order_by_magnitude(std::span<const double> v);

/// Agreement between the model's 0.5-threshold labels and those of a
/// depth-limited regression tree fitted (squared loss) to the model margins.
double fidelity(const MarginFn& margin, const Matrix& x, std::size_t surrogate_depth = 3);

/// 1 - (mean k90 - 1) / (d - 1), where k90 is the number of top-|phi|
/// features holding 90% of an instance's attribution mass.
double simplicity(const Matrix& phis);

/// Smallest k whose top-|phi| mass reaches 90% of the row total (0 for an
/// all-zero row).
std::size_t k90(std::span<const double> phi);

/// Mean relative margin drop (towards the base value) when the top-k
/// attributed features are replaced by training means, k = 1..k_max.
double comprehensiveness(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr,
                         std::span<const double> train_means, std::size_t k_max = 10);

/// Same deletion curve; the masked margin averages over seeded random donor rows.
double comprehensiveness_permutation(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr,
                                     std::uint64_t seed, std::size_t k_max = 10);

/// Mean cosine between each instance's attribution and that of its nearest
/// same-label neighbour (standardised Euclidean), mapped to [0,1].
double consistency(const Matrix& phis, const Matrix& x, std::span<const int> labels_pred);

/// Share of instances where ablating the top feature to its training mean
/// moves the margin against the sign of its attribution.
double explanation_accuracy(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr,
                            std::span<const double> train_means);

/// Mean cosine between attributions before and after Gaussian noise of scale
/// sigma * train_std on numeric features, mapped to [0,1]. Noise for instance
/// i comes from its own stream seeded by (seed, i).
double stability(const AttributeFn& attribute, const Dataset& data, std::span<const double> train_stds,
                 const PerturbConfig& cfg);
double stability(const AttributeFn& attribute, const Dataset& data, const AttributionMatrix& unperturbed,
                 std::span<const double> train_stds, const PerturbConfig& cfg);

/// Share of top-k |phi| mass on actionable features. With no actionable
/// features the score is 0 and `warning` (if given) is filled.
double actionability(const Matrix& phis, const std::vector<FeatureMeta>& meta, std::size_t top_k = 3,
                     std::string* warning = nullptr);

struct XaiInputs {
  MarginFn margin;
  AttributeFn attribute;
  const Dataset* data = nullptr;  // evaluation rows
  const AttributionMatrix* attributions = nullptr;  // attributions of `data`
  std::vector<double> train_means;
  std::vector<double> train_stds;
  PerturbConfig perturb;
  std::size_t surrogate_depth = 3;
  std::size_t comprehensiveness_k = 10;
  std::size_t actionability_k = 3;
};

/// Computes all seven metrics; metrics that are not applicable carry a note.
XaiReport evaluate_xai(const XaiInputs& in);

}  // namespace xpd
