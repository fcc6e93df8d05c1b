#include "xpd/xai_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "xpd/metrics.hpp"
#include "xpd/trees.hpp"

namespace xpd {

Ordinal to_ordinal(double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw std::out_of_range("to_ordinal: score outside [0, 1]");
  if (score < 0.2) return Ordinal::Low;
  if (score < 0.4) return Ordinal::LowModerate;
  if (score < 0.6) return Ordinal::Moderate;
  if (score < 0.8) return Ordinal::ModerateHigh;
  return Ordinal::High;
}

std::string_view ordinal_name(Ordinal o) {
  switch (o) {
    case Ordinal::Low: return "Low";
    case Ordinal::LowModerate: return "LowModerate";
    case Ordinal::Moderate: return "Moderate";
    case Ordinal::ModerateHigh: return "ModerateHigh";
    case Ordinal::High: return "High";
  }
  return "Low";
}

Ordinal ordinal_from_name(std::string_view name) {
  for (auto o : {Ordinal::Low, Ordinal::LowModerate, Ordinal::Moderate, Ordinal::ModerateHigh, Ordinal::High}) {
    if (ordinal_name(o) == name) return o;
  }
  throw std::invalid_argument("unknown ordinal '" + std::string(name) + "'");
}

const MetricValue& XaiReport::get(std::string_view name) const {
  return const_cast<XaiReport*>(this)->get(name);
}

MetricValue& XaiReport::get(std::string_view name) {
  if (name == "fidelity") return fidelity;
  if (name == "simplicity") return simplicity;
  if (name == "comprehensiveness") return comprehensiveness;
  if (name == "consistency") return consistency;
  if (name == "explanation_accuracy") return explanation_accuracy;
  if (name == "stability") return stability;
  if (name == "actionability") return actionability;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

void PerturbConfig::validate() const {
  if (!(sigma >= 0.0)) throw ConfigError("perturb.sigma must be non-negative");
  if (repetitions == 0) throw ConfigError("perturb.repetitions must be at least 1");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    return 1.0;  // covers the both-zero case
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<std::size_t> order_by_magnitude(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
  return order;
}

double fidelity(const MarginFn& margin, const Matrix& x, std::size_t surrogate_depth) {
  if (x.rows() == 0) throw DataError("fidelity: empty data");
  std::vector<double> m(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) m[i] = margin(x.row(i));
  std::vector<int> model_labels(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) model_labels[i] = label_from_margin(m[i]);
  const auto positives = std::count(model_labels.begin(), model_labels.end(), 1);
  if (positives == 0 || static_cast<std::size_t>(positives) == m.size()) return 1.0;

  const BinMap map = build_binmap(x);
  const BinnedMatrix binned(x, map);
  std::vector<GradPair> grad(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) grad[i] = {-m[i], 1.0};
  TreeParams params;
  params.max_depth = surrogate_depth;
  params.lambda = 0.0;
  params.gamma = 0.0;
  params.min_child_weight = 1.0;
  const Tree surrogate = fit_tree(binned, grad, params);

  std::size_t agree = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (label_from_margin(predict_tree(surrogate, x.row(i))) == model_labels[i]) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(m.size());
}

std::size_t k90(std::span<const double> phi) {
  double total = 0.0;
  for (double v : phi) total += std::abs(v);
  if (total == 0.0) return 0;
  const double target = 0.9 * total * (1.0 - 1e-12);
  double cumulative = 0.0;
  std::size_t k = 0;
  for (auto j : order_by_magnitude(phi)) {
    cumulative += std::abs(phi[j]);
    ++k;
    if (cumulative >= target) break;
  }
  return k;
}

double simplicity(const Matrix& phis) {
  const std::size_t d = phis.cols();
  if (d < 2) throw std::invalid_argument("simplicity: needs at least two features");
  if (phis.rows() == 0) throw MetricNotApplicable("simplicity: no instances");
  double total = 0.0;
  for (std::size_t i = 0; i < phis.rows(); ++i) total += static_cast<double>(k90(phis.row(i)));
  const double mean_k = total / static_cast<double>(phis.rows());
  return std::clamp(1.0 - (mean_k - 1.0) / static_cast<double>(d - 1), 0.0, 1.0);
}

namespace {

std::mt19937_64 instance_stream(std::uint64_t seed, std::size_t instance) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(instance), static_cast<std::uint32_t>(std::uint64_t(instance) >> 32)};
  return std::mt19937_64(seq);
}

template <typename MaskSource>
double deletion_curve(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr, std::size_t k_max,
                      MaskSource&& mask_value) {
  if (attr.rows() != x.rows()) throw DataError("comprehensiveness: attribution rows differ from data rows");
  if (k_max == 0 || k_max > x.cols()) throw std::invalid_argument("comprehensiveness: k_max must lie in [1, d]");
  std::vector<double> per_instance(x.rows(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(x.rows(), [&](std::size_t i) {
    const double m0 = attr.margins[i];
    const double base = attr.base_values[i];
    const double gap = std::abs(m0 - base);
    if (gap < 1e-9) return;
    const auto order = order_by_magnitude(attr.phi.row(i));
    const std::vector<double> z(x.row(i).begin(), x.row(i).end());
    // each source row fills the masked features; the masked margin is their mean
    const std::vector<std::vector<double>> sources = mask_value(i);
    std::vector<std::vector<double>> zs(sources.size(), z);
    double total = 0.0;
    for (std::size_t k = 1; k <= k_max; ++k) {
      const auto j = order[k - 1];
      double mk = 0.0;
      for (std::size_t r = 0; r < sources.size(); ++r) {
        zs[r][j] = sources[r][j];
        mk += margin(zs[r]);
      }
      mk /= static_cast<double>(sources.size());
      total += std::clamp((gap - std::abs(mk - base)) / gap, 0.0, 1.0);
    }
    per_instance[i] = total / static_cast<double>(k_max);
  });
  double sum = 0.0;
  std::size_t used = 0;
  for (double v : per_instance) {
    if (std::isnan(v)) continue;
    sum += v;
    ++used;
  }
  if (used == 0) throw MetricNotApplicable("comprehensiveness: every instance sits at the base value");
  return sum / static_cast<double>(used);
}

}  // namespace

double comprehensiveness(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr,
                         std::span<const double> train_means, std::size_t k_max) {
  if (train_means.size() != x.cols()) throw DataError("comprehensiveness: train means width differs");
  const std::vector<double> means(train_means.begin(), train_means.end());
  return deletion_curve(margin, x, attr, k_max, [&](std::size_t) { return std::vector<std::vector<double>>{means}; });
}

constexpr std::size_t kPermutationDonors = 32;

double comprehensiveness_permutation(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr,
                                     std::uint64_t seed, std::size_t k_max) {
  if (x.rows() < 2) throw MetricNotApplicable("comprehensiveness_permutation: needs at least two instances");
  return deletion_curve(margin, x, attr, k_max, [&](std::size_t i) {
    auto rng = instance_stream(seed, i);
    std::uniform_int_distribution<std::size_t> pick(0, x.rows() - 2);
    std::vector<std::vector<double>> donors;
    for (std::size_t r = 0; r < kPermutationDonors; ++r) {
      std::size_t donor = pick(rng);
      if (donor >= i) ++donor;
      const auto row = x.row(donor);
      donors.emplace_back(row.begin(), row.end());
    }
    return donors;
  });
}

double consistency(const Matrix& phis, const Matrix& x, std::span<const int> labels_pred) {
  if (phis.rows() != x.rows() || labels_pred.size() != x.rows()) {
    throw DataError("consistency: attribution, data and label counts differ");
  }
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const auto mean = column_means(x);
  const auto sd = column_stds(x);
  Matrix z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z(i, j) = sd[j] > 0.0 ? (x(i, j) - mean[j]) / sd[j] : 0.0;
  }
  std::vector<double> per_instance(n, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n, [&](std::size_t i) {
    std::size_t best = n;
    double best_dist = std::numeric_limits<double>::infinity();
    const auto zi = z.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i || labels_pred[k] != labels_pred[i]) continue;
      const auto zk = z.row(k);
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = zi[j] - zk[j];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    if (best == n) return;
    per_instance[i] = cosine_similarity(phis.row(i), phis.row(best));
  });
  double sum = 0.0;
  std::size_t used = 0;
  for (double v : per_instance) {
    if (std::isnan(v)) continue;
    sum += v;
    ++used;
  }
  if (used == 0) throw MetricNotApplicable("consistency: no two instances share a predicted label");
  return (sum / static_cast<double>(used) + 1.0) / 2.0;
}

double explanation_accuracy(const MarginFn& margin, const Matrix& x, const AttributionMatrix& attr,
                            std::span<const double> train_means) {
  if (x.rows() == 0) throw DataError("explanation_accuracy: empty data");
  if (attr.rows() != x.rows()) throw DataError("explanation_accuracy: attribution rows differ from data rows");
  if (train_means.size() != x.cols()) throw DataError("explanation_accuracy: train means width differs");
  const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  std::vector<int> outcome(x.rows(), -1);  // -1 skipped, 0 wrong, 1 right
  parallel_for(x.rows(), [&](std::size_t i) {
    const auto phi = attr.phi.row(i);
    const auto j = order_by_magnitude(phi).front();
    if (phi[j] == 0.0) return;
    std::vector<double> z(x.row(i).begin(), x.row(i).end());
    z[j] = train_means[j];
    const double delta = margin(z) - attr.margins[i];
    outcome[i] = sign(delta) == -sign(phi[j]) ? 1 : 0;
  });
  std::size_t used = 0, right = 0;
  for (int o : outcome) {
    if (o < 0) continue;
    ++used;
    right += static_cast<std::size_t>(o);
  }
  if (used == 0) throw MetricNotApplicable("explanation_accuracy: every instance has an all-zero attribution");
  return static_cast<double>(right) / static_cast<double>(used);
}

double stability(const AttributeFn& attribute, const Dataset& data, std::span<const double> train_stds,
                 const PerturbConfig& cfg) {
  const auto base = attribution_matrix(attribute, data.x());
  return stability(attribute, data, base, train_stds, cfg);
}

double stability(const AttributeFn& attribute, const Dataset& data, const AttributionMatrix& unperturbed,
                 std::span<const double> train_stds, const PerturbConfig& cfg) {
  cfg.validate();
  if (train_stds.size() != data.cols()) throw DataError("stability: train std width differs");
  if (unperturbed.rows() != data.rows()) throw DataError("stability: attribution rows differ from data rows");
  if (data.rows() == 0) throw MetricNotApplicable("stability: no instances");
  std::vector<double> per_instance(data.rows(), 0.0);
  parallel_for(data.rows(), [&](std::size_t i) {
    auto rng = instance_stream(cfg.seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto row = data.row(i);
    std::vector<double> z(row.size());
    double total = 0.0;
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        z[j] = row[j];
        if (data.meta()[j].kind == FeatureKind::Numeric) z[j] += cfg.sigma * train_stds[j] * normal(rng);
      }
      const auto perturbed = attribute(z);
      total += cosine_similarity(unperturbed.phi.row(i), perturbed.phi);
    }
    per_instance[i] = total / static_cast<double>(cfg.repetitions);
  });
  double sum = 0.0;
  for (double v : per_instance) sum += v;
  return (sum / static_cast<double>(data.rows()) + 1.0) / 2.0;
}

double actionability(const Matrix& phis, const std::vector<FeatureMeta>& meta, std::size_t top_k, std::string* warning) {
  if (meta.size() != phis.cols()) throw DataError("actionability: metadata width differs from attributions");
  if (top_k == 0 || top_k > phis.cols()) throw std::invalid_argument("actionability: top_k must lie in [1, d]");
  if (std::none_of(meta.begin(), meta.end(), [](const FeatureMeta& m) { return m.actionable; })) {
    if (warning) *warning = "no actionable features flagged; actionability defined as 0";
    return 0.0;
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < phis.rows(); ++i) {
    const auto phi = phis.row(i);
    const auto order = order_by_magnitude(phi);
    double mass = 0.0, actionable = 0.0;
    for (std::size_t k = 0; k < top_k; ++k) {
      const double a = std::abs(phi[order[k]]);
      mass += a;
      if (meta[order[k]].actionable) actionable += a;
    }
    if (mass == 0.0) continue;
    sum += actionable / mass;
    ++used;
  }
  if (used == 0) throw MetricNotApplicable("actionability: every instance has zero top-k attribution mass");
  return sum / static_cast<double>(used);
}

namespace {

template <typename Fn>
MetricValue guarded(Fn&& fn) {
  MetricValue v;
  try {
    v.score = fn();
  } catch (const MetricNotApplicable& e) {
    v.note = e.what();
  }
  return v;
}

}  // namespace

XaiReport evaluate_xai(const XaiInputs& in) {
  if (!in.data || !in.attributions) throw std::invalid_argument("evaluate_xai: data and attributions are required");
  const auto& data = *in.data;
  const auto& attr = *in.attributions;
  const std::size_t d = data.cols();
  XaiReport r;
  r.fidelity = guarded([&] { return fidelity(in.margin, data.x(), in.surrogate_depth); });
  r.simplicity = guarded([&] { return simplicity(attr.phi); });
  r.comprehensiveness = guarded(
      [&] { return comprehensiveness(in.margin, data.x(), attr, in.train_means, std::min(in.comprehensiveness_k, d)); });
  std::vector<int> labels(attr.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = label_from_margin(attr.margins[i]);
  r.consistency = guarded([&] { return consistency(attr.phi, data.x(), labels); });
  r.explanation_accuracy = guarded([&] { return explanation_accuracy(in.margin, data.x(), attr, in.train_means); });
  r.stability = guarded([&] { return stability(in.attribute, data, attr, in.train_stds, in.perturb); });
  std::string warning;
  r.actionability = guarded([&] { return actionability(attr.phi, data.meta(), std::min(in.actionability_k, d), &warning); });
  if (!warning.empty()) r.actionability.note = warning;
  return r;
}

}  // namespace xpd
