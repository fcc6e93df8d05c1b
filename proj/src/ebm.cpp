#include "xpd/ebm.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>

#include "xpd/gbdt.hpp"
#include "xpd/metrics.hpp"

namespace xpd {

void EbmConfig::validate() const {
  if (max_cycles == 0) throw ConfigError("ebm.max_cycles must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("ebm.learning_rate must be positive");
  if (max_leaves_per_step < 2) throw ConfigError("ebm.max_leaves_per_step must be at least 2");
  if (early_stopping_patience == 0) throw ConfigError("ebm.early_stopping_patience must be positive");
  if (!(min_child_weight >= 0.0)) throw ConfigError("ebm.min_child_weight must be non-negative");
}

namespace {

// Per-bin values of a tree restricted to `feature`.
std::vector<double> tree_by_bin(const Tree& tree, const BinMap& map, std::size_t feature, std::size_t n_features) {
  const auto& edges = map.edges(feature);
  std::vector<double> row(n_features, 0.0);
  std::vector<double> out(map.bins(feature));
  for (std::size_t b = 0; b < out.size(); ++b) {
    row[feature] = b == 0 ? -std::numeric_limits<double>::infinity() : edges[b - 1];
    out[b] = predict_tree(tree, row);
  }
  return out;
}

}  // namespace

EbmModel ebm_fit(const Dataset& train, const Dataset& valid, const EbmConfig& cfg, EbmTrace* trace) {
  cfg.validate();
  if (!train.has_both_classes()) throw DataError("ebm_fit: training set has a single class");
  if (valid.rows() > 0 && valid.cols() != train.cols()) throw DataError("ebm_fit: validation feature count differs");
  const auto start = std::chrono::steady_clock::now();

  const std::size_t d = train.cols();
  EbmModel model;
  model.binmap = build_binmap(train.x());
  model.feature_names = train.feature_names();
  model.intercept = base_margin(static_cast<double>(train.positives()) / static_cast<double>(train.rows()));

  const BinnedMatrix binned(train.x(), model.binmap);
  const BinnedMatrix valid_binned(valid.x(), model.binmap);

  model.shapes.resize(d);
  model.bin_counts.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    model.shapes[f].assign(model.binmap.bins(f), 0.0);
    model.bin_counts[f].assign(model.binmap.bins(f), 0);
    for (auto b : binned.column(f)) ++model.bin_counts[f][b];
  }

  std::vector<double> margin(train.rows(), model.intercept);
  std::vector<double> valid_margin(valid.rows(), model.intercept);
  std::vector<GradPair> grad(train.rows());
  const bool early_stop = valid.has_both_classes();

  TreeParams params;
  params.max_leaves = cfg.max_leaves_per_step;
  params.max_depth = cfg.max_leaves_per_step - 1;
  params.lambda = 0.0;
  params.min_child_weight = cfg.min_child_weight;

  auto best_shapes = model.shapes;
  double best_auc = early_stop ? roc_auc(valid_margin, valid.y()) : 0.0;
  std::size_t best_cycles = 0;
  if (trace) {
    *trace = EbmTrace{};
    trace->train_loss.push_back(logistic_loss(margin, train.y()));
    if (early_stop) trace->valid_auc.push_back(best_auc);
  }

  for (std::size_t cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    for (std::size_t f = 0; f < d; ++f) {
      if (model.binmap.bins(f) < 2) continue;
      for (std::size_t i = 0; i < train.rows(); ++i) {
        const double p = sigmoid(margin[i]);
        grad[i] = {p - static_cast<double>(train.y()[i]), p * (1.0 - p)};
      }
      params.allowed_features = {f};
      const Tree tree = fit_tree(binned, grad, params);
      if (tree.size() == 1) continue;  // a constant step only shifts the intercept
      auto step = tree_by_bin(tree, model.binmap, f, d);
      for (auto& s : step) s *= cfg.learning_rate;
      for (std::size_t b = 0; b < step.size(); ++b) model.shapes[f][b] += step[b];
      const auto column = binned.column(f);
      for (std::size_t i = 0; i < train.rows(); ++i) margin[i] += step[column[i]];
      const auto valid_column = valid_binned.column(f);
      for (std::size_t i = 0; i < valid.rows(); ++i) valid_margin[i] += step[valid_column[i]];
    }

    if (trace) trace->train_loss.push_back(logistic_loss(margin, train.y()));
    if (!early_stop) {
      best_cycles = cycle;
      best_shapes = model.shapes;
      continue;
    }
    const double auc = roc_auc(valid_margin, valid.y());
    if (trace) trace->valid_auc.push_back(auc);
    if (auc > best_auc) {
      best_auc = auc;
      best_cycles = cycle;
      best_shapes = model.shapes;
    } else if (cycle - best_cycles >= cfg.early_stopping_patience) {
      break;
    }
  }
  model.shapes = std::move(best_shapes);
  if (trace) trace->best_cycles = best_cycles;

  const double n = static_cast<double>(train.rows());
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0;
    for (std::size_t b = 0; b < model.shapes[f].size(); ++b) {
      mean += static_cast<double>(model.bin_counts[f][b]) * model.shapes[f][b];
    }
    mean /= n;
    for (auto& s : model.shapes[f]) s -= mean;
    model.intercept += mean;
  }
  model.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

double ebm_margin(const EbmModel& model, std::span<const double> row) {
  if (row.size() != model.n_features()) {
    throw DataError("ebm: expected " + std::to_string(model.n_features()) + " features, got " + std::to_string(row.size()));
  }
  double m = model.intercept;
  for (std::size_t f = 0; f < row.size(); ++f) m += model.shapes[f][model.binmap.bin(f, row[f])];
  return m;
}

double ebm_proba(const EbmModel& model, std::span<const double> row) { return sigmoid(ebm_margin(model, row)); }

nlohmann::json ebm_to_json(const EbmModel& model) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t f = 0; f < model.n_features(); ++f) {
    features.push_back({{"name", f < model.feature_names.size() ? model.feature_names[f] : "f" + std::to_string(f)},
                        {"edges", model.binmap.edges(f)},
                        {"scores", model.shapes[f]},
                        {"counts", model.bin_counts[f]}});
  }
  return {{"schema_version", 1}, {"kind", "ebm"}, {"intercept", model.intercept}, {"features", features}};
}

EbmModel ebm_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("kind").get<std::string>() != "ebm") throw ModelError("model document is not an ebm model");
    if (doc.at("schema_version").get<int>() != 1) throw ModelError("unsupported ebm schema_version");
    EbmModel model;
    model.intercept = doc.at("intercept").get<double>();
    std::vector<std::vector<double>> edges;
    for (const auto& f : doc.at("features")) {
      model.feature_names.push_back(f.at("name").get<std::string>());
      edges.push_back(f.at("edges").get<std::vector<double>>());
      model.shapes.push_back(f.at("scores").get<std::vector<double>>());
      model.bin_counts.push_back(f.at("counts").get<std::vector<std::size_t>>());
      if (model.shapes.back().size() != edges.back().size() + 1 ||
          model.bin_counts.back().size() != model.shapes.back().size()) {
        throw ModelError("ebm feature '" + model.feature_names.back() + "': scores/counts must have edges+1 entries");
      }
    }
    model.binmap = BinMap(std::move(edges));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed ebm model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("malformed ebm model: ") + e.what());
  }
}

namespace {

std::string shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

std::vector<std::filesystem::path> write_shape_tables(const EbmModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < model.n_features(); ++f) {
    const auto path = dir / ("shape_" + model.feature_names[f] + ".csv");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "bin_lower,bin_upper,score,train_count\n";
    const auto& edges = model.binmap.edges(f);
    for (std::size_t b = 0; b < model.shapes[f].size(); ++b) {
      const double lower = b == 0 ? -inf : edges[b - 1];
      const double upper = b == edges.size() ? inf : edges[b];
      out << shortest(lower) << ',' << shortest(upper) << ',' << shortest(model.shapes[f][b]) << ','
          << model.bin_counts[f][b] << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace xpd
