#include "xpd/gbdt.hpp"

#include <chrono>

#include "xpd/metrics.hpp"

namespace xpd {

void GbdtConfig::validate() const {
  if (n_rounds == 0) throw ConfigError("gbdt.n_rounds must be positive");
  if (max_depth == 0) throw ConfigError("gbdt.max_depth must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("gbdt.learning_rate must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("gbdt.lambda must be non-negative");
  if (!(gamma >= 0.0)) throw ConfigError("gbdt.gamma must be non-negative");
  if (!(min_child_weight >= 0.0)) throw ConfigError("gbdt.min_child_weight must be non-negative");
  if (early_stopping_patience == 0) throw ConfigError("gbdt.early_stopping_patience must be positive");
}

double logistic_loss(std::span<const double> margins, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double m = margins[i];
    // log(1 + e^m) - y m
    const double softplus = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    total += softplus - (labels[i] == 1 ? m : 0.0);
  }
  return margins.empty() ? 0.0 : total / static_cast<double>(margins.size());
}

GbdtModel gbdt_fit(const Dataset& train, const Dataset& valid, const GbdtConfig& cfg, GbdtTrace* trace) {
  cfg.validate();
  if (!train.has_both_classes()) throw DataError("gbdt_fit: training set has a single class");
  if (valid.rows() > 0 && valid.cols() != train.cols()) throw DataError("gbdt_fit: validation feature count differs");
  const auto start = std::chrono::steady_clock::now();

  GbdtModel model;
  model.learning_rate = cfg.learning_rate;
  model.n_features = train.cols();
  model.feature_names = train.feature_names();
  model.base_score = base_margin(static_cast<double>(train.positives()) / static_cast<double>(train.rows()));

  const BinMap binmap = build_binmap(train.x());
  const BinnedMatrix binned(train.x(), binmap);

  TreeParams params;
  params.max_depth = cfg.max_depth;
  params.lambda = cfg.lambda;
  params.gamma = cfg.gamma;
  params.min_child_weight = cfg.min_child_weight;

  std::vector<double> margin(train.rows(), model.base_score);
  std::vector<double> valid_margin(valid.rows(), model.base_score);
  const bool early_stop = valid.has_both_classes();
  std::vector<GradPair> grad(train.rows());

  double best_auc = early_stop ? roc_auc(valid_margin, valid.y()) : 0.0;
  std::size_t best_rounds = 0;
  if (trace) {
    *trace = GbdtTrace{};
    trace->train_loss.push_back(logistic_loss(margin, train.y()));
    if (early_stop) trace->valid_auc.push_back(best_auc);
  }

  for (std::size_t round = 1; round <= cfg.n_rounds; ++round) {
    for (std::size_t i = 0; i < train.rows(); ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = {p - static_cast<double>(train.y()[i]), p * (1.0 - p)};
    }
    Tree tree = fit_tree(binned, grad, params);
    for (std::size_t i = 0; i < train.rows(); ++i) margin[i] += cfg.learning_rate * predict_tree(tree, train.row(i));
    for (std::size_t i = 0; i < valid.rows(); ++i) valid_margin[i] += cfg.learning_rate * predict_tree(tree, valid.row(i));
    model.trees.push_back(std::move(tree));

    if (trace) trace->train_loss.push_back(logistic_loss(margin, train.y()));
    if (!early_stop) {
      best_rounds = round;
      continue;
    }
    const double auc = roc_auc(valid_margin, valid.y());
    if (trace) trace->valid_auc.push_back(auc);
    if (auc > best_auc) {
      best_auc = auc;
      best_rounds = round;
    } else if (round - best_rounds >= cfg.early_stopping_patience) {
      break;
    }
  }
  model.trees.resize(best_rounds);
  if (trace) trace->best_rounds = best_rounds;
  model.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

double gbdt_margin(const GbdtModel& model, std::span<const double> row) {
  if (row.size() != model.n_features) {
    throw DataError("gbdt: expected " + std::to_string(model.n_features) + " features, got " + std::to_string(row.size()));
  }
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += predict_tree(tree, row);
  return model.base_score + model.learning_rate * sum;
}

double gbdt_proba(const GbdtModel& model, std::span<const double> row) { return sigmoid(gbdt_margin(model, row)); }

namespace {

nlohmann::json node_to_json(const Tree& tree, std::size_t i) {
  const auto& node = tree.node(i);
  if (node.is_leaf()) return {{"value", node.value}, {"cover", node.cover}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"cover", node.cover},
          {"left", node_to_json(tree, static_cast<std::size_t>(node.left))},
          {"right", node_to_json(tree, static_cast<std::size_t>(node.right))}};
}

int node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes, std::size_t n_features) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  TreeNode node;
  node.cover = j.at("cover").get<double>();
  if (j.contains("feature")) {
    node.feature = j.at("feature").get<int>();
    if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features) {
      throw ModelError("model: split feature index out of range");
    }
    node.threshold = j.at("threshold").get<double>();
    node.left = node_from_json(j.at("left"), nodes, n_features);
    node.right = node_from_json(j.at("right"), nodes, n_features);
  } else {
    node.value = j.at("value").get<double>();
  }
  nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace

nlohmann::json gbdt_to_json(const GbdtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
  return {{"schema_version", 1},
          {"kind", "gbdt"},
          {"base_score", model.base_score},
          {"learning_rate", model.learning_rate},
          {"n_features", model.n_features},
          {"feature_names", model.feature_names},
          {"trees", trees}};
}

GbdtModel gbdt_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("kind").get<std::string>() != "gbdt") throw ModelError("model document is not a gbdt model");
    if (doc.at("schema_version").get<int>() != 1) throw ModelError("unsupported gbdt schema_version");
    GbdtModel model;
    model.base_score = doc.at("base_score").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.n_features = doc.at("n_features").get<std::size_t>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    for (const auto& t : doc.at("trees")) {
      std::vector<TreeNode> nodes;
      node_from_json(t, nodes, model.n_features);
      model.trees.emplace_back(std::move(nodes));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed gbdt model: ") + e.what());
  }
}

}  // namespace xpd
