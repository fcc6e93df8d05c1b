#include "xpd/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "xpd/beeswarm.hpp"

namespace xpd {

using nlohmann::json;

namespace {

std::string shortest(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string two_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

// Strict object reader: every key must be consumed, types must match.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
    check_number(key);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  void check_number(const char* key) const {
    const auto& v = obj_.at(key);
    if (v.is_number_float() && !std::isfinite(v.get<double>())) throw ConfigError(where_ + "." + key + ": not finite");
  }

  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename T>
void read_unsigned(ObjectReader& r, const json* parent, const char* key, T& out, const std::string& where) {
  if (parent && parent->contains(key) && parent->at(key).is_number_integer() && parent->at(key).get<long long>() < 0) {
    throw ConfigError(where + "." + key + ": must be non-negative");
  }
  r.read(key, out);
}

}  // namespace

void RunConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      throw ConfigError("name may only contain letters, digits, '_', '-' and '.'");
    }
  }
  if (data.path.has_value() == data.synth.has_value()) {
    throw ConfigError("data: exactly one of 'path' or 'synth' must be given");
  }
  if (data.synth) {
    if (data.synth->n < 20) throw ConfigError("data.synth.n must be at least 20");
    if (data.synth->d < 2) throw ConfigError("data.synth.d must be at least 2");
    if (!(data.synth->noise >= 0.0 && data.synth->noise < 1.0)) throw ConfigError("data.synth.noise must lie in [0, 1)");
  }
  if (data.label_column.empty()) throw ConfigError("data.label_column must not be empty");
  for (double r : {split.train, split.valid, split.test}) {
    if (!(r > 0.0)) throw ConfigError("split.ratios must all be positive");
  }
  if (std::abs(split.train + split.valid + split.test - 1.0) > 1e-9) throw ConfigError("split.ratios must sum to 1");
  gbdt.validate();
  ebm.validate();
  perturb.validate();
  if (explain_max_instances == 0) throw ConfigError("explain.max_instances must be positive");
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig cfg;
  ObjectReader top(doc, "config");
  top.read("name", cfg.name);

  if (const json* d = top.child("data")) {
    ObjectReader r(*d, "data");
    std::string path;
    if (d->contains("path")) {
      r.read("path", path);
      cfg.data.path = path;
    } else {
      r.child("path");
    }
    r.read("label_column", cfg.data.label_column);
    r.read("actionable", cfg.data.actionable);
    if (const json* s = r.child("synth")) {
      SynthSpec spec;
      ObjectReader sr(*s, "data.synth");
      read_unsigned(sr, s, "n", spec.n, "data.synth");
      read_unsigned(sr, s, "d", spec.d, "data.synth");
      read_unsigned(sr, s, "seed", spec.seed, "data.synth");
      sr.read("noise", spec.noise);
      sr.finish();
      cfg.data.synth = spec;
    }
    r.finish();
  }
  if (const json* s = top.child("split")) {
    ObjectReader r(*s, "split");
    std::vector<double> ratios{cfg.split.train, cfg.split.valid, cfg.split.test};
    r.read("ratios", ratios);
    if (ratios.size() != 3) throw ConfigError("split.ratios must have three entries");
    cfg.split = {ratios[0], ratios[1], ratios[2]};
    read_unsigned(r, s, "seed", cfg.split_seed, "split");
    r.finish();
  }
  if (const json* g = top.child("gbdt")) {
    ObjectReader r(*g, "gbdt");
    read_unsigned(r, g, "n_rounds", cfg.gbdt.n_rounds, "gbdt");
    read_unsigned(r, g, "max_depth", cfg.gbdt.max_depth, "gbdt");
    r.read("learning_rate", cfg.gbdt.learning_rate);
    r.read("lambda", cfg.gbdt.lambda);
    r.read("gamma", cfg.gbdt.gamma);
    r.read("min_child_weight", cfg.gbdt.min_child_weight);
    read_unsigned(r, g, "early_stopping_patience", cfg.gbdt.early_stopping_patience, "gbdt");
    read_unsigned(r, g, "seed", cfg.gbdt.seed, "gbdt");
    r.finish();
  }
  if (const json* e = top.child("ebm")) {
    ObjectReader r(*e, "ebm");
    read_unsigned(r, e, "max_cycles", cfg.ebm.max_cycles, "ebm");
    r.read("learning_rate", cfg.ebm.learning_rate);
    read_unsigned(r, e, "max_leaves_per_step", cfg.ebm.max_leaves_per_step, "ebm");
    read_unsigned(r, e, "early_stopping_patience", cfg.ebm.early_stopping_patience, "ebm");
    r.read("min_child_weight", cfg.ebm.min_child_weight);
    read_unsigned(r, e, "seed", cfg.ebm.seed, "ebm");
    r.finish();
  }
  if (const json* p = top.child("perturb")) {
    ObjectReader r(*p, "perturb");
    r.read("sigma", cfg.perturb.sigma);
    read_unsigned(r, p, "repetitions", cfg.perturb.repetitions, "perturb");
    read_unsigned(r, p, "seed", cfg.perturb.seed, "perturb");
    r.finish();
  }
  if (const json* x = top.child("explain")) {
    ObjectReader r(*x, "explain");
    read_unsigned(r, x, "max_instances", cfg.explain_max_instances, "explain");
    r.read("plots", cfg.plots);
    r.finish();
  }
  top.finish();
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json data = {{"label_column", cfg.data.label_column}, {"actionable", cfg.data.actionable}};
  if (cfg.data.path) data["path"] = cfg.data.path->generic_string();
  if (cfg.data.synth) {
    data["synth"] = {{"n", cfg.data.synth->n},
                     {"d", cfg.data.synth->d},
                     {"seed", cfg.data.synth->seed},
                     {"noise", cfg.data.synth->noise}};
  }
  return {{"name", cfg.name},
          {"data", data},
          {"split", {{"ratios", {cfg.split.train, cfg.split.valid, cfg.split.test}}, {"seed", cfg.split_seed}}},
          {"gbdt",
           {{"n_rounds", cfg.gbdt.n_rounds},
            {"max_depth", cfg.gbdt.max_depth},
            {"learning_rate", cfg.gbdt.learning_rate},
            {"lambda", cfg.gbdt.lambda},
            {"gamma", cfg.gbdt.gamma},
            {"min_child_weight", cfg.gbdt.min_child_weight},
            {"early_stopping_patience", cfg.gbdt.early_stopping_patience},
            {"seed", cfg.gbdt.seed}}},
          {"ebm",
           {{"max_cycles", cfg.ebm.max_cycles},
            {"learning_rate", cfg.ebm.learning_rate},
            {"max_leaves_per_step", cfg.ebm.max_leaves_per_step},
            {"early_stopping_patience", cfg.ebm.early_stopping_patience},
            {"min_child_weight", cfg.ebm.min_child_weight},
            {"seed", cfg.ebm.seed}}},
          {"perturb", {{"sigma", cfg.perturb.sigma}, {"repetitions", cfg.perturb.repetitions}, {"seed", cfg.perturb.seed}}},
          {"explain", {{"max_instances", cfg.explain_max_instances}, {"plots", cfg.plots}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc);
}

namespace {

json predictive_to_json(const PredictiveReport& p) {
  return {{"accuracy", p.accuracy},
          {"precision", p.precision},
          {"recall", p.recall},
          {"fp_rate", p.fp_rate},
          {"roc_auc", p.roc_auc}};
}

json xai_to_json(const XaiReport& x) {
  json out = json::object();
  for (auto name : XaiReport::kNames) {
    const auto& m = x.get(name);
    json entry;
    if (m.score) {
      entry["score"] = *m.score;
      entry["ordinal"] = std::string(ordinal_name(*m.ordinal()));
    } else {
      entry["score"] = nullptr;
      entry["ordinal"] = nullptr;
    }
    if (!m.note.empty()) entry["note"] = m.note;
    out[std::string(name)] = entry;
  }
  return out;
}

XaiReport xai_from_json(const json& doc) {
  XaiReport x;
  for (auto name : XaiReport::kNames) {
    const auto& entry = doc.at(std::string(name));
    auto& m = x.get(name);
    if (!entry.at("score").is_null()) m.score = entry.at("score").get<double>();
    if (entry.contains("note")) m.note = entry.at("note").get<std::string>();
  }
  return x;
}

}  // namespace

json report_to_json(const ComparisonReport& r) {
  return {{"tool_version", r.tool_version},
          {"dataset",
           {{"name", r.dataset_name},
            {"n_instances", r.n_instances},
            {"n_features", r.n_features},
            {"test_instances", r.test_instances},
            {"explained_instances", r.explained_instances}}},
          {"config", r.config},
          {"models",
           {{"gbdt", {{"predictive", predictive_to_json(r.gbdt.predictive)}, {"xai", xai_to_json(r.gbdt.xai)}}},
            {"ebm", {{"predictive", predictive_to_json(r.ebm.predictive)}, {"xai", xai_to_json(r.ebm.xai)}}}}},
          {"mcnemar",
           {{"b", r.mcnemar.b}, {"c", r.mcnemar.c}, {"statistic", r.mcnemar.statistic}, {"p_value", r.mcnemar.p_value}}},
          {"timing",
           {{"gbdt_fit_seconds", r.gbdt.predictive.runtime_seconds},
            {"ebm_fit_seconds", r.ebm.predictive.runtime_seconds}}}};
}

ComparisonReport report_from_json(const json& doc) {
  try {
    ComparisonReport r;
    r.tool_version = doc.at("tool_version").get<std::string>();
    const auto& ds = doc.at("dataset");
    r.dataset_name = ds.at("name").get<std::string>();
    r.n_instances = ds.at("n_instances").get<std::size_t>();
    r.n_features = ds.at("n_features").get<std::size_t>();
    r.test_instances = ds.at("test_instances").get<std::size_t>();
    r.explained_instances = ds.at("explained_instances").get<std::size_t>();
    r.config = doc.at("config");
    for (auto [key, target] : {std::pair{"gbdt", &r.gbdt}, std::pair{"ebm", &r.ebm}}) {
      const auto& m = doc.at("models").at(key);
      const auto& p = m.at("predictive");
      target->predictive.accuracy = p.at("accuracy").get<double>();
      target->predictive.precision = p.at("precision").get<double>();
      target->predictive.recall = p.at("recall").get<double>();
      target->predictive.fp_rate = p.at("fp_rate").get<double>();
      target->predictive.roc_auc = p.at("roc_auc").get<double>();
      target->xai = xai_from_json(m.at("xai"));
    }
    r.gbdt.predictive.runtime_seconds = doc.at("timing").at("gbdt_fit_seconds").get<double>();
    r.ebm.predictive.runtime_seconds = doc.at("timing").at("ebm_fit_seconds").get<double>();
    const auto& mc = doc.at("mcnemar");
    r.mcnemar.b = mc.at("b").get<std::size_t>();
    r.mcnemar.c = mc.at("c").get<std::size_t>();
    r.mcnemar.statistic = mc.at("statistic").get<double>();
    r.mcnemar.p_value = mc.at("p_value").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

json canonical_body(const json& report_doc) {
  json body = report_doc;
  body.erase("timing");
  return body;
}

namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string("stage '") + stage + "': ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const std::exception& e) {
    throw ModelError(prefix + e.what());
  }
}

std::vector<double> predict_proba(const MarginFn& margin, const Dataset& ds) {
  std::vector<double> out(ds.rows());
  parallel_for(ds.rows(), [&](std::size_t i) { out[i] = sigmoid(margin(ds.row(i))); });
  return out;
}

std::vector<int> labels_of(const std::vector<double>& proba) {
  std::vector<int> out(proba.size());
  for (std::size_t i = 0; i < proba.size(); ++i) out[i] = label_from_proba(proba[i]);
  return out;
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  PreparedData out;
  if (cfg.data.synth) {
    const auto& s = *cfg.data.synth;
    out.data = synthesize(s.n, s.d, s.seed, s.noise);
    if (!cfg.data.actionable.empty()) {
      std::vector<FeatureMeta> meta = out.data.meta();
      for (auto& m : meta) {
        m.actionable = std::find(cfg.data.actionable.begin(), cfg.data.actionable.end(), m.name) != cfg.data.actionable.end();
      }
      out.data = Dataset(out.data.x(), out.data.y(), std::move(meta));
    }
  } else {
    out.data = load_csv(*cfg.data.path, cfg.data.label_column, cfg.data.actionable);
  }
  out.split = stratified_split(out.data, cfg.split, cfg.split_seed);
  return out;
}

FittedModels fit_models(const Dataset& data, const SplitIndices& split, const RunConfig& cfg) {
  const Dataset train = data.subset(split.train);
  const Dataset valid = data.subset(split.valid);
  FittedModels out;
  out.gbdt = gbdt_fit(train, valid, cfg.gbdt);
  out.ebm = ebm_fit(train, valid, cfg.ebm);
  return out;
}

RunArtifacts evaluate_models(const PreparedData& prepared, FittedModels models, const RunConfig& cfg) {
  RunArtifacts out;
  out.models = std::move(models);
  const auto& gbdt = out.models.gbdt;
  const auto& ebm = out.models.ebm;
  const Dataset train = prepared.data.subset(prepared.split.train);
  const Dataset test = prepared.data.subset(prepared.split.test);

  const auto gbdt_margin_f = gbdt_margin_fn(gbdt);
  const auto ebm_margin_f = ebm_margin_fn(ebm);
  const auto gbdt_proba = predict_proba(gbdt_margin_f, test);
  const auto ebm_proba = predict_proba(ebm_margin_f, test);
  const auto gbdt_labels = labels_of(gbdt_proba);
  const auto ebm_labels = labels_of(ebm_proba);

  auto& report = out.report;
  report.dataset_name = cfg.name;
  report.n_instances = prepared.data.rows();
  report.n_features = prepared.data.cols();
  report.test_instances = test.rows();
  report.config = run_config_to_json(cfg);
  report.gbdt.predictive = predictive_report(confusion(gbdt_labels, test.y()), gbdt_proba, test.y(), round2(gbdt.fit_seconds));
  report.ebm.predictive = predictive_report(confusion(ebm_labels, test.y()), ebm_proba, test.y(), round2(ebm.fit_seconds));
  report.mcnemar = mcnemar(gbdt_labels, ebm_labels, test.y());

  const std::size_t n_explain = std::min(cfg.explain_max_instances, test.rows());
  std::vector<std::size_t> head(n_explain);
  for (std::size_t i = 0; i < n_explain; ++i) head[i] = i;
  out.explained = test.subset(head);
  report.explained_instances = n_explain;

  const auto gbdt_attr_f = gbdt_attributor(gbdt);
  const auto ebm_attr_f = ebm_attributor(ebm);
  out.gbdt_attributions = attribution_matrix(gbdt_attr_f, out.explained.x());
  out.ebm_attributions = attribution_matrix(ebm_attr_f, out.explained.x());

  XaiInputs inputs;
  inputs.data = &out.explained;
  inputs.train_means = column_means(train.x());
  inputs.train_stds = column_stds(train.x());
  inputs.perturb = cfg.perturb;

  inputs.margin = gbdt_margin_f;
  inputs.attribute = gbdt_attr_f;
  inputs.attributions = &out.gbdt_attributions;
  report.gbdt.xai = evaluate_xai(inputs);

  inputs.margin = ebm_margin_f;
  inputs.attribute = ebm_attr_f;
  inputs.attributions = &out.ebm_attributions;
  report.ebm.xai = evaluate_xai(inputs);
  return out;
}

RunArtifacts run_pipeline(const RunConfig& cfg) {
  in_stage("config", [&] { cfg.validate(); });
  const auto prepared = in_stage("data", [&] { return prepare_data(cfg); });
  auto models = in_stage("train", [&] { return fit_models(prepared.data, prepared.split, cfg); });
  return in_stage("evaluate", [&] { return evaluate_models(prepared, std::move(models), cfg); });
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const ComparisonReport& report, const std::filesystem::path& dir) {
  if (dir.empty()) throw ConfigError("output directory must not be empty");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;

  std::ostringstream predictive;
  predictive << "model,accuracy,precision,recall,fp_rate,roc_auc,runtime_seconds\n";
  for (auto [name, m] : {std::pair{"gbdt", &report.gbdt}, std::pair{"ebm", &report.ebm}}) {
    const auto& p = m->predictive;
    predictive << name << ',' << shortest(p.accuracy) << ',' << shortest(p.precision) << ',' << shortest(p.recall) << ','
               << shortest(p.fp_rate) << ',' << shortest(p.roc_auc) << ',' << two_decimals(p.runtime_seconds) << '\n';
  }
  written.push_back(dir / "predictive.csv");
  write_text(written.back(), predictive.str());

  std::ostringstream xai;
  xai << "model,metric,score,ordinal\n";
  for (auto [name, m] : {std::pair{"gbdt", &report.gbdt}, std::pair{"ebm", &report.ebm}}) {
    for (auto metric : XaiReport::kNames) {
      const auto& v = m->xai.get(metric);
      xai << name << ',' << metric << ',' << (v.score ? shortest(*v.score) : "NA") << ','
          << (v.score ? std::string(ordinal_name(*v.ordinal())) : "NA") << '\n';
    }
  }
  written.push_back(dir / "xai.csv");
  write_text(written.back(), xai.str());

  // report.json goes last and via rename so an aborted run never leaves one.
  const auto tmp = dir / "report.json.tmp";
  write_text(tmp, report_to_json(report).dump(2) + "\n");
  std::filesystem::rename(tmp, dir / "report.json");
  written.push_back(dir / "report.json");
  return written;
}

void write_attribution_csv(const AttributionMatrix& attr, const Matrix& x, const std::vector<std::string>& names,
                           const std::filesystem::path& path) {
  if (attr.phi.rows() != x.rows() || attr.phi.cols() != x.cols() || names.size() != x.cols()) {
    throw DataError("attribution csv: dimension mismatch");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "instance_id,feature,feature_value,phi,base_value\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out << i << ',' << names[j] << ',' << shortest(x(i, j)) << ',' << shortest(attr.phi(i, j)) << ','
          << shortest(attr.base_values[i]) << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

AttributionTable read_attribution_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "instance_id,feature,feature_value,phi,base_value") {
    throw DataError("'" + path.string() + "' is not an attribution file (unexpected header)");
  }
  struct Entry {
    std::size_t instance;
    std::string feature;
    double value, phi, base;
  };
  std::vector<Entry> entries;
  std::vector<std::string> names;
  std::size_t max_instance = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw DataError("line " + std::to_string(line_no) + ": expected 5 cells");
    Entry e;
    try {
      e.instance = std::stoull(cells[0]);
      e.feature = cells[1];
      e.value = std::stod(cells[2]);
      e.phi = std::stod(cells[3]);
      e.base = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw DataError("line " + std::to_string(line_no) + ": cannot parse attribution row");
    }
    if (std::find(names.begin(), names.end(), e.feature) == names.end()) names.push_back(e.feature);
    max_instance = std::max(max_instance, e.instance);
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("'" + path.string() + "' has no attribution rows");
  const std::size_t n = max_instance + 1;
  AttributionTable t;
  t.names = names;
  t.phi = Matrix(n, names.size(), std::numeric_limits<double>::quiet_NaN());
  t.values = Matrix(n, names.size(), std::numeric_limits<double>::quiet_NaN());
  t.base_values.assign(n, 0.0);
  for (const auto& e : entries) {
    const auto j = static_cast<std::size_t>(std::find(names.begin(), names.end(), e.feature) - names.begin());
    t.phi(e.instance, j) = e.phi;
    t.values(e.instance, j) = e.value;
    t.base_values[e.instance] = e.base;
  }
  for (double v : t.phi.values()) {
    if (std::isnan(v)) throw DataError("'" + path.string() + "' does not cover every instance/feature pair");
  }
  return t;
}

ComparisonReport run_compare(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  if (out_dir.empty()) throw ConfigError("output directory must not be empty");
  {
    // a stale report from an earlier run must not survive a failed one
    std::error_code ec;
    std::filesystem::remove(out_dir / "report.json", ec);
  }
  auto artifacts = run_pipeline(cfg);

  std::vector<std::filesystem::path> written;
  try {
    std::filesystem::create_directories(out_dir);
    const auto names = artifacts.explained.feature_names();
    auto write_json = [&](const std::string& file, const json& doc) {
      written.push_back(out_dir / file);
      write_text(written.back(), doc.dump(2) + "\n");
    };
    write_json("gbdt_model.json", gbdt_to_json(artifacts.models.gbdt));
    write_json("ebm_model.json", ebm_to_json(artifacts.models.ebm));
    written.push_back(out_dir / "attributions_gbdt.csv");
    write_attribution_csv(artifacts.gbdt_attributions, artifacts.explained.x(), names, written.back());
    written.push_back(out_dir / "attributions_ebm.csv");
    write_attribution_csv(artifacts.ebm_attributions, artifacts.explained.x(), names, written.back());
    if (cfg.plots && artifacts.explained.rows() > 0) {
      written.push_back(out_dir / "beeswarm_gbdt.svg");
      emit_beeswarm(artifacts.gbdt_attributions.phi, artifacts.explained.x(), names, written.back(),
                    {15, 0, "GBDT - " + cfg.name});
      written.push_back(out_dir / "beeswarm_ebm.svg");
      emit_beeswarm(artifacts.ebm_attributions.phi, artifacts.explained.x(), names, written.back(),
                    {15, 0, "EBM - " + cfg.name});
    }
    for (const auto& p : emit_report(artifacts.report, out_dir)) written.push_back(p);
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    std::filesystem::remove(out_dir / "report.json.tmp", ec);
    throw;
  }
  return artifacts.report;
}

std::vector<ComparisonReport> run_batch(const std::filesystem::path& manifest, const std::filesystem::path& out_dir) {
  if (out_dir.empty()) throw ConfigError("output directory must not be empty");
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest '" + manifest.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  ObjectReader top(doc, "manifest");
  const json* runs = top.child("runs");
  top.finish();
  if (!runs || !runs->is_array() || runs->empty()) throw ConfigError("manifest.runs must be a non-empty array");

  std::vector<RunConfig> configs;
  std::set<std::string> names;
  for (std::size_t i = 0; i < runs->size(); ++i) {
    const auto& entry = (*runs)[i];
    ObjectReader r(entry, "manifest.runs[" + std::to_string(i) + "]");
    const json* inline_cfg = r.child("config");
    std::string file;
    r.read("config_file", file);
    r.finish();
    if ((inline_cfg != nullptr) == !file.empty()) {
      throw ConfigError("manifest.runs[" + std::to_string(i) + "]: give exactly one of 'config' or 'config_file'");
    }
    RunConfig cfg = inline_cfg ? run_config_from_json(*inline_cfg)
                               : load_run_config(manifest.parent_path() / std::filesystem::path(file));
    cfg.validate();
    if (!names.insert(cfg.name).second) throw ConfigError("manifest: duplicate run name '" + cfg.name + "'");
    configs.push_back(std::move(cfg));
  }

  std::vector<ComparisonReport> reports;
  for (const auto& cfg : configs) reports.push_back(run_compare(cfg, out_dir / cfg.name));

  std::ostringstream summary;
  summary << "dataset,model,metric,value\n";
  std::map<std::pair<std::string, std::string>, std::vector<double>> per_metric;
  for (const auto& r : reports) {
    for (auto [model, m] : {std::pair{"gbdt", &r.gbdt}, std::pair{"ebm", &r.ebm}}) {
      const auto& p = m->predictive;
      for (auto [metric, value] : {std::pair{"accuracy", p.accuracy}, std::pair{"precision", p.precision},
                                   std::pair{"recall", p.recall}, std::pair{"fp_rate", p.fp_rate},
                                   std::pair{"roc_auc", p.roc_auc}}) {
        summary << r.dataset_name << ',' << model << ',' << metric << ',' << shortest(value) << '\n';
      }
      summary << r.dataset_name << ',' << model << ",runtime_seconds," << two_decimals(p.runtime_seconds) << '\n';
      for (auto metric : XaiReport::kNames) {
        const auto& v = m->xai.get(metric);
        summary << r.dataset_name << ',' << model << ',' << metric << ',' << (v.score ? shortest(*v.score) : "NA") << '\n';
        if (v.score) per_metric[{model, std::string(metric)}].push_back(*v.score);
      }
    }
  }
  write_text(out_dir / "summary.csv", summary.str());

  std::ostringstream aggregate;
  aggregate << "model,metric,median_score,ordinal\n";
  for (auto model : {"gbdt", "ebm"}) {
    for (auto metric : XaiReport::kNames) {
      auto it = per_metric.find({model, std::string(metric)});
      if (it == per_metric.end()) {
        aggregate << model << ',' << metric << ",NA,NA\n";
        continue;
      }
      auto values = it->second;
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
      aggregate << model << ',' << metric << ',' << shortest(median) << ',' << ordinal_name(to_ordinal(median)) << '\n';
    }
  }
  write_text(out_dir / "aggregate.csv", aggregate.str());
  return reports;
}

}  // namespace xpd
