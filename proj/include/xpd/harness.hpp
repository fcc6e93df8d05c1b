#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xpd/attribution.hpp"
#include "xpd/dataset.hpp"
#include "xpd/ebm.hpp"
#include "xpd/gbdt.hpp"
#include "xpd/metrics.hpp"
#include "xpd/xai_metrics.hpp"

#include "json.hpp"

namespace xpd {

struct SynthSpec {
  std::size_t n = 10000;
  std::size_t d = 18;
  std::uint64_t seed = 7;
  double noise = 0.02;
};

struct DataSource {
  std::optional<std::filesystem::path> path;
  std::optional<SynthSpec> synth;
  std::string label_column = "label";
  std::vector<std::string> actionable;
};

/// Everything that determines a comparison run. Execution settings (worker
/// count, output directory) are deliberately not part of it.
struct RunConfig {
  std::string name = "run";
  DataSource data;
  SplitRatios split;
  std::uint64_t split_seed = 42;
  GbdtConfig gbdt;
  EbmConfig ebm;
  PerturbConfig perturb;
  std::size_t explain_max_instances = 500;
  bool plots = true;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
};

/// Strict parse: unknown keys and wrong types are ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

struct ModelResult {
  PredictiveReport predictive;
  XaiReport xai;

  bool operator==(const ModelResult&) const = default;
};

struct ComparisonReport {
  std::string tool_version = kToolVersion;
  std::string dataset_name;
  std::size_t n_instances = 0;
  std::size_t n_features = 0;
  std::size_t test_instances = 0;
  std::size_t explained_instances = 0;
  nlohmann::json config;
  ModelResult gbdt;
  ModelResult ebm;
  McNemarResult mcnemar;

  bool operator==(const ComparisonReport&) const = default;
};

/// Full report document. Wall-clock runtimes live under the "timing" key.
nlohmann::json report_to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const nlohmann::json& doc);
/// The report without its "timing" section; identical configs give identical bodies.
nlohmann::json canonical_body(const nlohmann::json& report_doc);

struct PreparedData {
  Dataset data;
  SplitIndices split;
};

struct FittedModels {
  GbdtModel gbdt;
  EbmModel ebm;
};

struct RunArtifacts {
  ComparisonReport report;
  FittedModels models;
  Dataset explained;  // rows the XAI metrics were computed on
  AttributionMatrix gbdt_attributions;
  AttributionMatrix ebm_attributions;
};

PreparedData prepare_data(const RunConfig& cfg);

/// Fits both models from the train and validation rows only.
FittedModels fit_models(const Dataset& data, const SplitIndices& split, const RunConfig& cfg);

/// Test-split predictive metrics, attributions, XAI metrics and McNemar.
RunArtifacts evaluate_models(const PreparedData& prepared, FittedModels models, const RunConfig& cfg);

/// The whole pipeline in memory. Errors name the failing stage.
RunArtifacts run_pipeline(const RunConfig& cfg);

/// Runs the pipeline and writes every output to `out_dir`. On failure no
/// report.json is left behind.
ComparisonReport run_compare(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Writes report.json, predictive.csv and xai.csv; returns the paths written.
std::vector<std::filesystem::path> emit_report(const ComparisonReport& report, const std::filesystem::path& dir);

/// Runs every config listed in a manifest ({"runs": [{"config": {...}} |
/// {"config_file": "..."}]}) into out_dir/<name>/ and writes summary.csv
/// (dataset,model,metric,value) plus aggregate.csv (median score per model
/// and metric with its ordinal).
std::vector<ComparisonReport> run_batch(const std::filesystem::path& manifest, const std::filesystem::path& out_dir);

/// Long-format attribution CSV: instance_id,feature,feature_value,phi,base_value.
void write_attribution_csv(const AttributionMatrix& attr, const Matrix& x, const std::vector<std::string>& names,
                           const std::filesystem::path& path);

struct AttributionTable {
  std::vector<std::string> names;
  Matrix phi;
  Matrix values;
  std::vector<double> base_values;
};
AttributionTable read_attribution_csv(const std::filesystem::path& path);

}  // namespace xpd
