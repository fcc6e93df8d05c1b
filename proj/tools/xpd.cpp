// xpd: black-box vs glass-box phishing-model comparison from the command line.

#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "xpd/attribution.hpp"
#include "xpd/beeswarm.hpp"
#include "xpd/common.hpp"
#include "xpd/dataset.hpp"
#include "xpd/ebm.hpp"
#include "xpd/gbdt.hpp"
#include "xpd/harness.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw xpd::DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw xpd::DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::string sanitize_name(std::string s) {
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
  }
  return s.empty() ? "run" : s;
}

void apply_workers(std::size_t workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  xpd::set_worker_count(workers);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare a gradient-boosted tree ensemble with an Explainable Boosting Machine"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(xpd::kToolVersion));

  std::size_t workers = 0;
  app.add_option("--workers", workers, "Worker threads (0 = all cores); results do not depend on it");

  auto* synth = app.add_subcommand("synth", "Write a synthetic phishing-like CSV");
  xpd::SynthSpec synth_spec;
  std::string synth_out;
  synth->add_option("--n", synth_spec.n, "Rows")->required();
  synth->add_option("--d", synth_spec.d, "Features")->required();
  synth->add_option("--seed", synth_spec.seed, "Seed")->required();
  synth->add_option("--noise", synth_spec.noise, "Label flip probability")->required();
  synth->add_option("--out", synth_out, "Output CSV")->required();

  auto* compare = app.add_subcommand("compare", "Train both models and write the comparison report");
  std::string cmp_data, cmp_label, cmp_actionable, cmp_config, cmp_out;
  compare->add_option("--data", cmp_data, "Input CSV (overrides the config's data source)");
  compare->add_option("--label-col", cmp_label, "Label column name");
  compare->add_option("--actionable", cmp_actionable, "Comma-separated actionable feature names");
  compare->add_option("--config", cmp_config, "Run config JSON");
  compare->add_option("--out", cmp_out, "Output directory")->required();

  auto* batch = app.add_subcommand("batch", "Run every config in a manifest and summarise");
  std::string batch_manifest, batch_out;
  batch->add_option("--manifest", batch_manifest, "Manifest JSON")->required();
  batch->add_option("--out", batch_out, "Output directory")->required();

  auto* explain = app.add_subcommand("explain", "Write per-instance SHAP attributions as CSV");
  std::string ex_model, ex_data, ex_out, ex_label = "label";
  explain->add_option("--model", ex_model, "Model JSON (gbdt or ebm)")->required();
  explain->add_option("--data", ex_data, "Input CSV")->required();
  explain->add_option("--out", ex_out, "Output CSV")->required();
  explain->add_option("--label-col", ex_label, "Label column name");

  auto* shapes = app.add_subcommand("shapes", "Export EBM shape tables as CSV");
  std::string sh_model, sh_out;
  shapes->add_option("--model", sh_model, "EBM model JSON")->required();
  shapes->add_option("--out", sh_out, "Output directory")->required();

  auto* plot = app.add_subcommand("plot", "Render a beeswarm summary plot as SVG");
  std::string pl_phis, pl_data, pl_out, pl_label = "label";
  plot->add_option("--phis", pl_phis, "Attribution CSV from explain or compare")->required();
  plot->add_option("--data", pl_data, "CSV supplying feature values (default: values in the attribution file)");
  plot->add_option("--out", pl_out, "Output SVG")->required();
  plot->add_option("--label-col", pl_label, "Label column name in --data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_workers(workers);

    if (*synth) {
      const auto ds = xpd::synthesize(synth_spec.n, synth_spec.d, synth_spec.seed, synth_spec.noise);
      xpd::write_csv(ds, synth_out);
    } else if (*compare) {
      xpd::RunConfig cfg = cmp_config.empty() ? xpd::RunConfig{} : xpd::load_run_config(cmp_config);
      if (!cmp_data.empty()) {
        cfg.data.path = cmp_data;
        cfg.data.synth.reset();
        if (cmp_config.empty()) cfg.name = sanitize_name(std::filesystem::path(cmp_data).stem().string());
      }
      if (!cfg.data.path && !cfg.data.synth) throw xpd::ConfigError("no data source: pass --data or set data in the config");
      if (!cmp_label.empty()) cfg.data.label_column = cmp_label;
      if (!cmp_actionable.empty()) cfg.data.actionable = split_list(cmp_actionable);
      const auto report = xpd::run_compare(cfg, cmp_out);
      std::cout << "gbdt accuracy " << report.gbdt.predictive.accuracy << ", ebm accuracy "
                << report.ebm.predictive.accuracy << ", mcnemar p " << report.mcnemar.p_value << '\n';
      std::cout << "report written to " << (std::filesystem::path(cmp_out) / "report.json").string() << '\n';
    } else if (*batch) {
      const auto reports = xpd::run_batch(batch_manifest, batch_out);
      std::cout << reports.size() << " runs; summary in " << (std::filesystem::path(batch_out) / "summary.csv").string()
                << '\n';
    } else if (*explain) {
      const auto doc = read_json(ex_model);
      const auto ds = xpd::load_csv(ex_data, ex_label);
      xpd::AttributionMatrix attr;
      const auto kind = doc.value("kind", std::string{});
      if (kind == "gbdt") {
        const auto model = xpd::gbdt_from_json(doc);
        if (model.feature_names != ds.feature_names()) throw xpd::DataError("data columns do not match the model's features");
        attr = xpd::attribution_matrix(xpd::gbdt_attributor(model), ds.x());
      } else if (kind == "ebm") {
        const auto model = xpd::ebm_from_json(doc);
        if (model.feature_names != ds.feature_names()) throw xpd::DataError("data columns do not match the model's features");
        attr = xpd::attribution_matrix(xpd::ebm_attributor(model), ds.x());
      } else {
        throw xpd::ModelError("'" + ex_model + "' has unknown model kind '" + kind + "'");
      }
      xpd::write_attribution_csv(attr, ds.x(), ds.feature_names(), ex_out);
    } else if (*shapes) {
      const auto model = xpd::ebm_from_json(read_json(sh_model));
      const auto written = xpd::write_shape_tables(model, sh_out);
      std::cout << written.size() << " shape tables written to " << sh_out << '\n';
    } else if (*plot) {
      const auto table = xpd::read_attribution_csv(pl_phis);
      xpd::Matrix values = table.values;
      if (!pl_data.empty()) {
        const auto ds = xpd::load_csv(pl_data, pl_label);
        if (ds.feature_names() != table.names || ds.rows() != table.phi.rows()) {
          throw xpd::DataError("--data does not match the attribution file's features and instances");
        }
        values = ds.x();
      }
      xpd::emit_beeswarm(table.phi, values, table.names, pl_out, {15, 0, std::filesystem::path(pl_phis).stem().string()});
    }
  } catch (const xpd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const xpd::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
