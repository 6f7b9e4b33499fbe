#include "neurospect/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "neurospect/config.hpp"
#include "neurospect/csv.hpp"
#include "neurospect/dataset.hpp"
#include "neurospect/errors.hpp"
#include "neurospect/pipeline.hpp"
#include "neurospect/service.hpp"
#include "neurospect/synthetic.hpp"

namespace neurospect::cli {
namespace {

namespace fs = std::filesystem;

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InvalidArgument(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) {
    throw InvalidArgument(std::string("input file not found: ") + path + " (" + what + ")");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<spectral::FrequencyBand> parse_bands(const std::string& name) {
  if (name == "six") return spectral::six_bands();
  if (name == "five") return spectral::five_bands();
  throw InvalidArgument("unknown band set '" + name + "' (expected six or five)");
}

struct TableOptions {
  std::string features;
  std::string mode = "full";
  std::string adapter;
  std::string bands = "six";
};

void add_table_options(CLI::App* cmd, TableOptions& t) {
  cmd->add_option("--features", t.features, "Feature table CSV")->required();
  cmd->add_option("--mode", t.mode, "full or psd_only")->check(CLI::IsMember({"full", "psd_only"}));
  cmd->add_option("--adapter", t.adapter, "Column adapter map (external = canonical)");
  cmd->add_option("--bands", t.bands, "six or five")->check(CLI::IsMember({"six", "five"}));
}

dataset::Dataset load_table(const TableOptions& t) {
  require_file(t.features, "--features");
  dataset::AdapterMap adapter;
  if (!t.adapter.empty()) {
    require_file(t.adapter, "--adapter");
    adapter = dataset::AdapterMap::load(t.adapter);
  }
  return dataset::parse_feature_table(t.features, dataset::parse_mode(t.mode), adapter,
                                      parse_bands(t.bands));
}

pipeline::TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return {};
  require_file(path, "--config");
  return pipeline::TrainConfig::from_json(config::read_json_file(path));
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * v);
  return buf;
}

// synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::size_t per_class = 100;
  std::size_t classes = 3;
  std::uint64_t seed = 2024;
  double duration = 60.0;
  double fs = 128.0;
  std::string mode = "full";
  bool raw = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  synthetic::CohortConfig cfg;
  if (a.classes < 2 || a.classes > dataset::kNumClasses) {
    throw InvalidArgument("--classes must be between 2 and 7");
  }
  if (a.classes != 3) {
    cfg.classes.clear();
    for (std::size_t c = 0; c < a.classes; ++c) cfg.classes.push_back(dataset::label_from_code(static_cast<int>(c)));
  }
  cfg.subjects_per_class = a.per_class;
  cfg.seed = a.seed;
  cfg.duration_s = a.duration;
  cfg.fs = a.fs;
  cfg.extraction.mode = dataset::parse_mode(a.mode);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);

  if (a.raw) {
    const auto plans = synthetic::plan_cohort(cfg);
    fs::create_directories(dir / "raw");
    std::ofstream manifest(dir / "manifest.csv");
    manifest << "id,label,age,sex,education,iq,file\n";
    for (const auto& p : plans) {
      const auto file = "raw/" + p.id + ".csv";
      dataset::write_raw_eeg_csv(dir / file, synthetic::render_subject(p, cfg));
      const auto& d = p.demographics;
      manifest << p.id << "," << csv::escape(dataset::label_name(p.label)) << ","
               << csv::format_double(*d.age) << "," << dataset::sex_name(*d.sex) << ","
               << csv::format_double(*d.education) << "," << csv::format_double(*d.iq) << ","
               << file << "\n";
    }
    out << "wrote " << plans.size() << " raw recordings and " << (dir / "manifest.csv").string()
        << "\n";
  }
  const auto data = synthetic::synthesize_cohort(cfg);
  dataset::write_feature_table(dir / "features.csv", data);
  out << "wrote " << data.records.size() << " records to " << (dir / "features.csv").string() << "\n";
  return 0;
}

// extract -------------------------------------------------------------------

struct ExtractArgs {
  std::string manifest;
  std::string out;
  double fs = 128.0;
  std::size_t segment = 256;
  double overlap = 0.5;
  std::string mode = "full";
  std::string bands = "six";
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  require_file(a.manifest, "--manifest");
  const auto table = csv::read_file(a.manifest);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < table.header.size(); ++c) col[table.header[c]] = c;
  for (const char* need : {"id", "label", "file"}) {
    if (!col.count(need)) throw SchemaError(std::string("manifest lacks column '") + need + "'");
  }
  dataset::ExtractionConfig cfg;
  cfg.welch.segment_len = a.segment;
  cfg.welch.overlap = a.overlap;
  cfg.bands = parse_bands(a.bands);
  cfg.mode = dataset::parse_mode(a.mode);

  dataset::Dataset data;
  data.schema.mode = cfg.mode;
  data.schema.bands = cfg.bands;
  for (auto name : dataset::kDemographicColumns) {
    if (col.count(std::string(name))) data.demographic_columns.emplace_back(name);
  }
  const fs::path base = fs::path(a.manifest).parent_path();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto cell = [&](const std::string& name) -> std::string {
      const auto it = col.find(name);
      return it != col.end() && it->second < row.size() ? row[it->second] : std::string();
    };
    auto number = [&](const std::string& name) -> std::optional<double> {
      const auto s = cell(name);
      if (s.empty()) return std::nullopt;
      try {
        return std::stod(s);
      } catch (const std::exception&) {
        throw DataError("manifest row " + std::to_string(r + 1) + ", column '" + name +
                        "': cannot parse '" + s + "'");
      }
    };
    dataset::Demographics d;
    d.age = number("age");
    d.education = number("education");
    d.iq = number("iq");
    if (!cell("sex").empty()) d.sex = dataset::parse_sex(cell("sex"));
    fs::path file = cell("file");
    if (file.is_relative()) file = base / file;
    if (!fs::is_regular_file(file)) throw InvalidArgument("input file not found: " + file.string());
    const auto window = dataset::read_raw_eeg_csv(file, a.fs);
    data.records.push_back(dataset::record_from_window(window, cfg, cell("id"), d,
                                                       dataset::parse_label(cell("label"))));
  }
  dataset::write_feature_table(a.out, data);
  out << "extracted " << data.records.size() << " records to " << a.out << "\n";
  return 0;
}

// preprocess ----------------------------------------------------------------

int cmd_preprocess(const TableOptions& t, const std::string& config_path, const std::string& out_dir,
                   std::ostream& out) {
  const auto data = load_table(t);
  pipeline::TrainConfig cfg;
  if (!config_path.empty()) {
    require_file(config_path, "--config");
    const auto j = config::read_json_file(config_path);
    cfg.preprocess = preprocess::PreprocessConfig::from_json(j.contains("preprocess") ? j.at("preprocess") : j);
  }
  const auto prepared = pipeline::prepare(data, cfg);
  pipeline::check_no_leakage(prepared);
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  // Cleaned (outlier-treated, imputed, unscaled) tables per split.
  auto cleaned = [&](const std::vector<std::size_t>& idx) {
    dataset::Dataset d;
    d.schema = data.schema;
    d.demographic_columns = data.demographic_columns;
    const std::size_t np = data.schema.psd_count();
    for (auto i : idx) {
      auto rec = data.records[i];
      const auto row = prepared.transform.clean(dataset::feature_row(rec, data.schema));
      const auto& names = data.demographic_columns;
      auto has = [&](std::string_view n) { return std::find(names.begin(), names.end(), n) != names.end(); };
      if (has("age")) rec.demographics.age = row[0];
      if (has("sex")) rec.demographics.sex = row[1] >= 0.5 ? dataset::Sex::male : dataset::Sex::female;
      if (has("education")) rec.demographics.education = row[2];
      if (has("iq")) rec.demographics.iq = row[3];
      for (std::size_t k = 0; k < np; ++k) rec.psd.values[k] = std::pow(10.0, row[dataset::kDemographicCount + k]);
      if (rec.coherence) {
        for (std::size_t k = 0; k < rec.coherence->values.size(); ++k) {
          rec.coherence->values[k] = row[dataset::kDemographicCount + np + k];
        }
      }
      d.records.push_back(std::move(rec));
    }
    return d;
  };
  auto train_idx = prepared.fit_records;
  train_idx.insert(train_idx.end(), prepared.val_records.begin(), prepared.val_records.end());
  std::sort(train_idx.begin(), train_idx.end());
  dataset::write_feature_table(dir / "train.csv", cleaned(train_idx));
  dataset::write_feature_table(dir / "test.csv", cleaned(prepared.test_records));
  auto ids = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> v;
    for (auto i : idx) v.push_back(data.records[i].id);
    return v;
  };
  write_json(dir / "preprocess.json",
             {{"config", cfg.preprocess.to_json()},
              {"transform", prepared.transform.to_json()},
              {"encoder", prepared.encoder.to_json()},
              {"split", {{"fit", ids(prepared.fit_records)}, {"validation", ids(prepared.val_records)},
                         {"test", ids(prepared.test_records)}}},
              {"n_fit_resampled", prepared.fit_rows.rows.size()}});
  out << "fit " << prepared.fit_records.size() << " (" << prepared.fit_rows.rows.size()
      << " after resampling), validation " << prepared.val_records.size() << ", test "
      << prepared.test_records.size() << "; wrote " << dir.string() << "\n";
  return 0;
}

// train / evaluate / ablate / summarize -----------------------------------------

int cmd_train(const TableOptions& t, const std::string& config_path, const std::string& out_path,
              std::string history_path, std::ostream& out) {
  auto cfg = load_train_config(config_path);
  const auto data = load_table(t);
  if (data.schema.mode == dataset::FeatureMode::psd_only) cfg.include_coherence = false;
  const auto result = pipeline::train(data, cfg);
  const fs::path artifact_path(out_path);
  if (artifact_path.has_parent_path()) fs::create_directories(artifact_path.parent_path());
  pipeline::save_artifact(result.artifact, artifact_path);
  if (history_path.empty()) history_path = out_path + ".history.json";
  write_json(history_path, result.history.to_json());
  out << "trained " << result.history.epochs.size() << " epochs (best " << result.history.best_epoch
      << ")";
  if (result.artifact.report) out << ", held-out accuracy " << pct(result.artifact.report->accuracy);
  out << "\nwrote " << out_path << " and " << history_path << "\n";
  return 0;
}

int cmd_evaluate(TableOptions t, const std::string& model_path, std::string out_path, bool all,
                 std::ostream& out) {
  require_file(model_path, "--model");
  const auto artifact = pipeline::load_artifact(model_path);
  auto data = load_table(t);
  pipeline::check_schema(artifact, data.schema);
  std::vector<dataset::SubjectRecord> records;
  if (all) {
    records = data.records;
  } else {
    const std::set<std::string> ids(artifact.test_ids.begin(), artifact.test_ids.end());
    for (const auto& r : data.records) {
      if (ids.count(r.id)) records.push_back(r);
    }
    if (records.empty()) {
      throw DataError("none of the model's held-out records are in this table; use --all");
    }
  }
  const auto report = pipeline::evaluate(artifact, records);
  if (out_path.empty()) {
    const auto parent = fs::path(model_path).parent_path();
    out_path = ((parent.empty() ? fs::path(".") : parent) / "evaluation.json").string();
  }
  write_json(out_path, report.to_json());
  out << "accuracy " << pct(report.accuracy) << ", macro F1 " << pct(report.macro_f1) << " on "
      << records.size() << " records; wrote " << out_path << "\n";
  return 0;
}

int cmd_ablate(const TableOptions& t, const std::string& config_path, const std::string& out_path,
               std::ostream& out) {
  const auto cfg = load_train_config(config_path);
  const auto data = load_table(t);
  const auto report = pipeline::ablation_compare(data, cfg);
  write_json(out_path, report.to_json());
  out << "with coherence " << pct(report.with_coherence.report.accuracy) << ", without "
      << pct(report.without_coherence.report.accuracy) << "; wrote " << out_path << "\n";
  return 0;
}

int cmd_summarize(const TableOptions& t, const std::string& out_path, std::ostream& out) {
  const auto data = load_table(t);
  write_json(out_path, dataset::summarize_dataset(data).to_json());
  out << "summarized " << data.records.size() << " records to " << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"EEG spectral/coherence feature pipeline and CNN classifier"};
  app.name("neurospect");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a labeled synthetic EEG cohort");
  c_synth->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  c_synth->add_option("--subjects-per-class", synth.per_class, "Subjects per class");
  c_synth->add_option("--classes", synth.classes, "Number of classes (2-7)");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--duration", synth.duration, "Seconds of EEG per subject");
  c_synth->add_option("--fs", synth.fs, "Sampling rate (Hz)");
  c_synth->add_option("--mode", synth.mode, "full or psd_only")->check(CLI::IsMember({"full", "psd_only"}));
  c_synth->add_flag("--raw", synth.raw, "Also write raw EEG CSVs and a manifest");

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract", "Raw EEG CSVs -> feature table");
  c_extract->add_option("--manifest", extract.manifest, "CSV: id,label,age,sex,education,iq,file")->required();
  c_extract->add_option("--out", extract.out, "Output feature CSV")->required();
  c_extract->add_option("--fs", extract.fs, "Sampling rate (Hz)");
  c_extract->add_option("--segment", extract.segment, "Welch segment length");
  c_extract->add_option("--overlap", extract.overlap, "Welch overlap fraction");
  c_extract->add_option("--mode", extract.mode, "full or psd_only")->check(CLI::IsMember({"full", "psd_only"}));
  c_extract->add_option("--bands", extract.bands, "six or five")->check(CLI::IsMember({"six", "five"}));

  TableOptions pre_t;
  std::string pre_config, pre_out;
  auto* c_pre = app.add_subcommand("preprocess", "Fit preprocessing on the train split");
  add_table_options(c_pre, pre_t);
  c_pre->add_option("--config", pre_config, "Preprocess or train config JSON");
  c_pre->add_option("--out-dir", pre_out, "Output directory")->required();

  TableOptions train_t;
  std::string train_config, train_out, train_history;
  auto* c_train = app.add_subcommand("train", "Train a model artifact");
  add_table_options(c_train, train_t);
  c_train->add_option("--config", train_config, "Train config JSON");
  c_train->add_option("--out", train_out, "Artifact path")->required();
  c_train->add_option("--history", train_history, "History JSON path");

  TableOptions eval_t;
  std::string eval_model, eval_out;
  bool eval_all = false;
  auto* c_eval = app.add_subcommand("evaluate", "Evaluate an artifact");
  add_table_options(c_eval, eval_t);
  c_eval->add_option("--model", eval_model, "Artifact path")->required();
  c_eval->add_option("--out", eval_out, "Report path (default: evaluation.json next to the model)");
  c_eval->add_flag("--all", eval_all, "Evaluate every record instead of the held-out split");

  TableOptions abl_t;
  std::string abl_config, abl_out = "ablation.json";
  auto* c_abl = app.add_subcommand("ablate", "Train with and without coherence and compare");
  add_table_options(c_abl, abl_t);
  c_abl->add_option("--config", abl_config, "Train config JSON");
  c_abl->add_option("--out", abl_out, "Ablation report path");

  TableOptions sum_t;
  std::string sum_out = "summary.json";
  auto* c_sum = app.add_subcommand("summarize", "Dataset summary for the dashboard");
  add_table_options(c_sum, sum_t);
  c_sum->add_option("--out", sum_out, "Summary path");

  config::ServeOverrides serve;
  std::string serve_config;
  bool serve_reload = false;
  std::string serve_host, serve_model, serve_static, serve_reports, serve_pid;
  int serve_port = -1;
  auto* c_serve = app.add_subcommand("serve", "HTTP prediction service");
  c_serve->add_option("--model", serve_model, "Artifact path");
  c_serve->add_option("--host", serve_host, "Bind address");
  c_serve->add_option("--port", serve_port, "Port");
  c_serve->add_option("--static-dir", serve_static, "Dashboard static files");
  c_serve->add_option("--reports-dir", serve_reports, "Directory with evaluation/ablation/summary JSON");
  c_serve->add_option("--config", serve_config, "Serve config JSON");
  c_serve->add_option("--pid-file", serve_pid, "PID file");
  c_serve->add_flag("--reload", serve_reload, "Signal a running server (via --pid-file) to reload");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*c_synth) return cmd_synth(synth, out);
    if (*c_extract) return cmd_extract(extract, out);
    if (*c_pre) return cmd_preprocess(pre_t, pre_config, pre_out, out);
    if (*c_train) return cmd_train(train_t, train_config, train_out, train_history, out);
    if (*c_eval) return cmd_evaluate(eval_t, eval_model, eval_out, eval_all, out);
    if (*c_abl) return cmd_ablate(abl_t, abl_config, abl_out, out);
    if (*c_sum) return cmd_summarize(sum_t, sum_out, out);
    if (*c_serve) {
      if (!serve_host.empty()) serve.host = serve_host;
      if (serve_port >= 0) serve.port = serve_port;
      if (!serve_model.empty()) serve.model = serve_model;
      if (!serve_static.empty()) serve.static_dir = serve_static;
      if (!serve_reports.empty()) serve.reports_dir = serve_reports;
      if (!serve_pid.empty()) serve.pid_file = serve_pid;
      std::optional<fs::path> cfg_file;
      if (!serve_config.empty()) {
        require_file(serve_config, "--config");
        cfg_file = serve_config;
      }
      const auto settings = config::resolve_serve_settings(cfg_file, config::process_env(), serve);
      if (serve_reload) {
        if (settings.pid_file.empty()) throw InvalidArgument("--reload needs --pid-file");
        return service::send_reload(settings.pid_file, err);
      }
      return service::run_server(settings, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace neurospect::cli
