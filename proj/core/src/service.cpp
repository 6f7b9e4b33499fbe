#include "neurospect/service.hpp"

#include <httplib.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "neurospect/errors.hpp"

namespace neurospect::service {
namespace {

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HttpResponse json_response(const nlohmann::json& j, int status = 200) {
  return {status, j.dump(), "application/json"};
}

HttpResponse no_model() {
  return error_response(503, "model_unavailable", "no model is loaded");
}

std::optional<double> optional_number(const nlohmann::json& obj, const char* key,
                                      std::vector<std::string>& invalid) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  const auto& v = obj.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    invalid.emplace_back(std::string("demographics.") + key);
    return std::nullopt;
  }
  return v.get<double>();
}

}  // namespace

HttpResponse error_response(int status, std::string code, std::string message,
                            nlohmann::json details) {
  return json_response({{"code", std::move(code)},
                        {"message", std::move(message)},
                        {"details", std::move(details)}},
                       status);
}

ModelService::ModelService(Options opts) : opts_(std::move(opts)) {}

bool ModelService::reload() {
  if (opts_.model_path.empty()) {
    std::lock_guard lock(mu_);
    last_error_ = "no model path configured";
    return false;
  }
  try {
    auto loaded = std::make_shared<LoadedModel>();
    loaded->artifact = pipeline::load_artifact(opts_.model_path);
    loaded->version = loaded->artifact.version_id();
    loaded->path = opts_.model_path.string();
    std::lock_guard lock(mu_);
    model_ = std::move(loaded);
    last_error_.clear();
    return true;
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    last_error_ = e.what();
    return false;
  }
}

void ModelService::set_model(pipeline::ModelArtifact artifact, std::string path) {
  auto loaded = std::make_shared<LoadedModel>();
  loaded->version = artifact.version_id();
  loaded->artifact = std::move(artifact);
  loaded->path = std::move(path);
  std::lock_guard lock(mu_);
  model_ = std::move(loaded);
}

std::shared_ptr<const LoadedModel> ModelService::model() const {
  std::lock_guard lock(mu_);
  return model_;
}

std::string ModelService::last_error() const {
  std::lock_guard lock(mu_);
  return last_error_;
}

HttpResponse ModelService::health() const {
  const auto m = model();
  nlohmann::json j = {{"status", "ok"}, {"model_loaded", m != nullptr}};
  if (m) j["model_version"] = m->version;
  return json_response(j);
}

HttpResponse ModelService::model_info() const {
  const auto m = model();
  if (!m) return no_model();
  const auto& a = m->artifact;
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : a.schema.bands) bands.push_back({{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
  return json_response({{"model_version", m->version},
                        {"schema_fingerprint", a.fingerprint()},
                        {"created", a.created},
                        {"mode", dataset::mode_name(a.schema.mode)},
                        {"bands", bands},
                        {"electrodes", a.schema.electrodes},
                        {"classes", a.encoder.labels()},
                        {"include_coherence", a.config.include_coherence},
                        {"demographic_columns", a.demographic_columns},
                        {"n_features", {{"psd", a.schema.psd_count()}, {"coh", a.schema.coh_count()}}},
                        {"architecture", a.model.architecture().to_json()},
                        {"report", a.report ? a.report->to_json() : nlohmann::json(nullptr)}});
}

HttpResponse ModelService::predict(std::string_view body) const {
  const auto m = model();
  if (!m) return no_model();
  const auto& a = m->artifact;
  const auto& schema = a.schema;

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(400, "malformed_request", "request body is not valid JSON",
                          {{"parse_error", e.what()}});
  }
  if (!req.is_object()) {
    return error_response(400, "malformed_request", "request body must be a JSON object");
  }

  dataset::SubjectRecord record;
  record.id = "request";
  std::vector<std::string> invalid;
  if (req.contains("demographics") && !req.at("demographics").is_null()) {
    const auto& d = req.at("demographics");
    if (!d.is_object()) {
      return error_response(400, "malformed_request", "demographics must be an object");
    }
    record.demographics.age = optional_number(d, "age", invalid);
    record.demographics.education = optional_number(d, "education", invalid);
    record.demographics.iq = optional_number(d, "iq", invalid);
    if (d.contains("sex") && !d.at("sex").is_null()) {
      try {
        record.demographics.sex = dataset::parse_sex(d.at("sex").get<std::string>());
      } catch (const std::exception&) {
        invalid.emplace_back("demographics.sex");
      }
    }
  }

  const auto psd_names = schema.psd_names();
  const auto coh_names = schema.coh_names();
  std::vector<double> psd(psd_names.size(), 0.0);
  std::vector<double> coh;
  std::vector<std::string> missing;

  if (req.contains("features")) {
    const auto& f = req.at("features");
    if (!f.is_object()) {
      return error_response(400, "malformed_request", "features must be an object of name: value");
    }
    std::set<std::string> known(psd_names.begin(), psd_names.end());
    known.insert(coh_names.begin(), coh_names.end());
    std::vector<std::string> unknown;
    for (const auto& [key, _] : f.items()) {
      if (!known.count(key)) unknown.push_back(key);
    }
    if (!unknown.empty()) {
      return error_response(400, "unknown_features",
                            "request contains feature names outside the model schema",
                            {{"features", unknown}});
    }
    auto read = [&](const std::string& name, double& out) {
      const auto& v = f.at(name);
      if (!v.is_number() || !std::isfinite(v.get<double>())) {
        invalid.push_back(name);
      } else {
        out = v.get<double>();
      }
    };
    for (std::size_t i = 0; i < psd_names.size(); ++i) {
      if (f.contains(psd_names[i])) {
        read(psd_names[i], psd[i]);
      } else {
        missing.push_back(psd_names[i]);
      }
    }
    std::size_t coh_present = 0;
    for (const auto& n : coh_names) coh_present += f.contains(n) ? 1 : 0;
    if (coh_present > 0) {
      coh.assign(coh_names.size(), 0.0);
      for (std::size_t i = 0; i < coh_names.size(); ++i) {
        if (f.contains(coh_names[i])) {
          read(coh_names[i], coh[i]);
        } else {
          missing.push_back(coh_names[i]);
        }
      }
    }
  } else if (req.contains("vector")) {
    const auto& v = req.at("vector");
    const auto declared = req.value("schema", std::string());
    if (declared != a.fingerprint()) {
      return error_response(400, "schema_mismatch",
                            "declared schema id does not match the model's schema fingerprint",
                            {{"expected", a.fingerprint()}, {"received", declared}});
    }
    if (!v.is_array() || (v.size() != psd_names.size() &&
                          v.size() != psd_names.size() + coh_names.size())) {
      return error_response(400, "malformed_request", "feature vector has the wrong length",
                            {{"expected", {psd_names.size(), psd_names.size() + coh_names.size()}},
                             {"received", v.is_array() ? v.size() : 0}});
    }
    const auto names = schema.feature_names();
    std::vector<double> values(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        invalid.push_back(names[i]);
      } else {
        values[i] = v[i].get<double>();
      }
    }
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(psd.size()), psd.begin());
    if (v.size() > psd.size()) coh.assign(values.begin() + static_cast<std::ptrdiff_t>(psd.size()), values.end());
  } else {
    return error_response(400, "malformed_request", "request needs 'features' or 'vector'");
  }

  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    return error_response(400, "missing_features",
                          "missing features: " + list + (missing.size() > 10 ? ", ..." : ""),
                          {{"missing", missing}});
  }
  if (!invalid.empty()) {
    return error_response(400, "invalid_values", "non-finite or non-numeric values",
                          {{"features", invalid}});
  }
  try {
    record.demographics.validate();
  } catch (const DataError& e) {
    return error_response(400, "invalid_values", e.what());
  }

  record.psd.n_bands = schema.bands.size();
  record.psd.n_channels = schema.electrodes.size();
  record.psd.values = std::move(psd);
  if (!coh.empty()) {
    spectral::CoherenceTensor t;
    t.n_bands = schema.bands.size();
    t.n_channels = schema.electrodes.size();
    t.values = std::move(coh);
    record.coherence = std::move(t);
  }

  try {
    const auto p = a.predict(record);
    nlohmann::json probs = nlohmann::json::object();
    for (std::size_t c = 0; c < p.probabilities.size(); ++c) {
      probs[a.encoder.decode(static_cast<int>(c))] = p.probabilities[c];
    }
    return json_response({{"label", p.label},
                          {"code", p.code},
                          {"probabilities", probs},
                          {"model_version", m->version},
                          {"schema_fingerprint", a.fingerprint()},
                          {"coherence_ablated", p.coherence_ablated}});
  } catch (const Error& e) {
    return error_response(400, "prediction_failed", e.what());
  }
}

HttpResponse ModelService::metrics_latest() const {
  namespace fs = std::filesystem;
  std::optional<fs::path> best;
  fs::file_time_type best_time;
  for (const char* name : {"evaluation.json", "ablation.json"}) {
    const auto path = opts_.reports_dir / name;
    std::error_code ec;
    const auto t = fs::last_write_time(path, ec);
    if (ec) continue;
    if (!best || t >= best_time) {
      best = path;
      best_time = t;
    }
  }
  if (best) {
    if (auto text = read_file(*best)) return {200, std::move(*text), "application/json"};
  }
  return error_response(404, "not_found", "no evaluation report has been written",
                        {{"reports_dir", opts_.reports_dir.string()}});
}

HttpResponse ModelService::dataset_summary() const {
  if (auto text = read_file(opts_.reports_dir / "summary.json")) {
    return {200, std::move(*text), "application/json"};
  }
  return error_response(404, "not_found", "no dataset summary has been written",
                        {{"reports_dir", opts_.reports_dir.string()}});
}

struct HttpServer::Impl {
  httplib::Server server;
  ModelService* service = nullptr;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(ModelService& service, std::string static_dir)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  auto& svr = impl_->server;
  auto* s = &service;
  svr.Get("/health", [s](const httplib::Request&, httplib::Response& res) { send(res, s->health()); });
  svr.Get("/model", [s](const httplib::Request&, httplib::Response& res) { send(res, s->model_info()); });
  svr.Post("/predict", [s](const httplib::Request& req, httplib::Response& res) {
    send(res, s->predict(req.body));
  });
  svr.Get("/metrics/latest", [s](const httplib::Request&, httplib::Response& res) {
    send(res, s->metrics_latest());
  });
  svr.Get("/dataset/summary", [s](const httplib::Request&, httplib::Response& res) {
    send(res, s->dataset_summary());
  });
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
    svr.set_mount_point("/", static_dir);
  }
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const auto r = error_response(res.status, res.status == 404 ? "not_found" : "http_error",
                                  "request failed", {{"path", req.path}});
    res.set_content(r.body, r.content_type);
    return httplib::Server::HandlerResponse::Handled;
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_response(500, "internal_error", what));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p <= 0) throw InvalidArgument("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw InvalidArgument("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

namespace {

volatile std::sig_atomic_t g_reload = 0;
volatile std::sig_atomic_t g_stop = 0;

extern "C" void on_hup(int) { g_reload = 1; }
extern "C" void on_term(int) { g_stop = 1; }

}  // namespace

int run_server(const config::ServeSettings& settings, std::ostream& log) {
  ModelService::Options opts;
  opts.model_path = settings.model;
  opts.reports_dir = settings.reports_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(settings.reports_dir);
  ModelService service(opts);
  if (!settings.model.empty()) {
    if (service.reload()) {
      log << "loaded model " << settings.model << " (" << service.model()->version << ")\n";
    } else {
      log << "warning: model not loaded: " << service.last_error() << "\n";
    }
  } else {
    log << "warning: no model configured; /predict will answer 503\n";
  }

  HttpServer server(service, settings.static_dir);
  int port = 0;
  try {
    port = server.bind(settings.host, settings.port);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
  if (!settings.pid_file.empty()) {
    std::ofstream pid(settings.pid_file);
    pid << ::getpid() << "\n";
  }
  log << "listening on http://" << settings.host << ":" << port << "\n" << std::flush;

  g_reload = 0;
  g_stop = 0;
  std::signal(SIGHUP, on_hup);
  std::signal(SIGINT, on_term);
  std::signal(SIGTERM, on_term);
  std::atomic<bool> done{false};
  std::jthread watcher([&] {
    while (!done.load()) {
      if (g_reload) {
        g_reload = 0;
        if (service.reload()) {
          log << "reloaded model (" << service.model()->version << ")\n" << std::flush;
        } else {
          log << "reload failed, keeping previous model: " << service.last_error() << "\n"
              << std::flush;
        }
      }
      if (g_stop) {
        server.stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  server.listen();
  done = true;
  watcher.join();
  std::signal(SIGHUP, SIG_DFL);
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
  if (!settings.pid_file.empty()) std::filesystem::remove(settings.pid_file);
  return 0;
}

int send_reload(const std::filesystem::path& pid_file, std::ostream& err) {
  std::ifstream in(pid_file);
  long pid = 0;
  if (!in || !(in >> pid) || pid <= 0) {
    err << "error: cannot read a pid from '" << pid_file.string() << "'\n";
    return 1;
  }
  if (::kill(static_cast<pid_t>(pid), SIGHUP) != 0) {
    err << "error: cannot signal process " << pid << "\n";
    return 1;
  }
  return 0;
}

}  // namespace neurospect::service
