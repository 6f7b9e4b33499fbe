#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "neurospect/config.hpp"
#include "neurospect/pipeline.hpp"

namespace neurospect::service {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// {"code", "message", "details"} body with the given status.
HttpResponse error_response(int status, std::string code, std::string message,
                            nlohmann::json details = nlohmann::json::object());

struct LoadedModel {
  pipeline::ModelArtifact artifact;
  std::string version;
  std::string path;
};

/// Request handling independent of the HTTP transport. The served model is
/// immutable; reload swaps the shared pointer under a mutex so in-flight
/// requests finish against the model they started with.
class ModelService {
 public:
  struct Options {
    std::filesystem::path model_path;
    std::filesystem::path reports_dir;
  };

  explicit ModelService(Options opts);

  /// Loads model_path. On failure the current model stays in place and the
  /// error is kept in last_error().
  bool reload();
  void set_model(pipeline::ModelArtifact artifact, std::string path = {});
  std::shared_ptr<const LoadedModel> model() const;
  std::string last_error() const;

  HttpResponse health() const;
  HttpResponse model_info() const;
  HttpResponse predict(std::string_view body) const;
  /// Newest of evaluation.json / ablation.json in the reports directory,
  /// passed through unchanged.
  HttpResponse metrics_latest() const;
  HttpResponse dataset_summary() const;

 private:
  Options opts_;
  mutable std::mutex mu_;
  std::shared_ptr<const LoadedModel> model_;
  std::string last_error_;
};

/// httplib server bound to a ModelService, with an optional static mount.
class HttpServer {
 public:
  HttpServer(ModelService& service, std::string static_dir);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking serve loop: writes the pid file, reloads the model on SIGHUP,
/// stops on SIGINT / SIGTERM. Returns a process exit code.
int run_server(const config::ServeSettings& settings, std::ostream& log);

/// Sends SIGHUP to the pid recorded in pid_file.
int send_reload(const std::filesystem::path& pid_file, std::ostream& err);

}  // namespace neurospect::service
