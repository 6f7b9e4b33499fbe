#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace neurospect::config {

/// Reads a JSON document; throws InvalidArgument naming the file on a missing
/// file or a parse error.
nlohmann::json read_json_file(const std::filesystem::path& path);

struct ServeSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model;
  std::string static_dir;
  /// Directory holding evaluation.json / ablation.json / summary.json.
  /// Defaults to the model's directory.
  std::string reports_dir;
  std::string pid_file;
};

struct ServeOverrides {
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> model;
  std::optional<std::string> static_dir;
  std::optional<std::string> reports_dir;
  std::optional<std::string> pid_file;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the real process environment.
EnvLookup process_env();

/// Precedence: CLI overrides > NEUROSPECT_PORT / NEUROSPECT_MODEL /
/// NEUROSPECT_STATIC_DIR > config file > defaults.
ServeSettings resolve_serve_settings(const std::optional<std::filesystem::path>& config_file,
                                     const EnvLookup& env, const ServeOverrides& cli);

}  // namespace neurospect::config
