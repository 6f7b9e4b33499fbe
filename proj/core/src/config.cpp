#include "neurospect/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

#include "neurospect/errors.hpp"

namespace neurospect::config {
namespace {

int parse_port(const std::string& text, const std::string& source) {
  int port = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), port);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || port < 0 || port > 65535) {
    throw InvalidArgument(source + ": invalid port '" + text + "'");
  }
  return port;
}

}  // namespace

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config parse error in '" + path.string() + "': " + e.what());
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

ServeSettings resolve_serve_settings(const std::optional<std::filesystem::path>& config_file,
                                     const EnvLookup& env, const ServeOverrides& cli) {
  ServeSettings s;
  if (config_file) {
    const auto j = read_json_file(*config_file);
    if (!j.is_object()) throw InvalidArgument("serve config must be a JSON object");
    static const std::set<std::string> kKeys = {"host",       "port",        "model",
                                                "static_dir", "reports_dir", "pid_file"};
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.count(key)) throw InvalidArgument("unknown serve config key '" + key + "'");
    }
    try {
      s.host = j.value("host", s.host);
      s.port = j.value("port", s.port);
      s.model = j.value("model", s.model);
      s.static_dir = j.value("static_dir", s.static_dir);
      s.reports_dir = j.value("reports_dir", s.reports_dir);
      s.pid_file = j.value("pid_file", s.pid_file);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("config parse error: ") + e.what());
    }
    if (s.port < 0 || s.port > 65535) throw InvalidArgument("config file: invalid port");
  }
  if (env) {
    if (auto v = env("NEUROSPECT_PORT")) s.port = parse_port(*v, "NEUROSPECT_PORT");
    if (auto v = env("NEUROSPECT_MODEL")) s.model = *v;
    if (auto v = env("NEUROSPECT_STATIC_DIR")) s.static_dir = *v;
  }
  if (cli.host) s.host = *cli.host;
  if (cli.port) {
    if (*cli.port < 0 || *cli.port > 65535) throw InvalidArgument("invalid --port");
    s.port = *cli.port;
  }
  if (cli.model) s.model = *cli.model;
  if (cli.static_dir) s.static_dir = *cli.static_dir;
  if (cli.reports_dir) s.reports_dir = *cli.reports_dir;
  if (cli.pid_file) s.pid_file = *cli.pid_file;
  if (s.reports_dir.empty() && !s.model.empty()) {
    const auto parent = std::filesystem::path(s.model).parent_path();
    s.reports_dir = parent.empty() ? "." : parent.string();
  }
  return s;
}

}  // namespace neurospect::config
