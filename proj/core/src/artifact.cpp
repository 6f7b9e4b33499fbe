#include <openssl/evp.h>
#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "neurospect/errors.hpp"
#include "neurospect/pipeline.hpp"

namespace neurospect::pipeline {
namespace {

std::string crc32_hex(std::string_view text) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

std::string base64_encode_floats(std::span<const float> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto v = to_little(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(bytes.data() + i * 4, &v, 4);
  }
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<float> base64_decode_floats(std::string_view text) {
  if (text.size() % 4 != 0) throw IntegrityError("base64 tensor length is not a multiple of 4");
  std::string bytes(3 * (text.size() / 4) + 1, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(bytes.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw IntegrityError("invalid base64 tensor data");
  std::size_t len = static_cast<std::size_t>(n);
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  if (len % 4 != 0) throw IntegrityError("tensor byte length is not a multiple of 4");
  std::vector<float> out(len / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v = 0;
    std::memcpy(&v, bytes.data() + i * 4, 4);
    out[i] = std::bit_cast<float>(to_little(v));
  }
  return out;
}

nlohmann::json ModelArtifact::payload() const {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.params()) {
    params.push_back({{"weight", base64_encode_floats(p.weight)},
                      {"bias", base64_encode_floats(p.bias)}});
  }
  return {{"schema", schema.to_json()},
          {"demographic_columns", demographic_columns},
          {"architecture", model.architecture().to_json()},
          {"parameters", params},
          {"transform", transform.to_json()},
          {"encoder", encoder.to_json()},
          {"train_config", config.to_json()},
          {"test_ids", test_ids},
          {"report", report ? report->to_json() : nlohmann::json(nullptr)}};
}

ModelArtifact ModelArtifact::from_payload(const nlohmann::json& j) {
  ModelArtifact a;
  a.schema = dataset::FeatureSchema::from_json(j.at("schema"));
  a.demographic_columns = j.at("demographic_columns").get<std::vector<std::string>>();
  auto arch = nn::Architecture::from_json(j.at("architecture"));
  std::vector<nn::LayerParams<float>> params;
  for (const auto& p : j.at("parameters")) {
    params.push_back({base64_decode_floats(p.at("weight").get<std::string>()),
                      base64_decode_floats(p.at("bias").get<std::string>())});
  }
  a.model = nn::Model<float>(std::move(arch), std::move(params));
  a.transform = dataset::FeatureTransform::from_json(j.at("transform"));
  a.encoder = preprocess::EncoderMap::from_json(j.at("encoder"));
  a.config = TrainConfig::from_json(j.at("train_config"));
  a.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  if (!j.at("report").is_null()) a.report = metrics::EvaluationReport::from_json(j.at("report"));
  if (a.transform.schema().fingerprint() != a.schema.fingerprint()) {
    throw IntegrityError("artifact transform schema disagrees with the artifact schema");
  }
  if (a.model.architecture().n_classes() != a.encoder.size()) {
    throw IntegrityError("artifact encoder and model disagree on the class count");
  }
  return a;
}

std::string ModelArtifact::version_id() const { return crc32_hex(payload().dump()); }

std::string serialize_artifact(const ModelArtifact& artifact) {
  const auto payload = artifact.payload();
  const nlohmann::json envelope = {{"format_version", ModelArtifact::kFormatVersion},
                                   {"created", artifact.created},
                                   {"schema_fingerprint", artifact.fingerprint()},
                                   {"payload", payload},
                                   {"checksum", crc32_hex(payload.dump())}};
  return envelope.dump();
}

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path) {
  const auto text = serialize_artifact(artifact);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write '" + tmp + "'");
    out << text;
    if (!out) throw InvalidArgument("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

ModelArtifact deserialize_artifact(std::string_view text) {
  nlohmann::json env;
  try {
    env = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(std::string("artifact is not valid JSON: ") + e.what());
  }
  try {
    const int version = env.at("format_version").get<int>();
    if (version != ModelArtifact::kFormatVersion) {
      throw IntegrityError("unsupported artifact format version " + std::to_string(version) +
                           " (expected " + std::to_string(ModelArtifact::kFormatVersion) + ")");
    }
    const auto& payload = env.at("payload");
    if (crc32_hex(payload.dump()) != env.at("checksum").get<std::string>()) {
      throw IntegrityError("artifact checksum mismatch: payload is corrupt or was modified");
    }
    const auto stored = env.at("schema_fingerprint").get<std::string>();
    if (dataset::FeatureSchema::from_json(payload.at("schema")).fingerprint() != stored) {
      throw IntegrityError("artifact schema fingerprint mismatch");
    }
    auto a = ModelArtifact::from_payload(payload);
    a.created = env.at("created").get<std::string>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed artifact: ") + e.what());
  }
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open artifact '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_artifact(ss.str());
}

}  // namespace neurospect::pipeline
