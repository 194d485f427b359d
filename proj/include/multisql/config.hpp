#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/dataset.hpp"
#include "multisql/pipeline.hpp"

namespace multisql {

inline constexpr const char* kConfigEnvVar = "MULTISQL_CONFIG";

struct BackendSpec {
  std::string type;  // "mock" or "http"
  std::filesystem::path script;
  HttpEndpoint endpoint;
};

struct EmbeddingSpec {
  std::string type = "hashed";  // "hashed" or "http"
  std::size_t dimension = HashedNgramEmbedder::kDefaultDimension;
  HttpEndpoint endpoint;
};

struct GeneratorSpec {
  std::string id;
  std::string backend;
  std::string template_id;
  int rank = 1;
  double temperature = kGeneratorTemperature;
  std::filesystem::path demonstrations;  // BIRD-format file, ICL generators only
  std::size_t shots = 5;
};

// Parsed configuration file. Relative paths are resolved against the
// directory holding the file.
struct PipelineConfig {
  std::map<std::string, BackendSpec> backends;
  std::map<std::string, std::string> roles;  // role id -> backend name
  EmbeddingSpec embedding;
  std::vector<GeneratorSpec> generators;
  PipelineSettings settings;
  std::filesystem::path vocabulary;
  std::map<std::string, std::filesystem::path> templates;
  std::size_t sample_cap = kDefaultSampleCap;
  std::uint64_t seed = 0;

  // Throws Error(kConfigInvalid).
  static PipelineConfig parse(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
};

// The --config value if given, else $MULTISQL_CONFIG. Throws
// Error(kConfigInvalid) when neither is set.
std::filesystem::path locate_config(const std::optional<std::string>& flag);

// Live objects built from a config.
struct Runtime {
  std::shared_ptr<BackendRegistry> backends;
  std::shared_ptr<PromptLibrary> prompts;
  std::unique_ptr<Pipeline> pipeline;
  std::map<std::string, std::shared_ptr<ChatBackend>> named_backends;
};

Runtime build_runtime(const PipelineConfig& config);

// Role id under which a generator's backend is registered.
std::string generator_role(const std::string& generator_id);

}  // namespace multisql
