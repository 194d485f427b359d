#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/prompts.hpp"
#include "multisql/schema.hpp"
#include "multisql/sql_exec.hpp"

namespace multisql {

// Nearest-neighbour demonstration store for in-context-learning generators.
class DemonstrationPool {
 public:
  struct Demo {
    std::string question;
    std::string evidence;
    std::string sql;
  };

  DemonstrationPool(std::vector<Demo> demos, std::shared_ptr<EmbeddingBackend> embedder);

  // The `shots` demos whose questions are most cosine-similar to `question`,
  // most similar first; ties keep pool order.
  std::vector<Demo> nearest(const std::string& question, std::size_t shots) const;
  std::string render(const std::string& question, std::size_t shots) const;
  std::size_t size() const { return demos_.size(); }

 private:
  std::vector<Demo> demos_;
  std::vector<EmbeddingVector> vectors_;
  std::shared_ptr<EmbeddingBackend> embedder_;
};

struct GeneratorBinding {
  std::string generator_id;
  std::string backend_role;
  std::string prompt_template_id;
  int rank = 1;  // 1 = best evaluated generator
  std::string refine_template_id = "self_refine.v1";
  double temperature = kGeneratorTemperature;
  std::shared_ptr<const DemonstrationPool> demonstrations;
  std::size_t shots = 5;
};

// Throws Error(kConfigInvalid) unless ranks are a permutation of 1..n and ids
// are unique.
void validate_bindings(const std::vector<GeneratorBinding>& bindings);

enum class GenerationFailure { kNone, kBackend, kExtraction };

std::string_view generation_failure_name(GenerationFailure failure);

struct CandidateSql {
  std::string sql;
  std::string generator_id;
  int schema_index = 1;
  bool refined = false;
  ExecutionOutcome outcome;
  int backend_calls = 0;
  GenerationFailure failure = GenerationFailure::kNone;
  std::string initial_sql;  // first attempt, when refined

  // Fields needed to rebuild the candidate; rows included, timing excluded
  // unless asked for so dumps stay byte-identical across runs.
  nlohmann::json to_json(bool with_timing = false) const;
  static CandidateSql from_json(const nlohmann::json& j);
};

// Last fenced code block, else the first statement starting with SELECT or
// WITH, else the whole reply; then cut at the first top-level semicolon.
// Throws Error(kExtractionFailure) when nothing remains.
std::string extract_sql(const std::string& reply);

struct GenerationContext {
  const BackendRegistry* backends = nullptr;
  const PromptLibrary* prompts = nullptr;
  std::filesystem::path db_file;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
};

// One candidate with at most one self-refine retry.
CandidateSql generate_one(const GenerationContext& ctx, const GeneratorBinding& binding, const std::string& question,
                          const std::string& evidence, const SchemaSubset& schema);

// |schemas| x |bindings| candidates, schema-major then generator rank. Tasks
// bound to the same scripted backend run serially in that order; the rest
// run on up to `workers` threads.
std::vector<CandidateSql> generate_all(const GenerationContext& ctx, std::vector<GeneratorBinding> bindings,
                                       const std::string& question, const std::string& evidence,
                                       const std::vector<SchemaSubset>& schemas, std::size_t workers = 4);

}  // namespace multisql
