#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/generation.hpp"
#include "multisql/lsh.hpp"
#include "multisql/prompts.hpp"
#include "multisql/schema.hpp"
#include "multisql/schema_filter.hpp"
#include "multisql/selection.hpp"
#include "multisql/sql_exec.hpp"

namespace multisql {

struct PipelineSettings {
  int schema_iterations = 2;  // number of schema subsets produced by column selection
  RetrievalConfig retrieval;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
  EquivalenceMode mode = EquivalenceMode::kSet;
  SelectorPolicy policy = SelectorPolicy::kModel;
  std::size_t workers = 4;
};

struct GenerationRun {
  SchemaFilterReport link;
  std::vector<CandidateSql> candidates;
};

// Selection results point into `candidates`; moving keeps them valid,
// copying would not.
struct AskRun {
  SchemaFilterReport link;
  std::vector<CandidateSql> candidates;
  SelectionResult selection;
  std::string chosen_sql;

  AskRun() = default;
  AskRun(AskRun&&) = default;
  AskRun& operator=(AskRun&&) = default;
  AskRun(const AskRun&) = delete;
  AskRun& operator=(const AskRun&) = delete;
};

class Pipeline {
 public:
  Pipeline(std::shared_ptr<const BackendRegistry> backends, std::shared_ptr<const PromptLibrary> prompts,
           std::vector<GeneratorBinding> bindings, PipelineSettings settings, SubwordTokenizer tokenizer = {});

  // Keywords, column scoring, value retrieval, retrieved schema, then
  // iterative column selection. An empty retrieved schema widens to the
  // full schema.
  SchemaFilterReport link(const SchemaDocPtr& doc, const std::filesystem::path& db_file,
                          const std::string& question, const std::string& evidence) const;

  GenerationRun generate(const SchemaDocPtr& doc, const std::filesystem::path& db_file, const std::string& question,
                         const std::string& evidence) const;

  // Candidates for already-linked subsets.
  std::vector<CandidateSql> candidates_for(const std::filesystem::path& db_file, const std::string& question,
                                           const std::string& evidence,
                                           const std::vector<SchemaSubset>& subsets) const;

  AskRun ask(const SchemaDocPtr& doc, const std::filesystem::path& db_file, const std::string& question,
             const std::string& evidence) const;

  const PipelineSettings& settings() const { return settings_; }
  const std::vector<GeneratorBinding>& bindings() const { return bindings_; }
  const BackendRegistry& backends() const { return *backends_; }
  const PromptLibrary& prompts() const { return *prompts_; }

 private:
  std::shared_ptr<const BackendRegistry> backends_;
  std::shared_ptr<const PromptLibrary> prompts_;
  std::vector<GeneratorBinding> bindings_;
  PipelineSettings settings_;
  SubwordTokenizer tokenizer_;
};

// Transcript records. Timings are left out unless asked for so that runs
// with identical inputs serialize to identical bytes.
nlohmann::json link_transcript(const SchemaFilterReport& report, const PipelineSettings& settings);
nlohmann::json generation_transcript(const GenerationRun& run, const PipelineSettings& settings, bool timings);
nlohmann::json ask_transcript(const AskRun& run, const PipelineSettings& settings, bool timings);

}  // namespace multisql
