#include "multisql/pipeline.hpp"

#include "multisql/error.hpp"

namespace multisql {

using nlohmann::json;

Pipeline::Pipeline(std::shared_ptr<const BackendRegistry> backends, std::shared_ptr<const PromptLibrary> prompts,
                   std::vector<GeneratorBinding> bindings, PipelineSettings settings, SubwordTokenizer tokenizer)
    : backends_(std::move(backends)),
      prompts_(std::move(prompts)),
      bindings_(std::move(bindings)),
      settings_(std::move(settings)),
      tokenizer_(std::move(tokenizer)) {
  if (!backends_ || !prompts_) throw Error(ErrorCode::kInvalidArgument, "pipeline needs backends and prompts");
  if (settings_.schema_iterations < 1) throw Error(ErrorCode::kConfigInvalid, "schema iterations must be >= 1");
  validate_bindings(bindings_);
}

SchemaFilterReport Pipeline::link(const SchemaDocPtr& doc, const std::filesystem::path& db_file,
                                  const std::string& question, const std::string& evidence) const {
  SchemaFilterReport report;
  report.keywords = extract_keywords(*backends_, *prompts_, question, evidence);
  auto& embedder = backends_->embedder();
  report.scored = score_columns(report.keywords, *doc, embedder);
  report.values = retrieve_values(report.keywords, db_file, *doc, settings_.retrieval, embedder, tokenizer_);
  report.retrieved = build_retrieved_schema(report.scored, report.values, *doc, settings_.retrieval.top_k_columns);
  if (report.retrieved.empty()) {
    const auto all = doc->all_columns();
    report.retrieved.insert(all.begin(), all.end());
    report.retrieved_fallback_to_full = true;
  }
  report.selection = select_columns(*backends_, *prompts_, doc, report.retrieved, question, evidence,
                                    settings_.schema_iterations);
  return report;
}

std::vector<CandidateSql> Pipeline::candidates_for(const std::filesystem::path& db_file, const std::string& question,
                                                   const std::string& evidence,
                                                   const std::vector<SchemaSubset>& subsets) const {
  GenerationContext ctx{backends_.get(), prompts_.get(), db_file, settings_.timeout_ms};
  return generate_all(ctx, bindings_, question, evidence, subsets, settings_.workers);
}

GenerationRun Pipeline::generate(const SchemaDocPtr& doc, const std::filesystem::path& db_file,
                                 const std::string& question, const std::string& evidence) const {
  GenerationRun run;
  run.link = link(doc, db_file, question, evidence);
  run.candidates = candidates_for(db_file, question, evidence, run.link.selection.subsets);
  return run;
}

AskRun Pipeline::ask(const SchemaDocPtr& doc, const std::filesystem::path& db_file, const std::string& question,
                     const std::string& evidence) const {
  AskRun run;
  run.link = link(doc, db_file, question, evidence);
  run.candidates = candidates_for(db_file, question, evidence, run.link.selection.subsets);
  SelectionContext ctx{backends_.get(), prompts_.get(), settings_.mode, settings_.policy};
  run.selection = select_final(ctx, run.candidates, run.link.selection.subsets, question, evidence, ranks_of(bindings_));
  run.chosen_sql = run.candidates[run.selection.chosen].sql;
  return run;
}

json link_transcript(const SchemaFilterReport& report, const PipelineSettings& settings) {
  return report.to_json(settings.retrieval.top_k_columns);
}

json generation_transcript(const GenerationRun& run, const PipelineSettings& settings, bool timings) {
  json candidates = json::array();
  for (const auto& c : run.candidates) candidates.push_back(c.to_json(timings));
  return {{"link", link_transcript(run.link, settings)}, {"candidates", std::move(candidates)}};
}

json ask_transcript(const AskRun& run, const PipelineSettings& settings, bool timings) {
  json candidates = json::array();
  for (const auto& c : run.candidates) candidates.push_back(c.to_json(timings));
  return {{"link", link_transcript(run.link, settings)},
          {"candidates", std::move(candidates)},
          {"selection", run.selection.to_json(run.candidates)},
          {"chosen_sql", run.chosen_sql}};
}

}  // namespace multisql
