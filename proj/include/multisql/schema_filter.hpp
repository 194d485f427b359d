#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/lsh.hpp"
#include "multisql/prompts.hpp"
#include "multisql/schema.hpp"

namespace multisql {

struct KeywordSet {
  std::vector<std::string> keywords;
  std::string source_question;
  std::string source_evidence;
  bool used_fallback = false;
};

struct ScoredColumn {
  ColumnRef ref;
  std::string keyword;
  double score = 0.0;
};

struct RetrievedValue {
  ColumnRef column;
  std::string keyword;
  std::string value_text;
  std::size_t edit_distance = 0;
  double cosine = 0.0;
};

struct RetrievalConfig {
  std::size_t top_k_columns = 5;
  std::size_t top_k_values = 5;
  double value_threshold = 0.60;
  bool lsh_enabled = true;
  LshShape lsh_shape{};
  std::size_t min_distance_cap = 8;
};

// Trims, drops empties and case-insensitive duplicates, keeps first spelling.
std::vector<std::string> dedupe_keywords(const std::vector<std::string>& raw);

// Asks the schema role for keywords; an empty or unparseable reply falls
// back to the content words of the question and evidence. Backend errors
// propagate.
KeywordSet extract_keywords(const BackendRegistry& backends, const PromptLibrary& prompts,
                            const std::string& question, const std::string& evidence);

// Score(k, c) = cos(V[Q||E], V[table(c)]) * cos(V[k], V[c]) from precomputed
// vectors. `column_vectors` follows doc.all_columns() order; `table_vectors`
// follows doc.tables() order.
std::vector<ScoredColumn> score_columns_from_vectors(const SchemaDoc& doc,
                                                     const std::vector<std::string>& keywords,
                                                     const EmbeddingVector& question_vector,
                                                     const std::vector<EmbeddingVector>& table_vectors,
                                                     const std::vector<EmbeddingVector>& column_vectors,
                                                     const std::vector<EmbeddingVector>& keyword_vectors);

// Embeds everything through `embedder`, then scores every (keyword, column)
// pair. Output: keyword order, then score descending, then document order.
std::vector<ScoredColumn> score_columns(const KeywordSet& keywords, const SchemaDoc& doc,
                                        EmbeddingBackend& embedder);

struct EditMatch {
  std::string value;
  std::size_t distance = 0;
};

std::size_t distance_cap(std::string_view keyword, std::size_t min_cap = 8);

// Top-k values by case-insensitive Levenshtein distance to `keyword`
// (ties broken lexicographically), ignoring distances above `cap`.
std::vector<EditMatch> top_k_by_edit_distance(std::string_view keyword, const std::vector<std::string>& values,
                                              std::size_t k, std::size_t cap);

// Token set used for the LSH prefilter: the text plus the column metadata.
std::set<std::string> lsh_tokens(const SubwordTokenizer& tokenizer, std::string_view text,
                                 const ColumnRef& column);

// Value retrieval for one column's distinct values; exposed for tests.
std::vector<RetrievedValue> retrieve_column_values(const std::string& keyword, const ColumnRef& column,
                                                   const std::vector<std::string>& values,
                                                   const RetrievalConfig& config, EmbeddingBackend& embedder,
                                                   const SubwordTokenizer& tokenizer, const MinHashLsh& lsh);

// True for TEXT/CHAR/VARCHAR/CLOB-like declared types.
bool is_text_type(std::string_view data_type);

std::vector<std::string> distinct_text_values(const std::filesystem::path& db_file, const ColumnRef& column);

// Runs retrieve_column_values for every keyword x text column.
std::vector<RetrievedValue> retrieve_values(const KeywordSet& keywords, const std::filesystem::path& db_file,
                                            const SchemaDoc& doc, const RetrievalConfig& config,
                                            EmbeddingBackend& embedder, const SubwordTokenizer& tokenizer = {});

// Union of every keyword's top-k columns and every value-hit column, plus the
// key closure of that union.
ColumnSet build_retrieved_schema(const std::vector<ScoredColumn>& scored, const std::vector<RetrievedValue>& values,
                                 const SchemaDoc& doc, std::size_t top_k_columns);

// Column names found in a model reply, restricted to `allowed`.
ColumnSet parse_column_selection(const std::string& reply, const SchemaDoc& doc, const ColumnSet& allowed);

struct SelectionIteration {
  ColumnSet selected;  // S^slct_i after intersecting with the remaining pool
  ColumnSet keys;      // P_i
  bool unparseable = false;
  std::string reply;
};

struct ColumnSelectionResult {
  std::vector<SchemaSubset> subsets;
  std::vector<SelectionIteration> iterations;
};

// Iterative column selection. Each iteration asks the schema role to pick
// from the remaining pool, unions the pick and its key closure with all
// previous subsets, then removes the non-key picks from the pool.
ColumnSelectionResult select_columns(const BackendRegistry& backends, const PromptLibrary& prompts,
                                     const SchemaDocPtr& doc, const ColumnSet& retrieved,
                                     const std::string& question, const std::string& evidence, int iterations);

struct SchemaFilterReport {
  KeywordSet keywords;
  std::vector<ScoredColumn> scored;
  std::vector<RetrievedValue> values;
  ColumnSet retrieved;
  ColumnSelectionResult selection;
  bool retrieved_fallback_to_full = false;

  nlohmann::json to_json(std::size_t top_k_columns) const;
};

}  // namespace multisql
