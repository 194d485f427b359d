#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/dataset.hpp"
#include "multisql/pipeline.hpp"
#include "multisql/schema.hpp"
#include "multisql/schema_filter.hpp"
#include "multisql/sql_exec.hpp"
#include "multisql/sql_refs.hpp"

namespace multisql {

enum class ExVerdict { kCorrect, kWrong, kPredError, kGoldError };

std::string_view ex_verdict_name(ExVerdict verdict);

// Errors mean syntax, runtime or timeout failures; anomalous results still
// take part in the comparison.
ExVerdict score_ex(const ExecutionOutcome& pred, const ExecutionOutcome& gold,
                   EquivalenceMode mode = EquivalenceMode::kSet);
ExVerdict score_ex(std::string_view pred, std::string_view gold, const std::filesystem::path& db_file,
                   EquivalenceMode mode = EquivalenceMode::kSet, std::int64_t timeout_ms = kDefaultTimeoutMs);

struct GoldAnnotation {
  ColumnSet columns;
  std::vector<ValueOccurrence> values;
};

// Columns and compared string literals of a gold query, by identifier scan.
GoldAnnotation annotate_gold(std::string_view gold_sql, const SchemaDoc& doc);

struct SchemaMetrics {
  double precision = 0.0;
  double column_recall = 0.0;
  std::optional<double> value_recall;  // unset when the gold query compares no string literal
  std::size_t subset_size = 0;
};

// Precision and recall of `subset` against the gold columns. A gold value
// counts as recalled when its column is in the subset and value retrieval
// returned the literal for that column (case-insensitive).
SchemaMetrics schema_metrics(const ColumnSet& subset, const GoldAnnotation& gold,
                             const std::vector<RetrievedValue>& retrieved);

// ---- contribution -------------------------------------------------------

struct ContributionRecord {
  std::string chosen_generator;
  bool unanimous = false;
  std::vector<std::pair<std::string, bool>> candidates;  // generator, correct
};

struct GeneratorContribution {
  std::size_t candidates = 0;
  std::size_t correct = 0;
  double avg_ex = 0.0;
  std::size_t chosen_contested = 0;
  std::optional<double> cr;  // unset when no item was contested
};

struct ContributionReport {
  std::map<std::string, GeneratorContribution> generators;
  std::size_t unanimous_items = 0;
  std::size_t contested_items = 0;
  double unanimous_share = 0.0;

  nlohmann::json to_json() const;
};

ContributionReport contribution_report(const std::vector<ContributionRecord>& records);

// ---- full evaluation ----------------------------------------------------

struct EvalOptions {
  EquivalenceMode mode = EquivalenceMode::kSet;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
  std::size_t workers = 4;  // items in flight; scripted backends force one
  bool timings = false;
};

struct ItemResult {
  BenchItem item;
  ExVerdict verdict = ExVerdict::kPredError;
  std::string pred_sql;
  std::string chosen_generator;
  std::string branch;
  std::vector<SchemaMetrics> schema;  // per subset
  std::size_t refine_triggers = 0;
  bool selector_fallback = false;
  bool retrieved_fallback = false;
  std::string error;  // pipeline failure, if any
  ContributionRecord contribution;
  nlohmann::json transcript;

  nlohmann::json to_json() const;
};

struct SubsetAverages {
  double precision = 0.0;
  double column_recall = 0.0;
  std::optional<double> value_recall;
  std::size_t items = 0;
};

struct EvalReport {
  std::size_t items = 0;
  std::size_t scored = 0;
  std::size_t correct = 0;
  std::size_t wrong = 0;
  std::size_t pred_errors = 0;
  std::size_t gold_errors = 0;
  std::size_t pipeline_failures = 0;
  std::size_t refine_triggers = 0;
  std::size_t selector_fallbacks = 0;
  std::size_t retrieved_fallbacks = 0;
  double ex = 0.0;
  std::vector<SubsetAverages> subsets;
  ContributionReport contribution;
  std::vector<ItemResult> results;

  nlohmann::json to_json() const;  // summary, without per-item records
  std::string summary_table() const;
};

// Deterministic fold over results in item order.
EvalReport aggregate(std::vector<ItemResult> results);

EvalReport evaluate(const Pipeline& pipeline, const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                    const EvalOptions& options);

}  // namespace multisql
