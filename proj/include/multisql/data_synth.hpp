#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/dataset.hpp"
#include "multisql/generation.hpp"
#include "multisql/prompts.hpp"
#include "multisql/schema.hpp"
#include "multisql/sql_exec.hpp"

namespace multisql {

enum class TrainingTask { kText2Sql, kQuestionInference, kEvidenceInference, kSelfRefine, kSelection };

std::string_view training_task_name(TrainingTask task);

struct TrainingSample {
  TrainingTask task = TrainingTask::kText2Sql;
  std::string prompt;
  std::string target;
  nlohmann::json meta = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// ---- SQL mutation -------------------------------------------------------

enum class MutationKind { kColumnSwap, kDropJoinPredicate, kAggregateSwap, kLiteralPerturb, kRemoveDistinct };

std::string_view mutation_kind_name(MutationKind kind);

struct Mutation {
  std::string sql;
  MutationKind kind;
};

// One seeded mutation chosen among every applicable site. Column swaps need
// `doc`. Numeric literals in the projection list are never perturbed.
// Throws Error(kNoApplicableMutation).
Mutation mutate_sql(std::string_view gold, std::uint64_t seed, const SchemaDoc* doc = nullptr);

// ---- multi-task corpus --------------------------------------------------

struct TaskMix {
  double text2sql = 0.4;
  double question_inference = 0.2;
  double evidence_inference = 0.2;
  double self_refine = 0.2;
};

// Largest-remainder split of `n` items by the mix weights, in the order
// text2sql, question_inference, evidence_inference, self_refine.
std::vector<std::size_t> apportion(std::size_t n, const TaskMix& mix);

struct MultitaskOptions {
  TaskMix mix;
  std::uint64_t seed = 0;
  std::size_t evidence_distractors = 3;
  int max_mutation_attempts = 5;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
  EquivalenceMode mode = EquivalenceMode::kSet;
};

struct SynthStats {
  std::map<std::string, std::size_t> emitted;
  std::size_t gold_failures = 0;
  std::size_t mutation_skips = 0;
  std::size_t no_correct_candidate = 0;
  std::size_t insufficient_negatives = 0;
  std::size_t source_failures = 0;
  std::size_t reassigned = 0;
  std::size_t reformat_accepted = 0;
  std::size_t reformat_rejected = 0;
  std::vector<std::string> log;

  nlohmann::json to_json() const;
};

std::vector<TrainingSample> synth_multitask(const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                                            const PromptLibrary& prompts, const MultitaskOptions& options,
                                            SynthStats& stats);

// ---- selection corpus ---------------------------------------------------

struct BalancePolicy {
  std::size_t list_size = 5;
  // Cycle the number of wrong candidates through 1..list_size-1 so every
  // positive/negative combination is equally represented.
  bool vary_negatives = false;
  bool augment_with_mutations = true;
  double tolerance = 0.05;
  std::uint64_t seed = 0;
  std::int64_t timeout_ms = kDefaultTimeoutMs;
  EquivalenceMode mode = EquivalenceMode::kSet;
};

using CandidateSource = std::function<std::vector<CandidateSql>(const BenchItem&)>;

std::vector<TrainingSample> synth_selection(const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                                            const CandidateSource& source, const PromptLibrary& prompts,
                                            const BalancePolicy& policy, SynthStats& stats);

struct BalanceReport {
  // list size -> per-position counts of the correct candidate (0-based)
  std::map<std::size_t, std::vector<std::size_t>> positions;
  std::map<std::size_t, std::size_t> negatives;  // wrong candidates per list -> samples
  std::map<std::string, std::size_t> generators;  // source generator of the correct candidate
  double max_position_deviation = 0.0;
  double max_combination_deviation = 0.0;
  double max_generator_deviation = 0.0;

  bool within(double tolerance) const;
  nlohmann::json to_json() const;
};

// Relative deviation of each count from the uniform share, maximized.
double max_relative_deviation(const std::vector<std::size_t>& counts);

BalanceReport balance_report(const std::vector<TrainingSample>& samples);

// ---- reformulation ------------------------------------------------------

enum class ReformatStyle { kComplexPattern, kStandardized };

std::string_view reformat_style_name(ReformatStyle style);

struct ReformatResult {
  std::string sql;
  bool accepted = false;
  std::string reason;
};

// Asks the reformat role to rewrite `gold`; the rewrite is kept only if it
// executes to the same result as `gold`. Backend errors propagate.
ReformatResult reformat_sql(const std::string& gold, ReformatStyle style, const BackendRegistry& backends,
                            const PromptLibrary& prompts, const SchemaDoc& doc,
                            const std::filesystem::path& db_file, SynthStats& stats,
                            EquivalenceMode mode = EquivalenceMode::kSet,
                            std::int64_t timeout_ms = kDefaultTimeoutMs);

// text2sql samples whose targets are the reformulated gold queries, one per
// item and style, in input order.
std::vector<TrainingSample> synth_reformat(const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                                           const std::vector<ReformatStyle>& styles, const BackendRegistry& backends,
                                           const PromptLibrary& prompts, SynthStats& stats,
                                           EquivalenceMode mode = EquivalenceMode::kSet,
                                           std::int64_t timeout_ms = kDefaultTimeoutMs);

ReformatStyle parse_reformat_style(std::string_view name);

}  // namespace multisql
