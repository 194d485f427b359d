#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "multisql/sqlite_db.hpp"

namespace multisql {

enum class ExecStatus { kOk, kSyntaxError, kRuntimeError, kTimeout, kAnomalous };

std::string_view exec_status_name(ExecStatus status);
ExecStatus parse_exec_status(std::string_view name);

// Anomalous outcomes executed fine but tripped an anomaly rule; they keep
// their rows.
struct ExecutionOutcome {
  ExecStatus status = ExecStatus::kRuntimeError;
  std::vector<std::string> column_names;
  std::vector<Row> rows;
  std::string message;
  std::int64_t elapsed_ms = 0;

  bool ok() const { return status == ExecStatus::kOk; }
  bool has_rows() const { return status == ExecStatus::kOk || status == ExecStatus::kAnomalous; }

  static ExecutionOutcome success(std::vector<Row> rows);
  static ExecutionOutcome failure(ExecStatus status, std::string message);
};

inline constexpr std::int64_t kDefaultTimeoutMs = 30000;

// Executes one read-only statement on a fresh connection. Never throws for
// problems with the SQL or the database; everything is encoded in status.
ExecutionOutcome execute(std::string_view sql, const std::filesystem::path& db_file,
                         std::int64_t timeout_ms = kDefaultTimeoutMs);

// Zero result columns, or a single all-NULL cell.
bool is_anomalous(const std::vector<std::string>& column_names, const std::vector<Row>& rows);

enum class EquivalenceMode { kSet, kBag, kOrdered };

std::string_view equivalence_mode_name(EquivalenceMode mode);
EquivalenceMode parse_equivalence_mode(std::string_view name);

using CanonicalRow = std::vector<std::string>;
using CanonicalResult = std::vector<CanonicalRow>;

// Cell text: integers exact, reals rounded to 1e-6 (integral values render as
// integers), NULL as a sentinel, text verbatim. Each cell is tagged by kind
// so the text "1" never equals the integer 1.
std::string canonical_cell(const Cell& cell);
CanonicalResult canonicalize(const std::vector<Row>& rows, EquivalenceMode mode);

struct ResultKey {
  std::uint64_t digest = 0;
  bool operator==(const ResultKey&) const = default;
};

ResultKey result_key(const CanonicalResult& canonical);

// True iff both outcomes produced rows and their canonical forms match.
bool equivalent(const ExecutionOutcome& a, const ExecutionOutcome& b,
                EquivalenceMode mode = EquivalenceMode::kSet);

// Short human-readable description fed back to self-refine prompts.
std::string describe_outcome(const ExecutionOutcome& outcome, std::size_t max_rows = 5);

}  // namespace multisql
