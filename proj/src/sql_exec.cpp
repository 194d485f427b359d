#include "multisql/sql_exec.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "multisql/error.hpp"
#include "multisql/text.hpp"

namespace multisql {

std::string_view exec_status_name(ExecStatus status) {
  switch (status) {
    case ExecStatus::kOk: return "ok";
    case ExecStatus::kSyntaxError: return "syntax_error";
    case ExecStatus::kRuntimeError: return "runtime_error";
    case ExecStatus::kTimeout: return "timeout";
    case ExecStatus::kAnomalous: return "anomalous";
  }
  return "runtime_error";
}

ExecStatus parse_exec_status(std::string_view name) {
  for (auto s : {ExecStatus::kOk, ExecStatus::kSyntaxError, ExecStatus::kRuntimeError,
                 ExecStatus::kTimeout, ExecStatus::kAnomalous}) {
    if (exec_status_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown execution status " + std::string(name));
}

ExecutionOutcome ExecutionOutcome::success(std::vector<Row> rows) {
  ExecutionOutcome out;
  out.status = ExecStatus::kOk;
  out.rows = std::move(rows);
  return out;
}

ExecutionOutcome ExecutionOutcome::failure(ExecStatus status, std::string message) {
  ExecutionOutcome out;
  out.status = status;
  out.message = std::move(message);
  return out;
}

bool is_anomalous(const std::vector<std::string>& column_names, const std::vector<Row>& rows) {
  if (column_names.empty()) return true;
  return rows.size() == 1 && rows.front().size() == 1 && std::holds_alternative<Null>(rows.front().front());
}

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
  Clock::time_point at;
};

int progress_check(void* arg) {
  return Clock::now() >= static_cast<Deadline*>(arg)->at ? 1 : 0;
}

std::int64_t ms_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

}  // namespace

ExecutionOutcome execute(std::string_view sql, const std::filesystem::path& db_file, std::int64_t timeout_ms) {
  const auto start = Clock::now();
  auto finish = [&](ExecutionOutcome outcome) {
    outcome.elapsed_ms = ms_since(start);
    return outcome;
  };

  std::optional<SqliteDb> db;
  try {
    db.emplace(SqliteDb::open_readonly(db_file));
  } catch (const Error& e) {
    return finish(ExecutionOutcome::failure(ExecStatus::kRuntimeError, e.what()));
  }
  sqlite3* handle = db->handle();

  Deadline deadline{start + std::chrono::milliseconds(std::max<std::int64_t>(timeout_ms, 0))};
  sqlite3_progress_handler(handle, 1000, &progress_check, &deadline);

  const std::string_view body = text::trim(sql);
  if (body.empty()) return finish(ExecutionOutcome::failure(ExecStatus::kSyntaxError, "empty statement"));

  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(handle, body.data(), static_cast<int>(body.size()), &stmt, &tail);
  if (rc != SQLITE_OK) {
    const bool interrupted = rc == SQLITE_INTERRUPT;
    return finish(ExecutionOutcome::failure(interrupted ? ExecStatus::kTimeout : ExecStatus::kSyntaxError,
                                            sqlite3_errmsg(handle)));
  }
  if (stmt == nullptr) {
    return finish(ExecutionOutcome::failure(ExecStatus::kSyntaxError, "no statement found"));
  }
  if (!sqlite3_stmt_readonly(stmt)) {
    sqlite3_finalize(stmt);
    return finish(ExecutionOutcome::failure(ExecStatus::kRuntimeError, "write statements are not allowed"));
  }

  ExecutionOutcome outcome;
  const int ncols = sqlite3_column_count(stmt);
  for (int i = 0; i < ncols; ++i) {
    const char* name = sqlite3_column_name(stmt, i);
    outcome.column_names.emplace_back(name ? name : "");
  }
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) outcome.rows.push_back(read_row(stmt));
  if (rc != SQLITE_DONE) {
    std::string message = sqlite3_errmsg(handle);
    sqlite3_finalize(stmt);
    if (rc == SQLITE_INTERRUPT) {
      return finish(ExecutionOutcome::failure(
          ExecStatus::kTimeout, "exceeded " + std::to_string(timeout_ms) + " ms"));
    }
    return finish(ExecutionOutcome::failure(ExecStatus::kRuntimeError, message));
  }
  sqlite3_finalize(stmt);
  outcome.status = is_anomalous(outcome.column_names, outcome.rows) ? ExecStatus::kAnomalous : ExecStatus::kOk;
  if (outcome.status == ExecStatus::kAnomalous) {
    outcome.message = outcome.column_names.empty() ? "statement returned no columns" : "result is a single NULL";
  }
  return finish(std::move(outcome));
}

std::string_view equivalence_mode_name(EquivalenceMode mode) {
  switch (mode) {
    case EquivalenceMode::kSet: return "set";
    case EquivalenceMode::kBag: return "bag";
    case EquivalenceMode::kOrdered: return "ordered";
  }
  return "set";
}

EquivalenceMode parse_equivalence_mode(std::string_view name) {
  if (name == "set") return EquivalenceMode::kSet;
  if (name == "bag") return EquivalenceMode::kBag;
  if (name == "ordered") return EquivalenceMode::kOrdered;
  throw Error(ErrorCode::kConfigInvalid, "unknown equivalence mode " + std::string(name));
}

std::string canonical_cell(const Cell& cell) {
  struct Visitor {
    std::string operator()(const Null&) const { return std::string("\x01NULL", 5); }
    std::string operator()(std::int64_t v) const { return "i:" + std::to_string(v); }
    std::string operator()(double v) const {
      if (std::isnan(v)) return "r:nan";
      if (std::isinf(v)) return v > 0 ? "r:inf" : "r:-inf";
      const double rounded = std::round(v * 1e6) / 1e6;
      if (rounded == std::trunc(rounded) && std::fabs(rounded) < 9.0e15) {
        return "i:" + std::to_string(static_cast<std::int64_t>(rounded));
      }
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", rounded);
      return std::string("r:") + buf;
    }
    std::string operator()(const std::string& v) const { return "t:" + v; }
  };
  return std::visit(Visitor{}, cell);
}

CanonicalResult canonicalize(const std::vector<Row>& rows, EquivalenceMode mode) {
  CanonicalResult out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    CanonicalRow canonical;
    canonical.reserve(row.size());
    for (const auto& cell : row) canonical.push_back(canonical_cell(cell));
    out.push_back(std::move(canonical));
  }
  if (mode != EquivalenceMode::kOrdered) std::sort(out.begin(), out.end());
  if (mode == EquivalenceMode::kSet) out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ResultKey result_key(const CanonicalResult& canonical) {
  std::uint64_t h = text::fnv1a64("rows");
  for (const auto& row : canonical) {
    h = text::fnv1a64("\x1e", h);
    for (const auto& cell : row) {
      h = text::fnv1a64(std::to_string(cell.size()), h);
      h = text::fnv1a64(":", h);
      h = text::fnv1a64(cell, h);
    }
  }
  return {h};
}

bool equivalent(const ExecutionOutcome& a, const ExecutionOutcome& b, EquivalenceMode mode) {
  if (!a.has_rows() || !b.has_rows()) return false;
  return canonicalize(a.rows, mode) == canonicalize(b.rows, mode);
}

std::string describe_outcome(const ExecutionOutcome& outcome, std::size_t max_rows) {
  std::string out = "status: " + std::string(exec_status_name(outcome.status));
  if (!outcome.message.empty()) out += "\nmessage: " + outcome.message;
  if (outcome.has_rows()) {
    out += "\nrows: " + std::to_string(outcome.rows.size());
    for (std::size_t i = 0; i < outcome.rows.size() && i < max_rows; ++i) {
      out += "\n(";
      for (std::size_t j = 0; j < outcome.rows[i].size(); ++j) {
        if (j > 0) out += ", ";
        out += cell_to_string(outcome.rows[i][j]);
      }
      out += ")";
    }
  }
  return out;
}

}  // namespace multisql
