#include "multisql/sqlite_db.hpp"

#include <sqlite3.h>

#include <cstdio>
#include <utility>

#include "multisql/error.hpp"

namespace multisql {

std::string cell_to_string(const Cell& cell) {
  struct Visitor {
    std::string operator()(const Null&) const { return "NULL"; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.15g", v);
      return buf;
    }
    std::string operator()(const std::string& v) const { return v; }
  };
  return std::visit(Visitor{}, cell);
}

SqliteDb SqliteDb::open_readonly(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kUnreadableDatabase, "no such database file: " + path.string());
  }
  sqlite3* db = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
  if (rc != SQLITE_OK) {
    std::string message = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw Error(ErrorCode::kUnreadableDatabase, path.string() + ": " + message);
  }
  SqliteDb out(db);
  // A non-database file opens fine and only fails on first read.
  rc = sqlite3_exec(db, "SELECT count(*) FROM sqlite_master", nullptr, nullptr, nullptr);
  if (rc != SQLITE_OK) {
    throw Error(ErrorCode::kUnreadableDatabase, path.string() + ": " + sqlite3_errmsg(db));
  }
  return out;
}

SqliteDb::SqliteDb(SqliteDb&& other) noexcept : db_(std::exchange(other.db_, nullptr)) {}

SqliteDb& SqliteDb::operator=(SqliteDb&& other) noexcept {
  if (this != &other) {
    sqlite3_close(db_);
    db_ = std::exchange(other.db_, nullptr);
  }
  return *this;
}

SqliteDb::~SqliteDb() { sqlite3_close(db_); }

Row read_row(sqlite3_stmt* stmt) {
  const int n = sqlite3_column_count(stmt);
  Row row;
  row.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    switch (sqlite3_column_type(stmt, i)) {
      case SQLITE_INTEGER:
        row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt, i)));
        break;
      case SQLITE_FLOAT:
        row.emplace_back(sqlite3_column_double(stmt, i));
        break;
      case SQLITE_NULL:
        row.emplace_back(Null{});
        break;
      default: {
        // TEXT and BLOB both come back as raw bytes.
        const auto* data = static_cast<const char*>(sqlite3_column_blob(stmt, i));
        const int size = sqlite3_column_bytes(stmt, i);
        row.emplace_back(std::string(data ? data : "", static_cast<std::size_t>(size)));
        break;
      }
    }
  }
  return row;
}

void SqliteDb::query(std::string_view sql, const std::function<bool(const Row&)>& on_row) const {
  sqlite3_stmt* stmt = nullptr;
  int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &stmt, nullptr);
  if (rc != SQLITE_OK) {
    throw Error(ErrorCode::kUnreadableDatabase, std::string(sqlite3_errmsg(db_)) + " in: " + std::string(sql));
  }
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    if (!on_row(read_row(stmt))) break;
  }
  if (rc != SQLITE_ROW && rc != SQLITE_DONE) {
    std::string message = sqlite3_errmsg(db_);
    sqlite3_finalize(stmt);
    throw Error(ErrorCode::kUnreadableDatabase, message);
  }
  sqlite3_finalize(stmt);
}

std::vector<Row> SqliteDb::query_all(std::string_view sql) const {
  std::vector<Row> rows;
  query(sql, [&](const Row& row) {
    rows.push_back(row);
    return true;
  });
  return rows;
}

std::string quote_identifier(std::string_view name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace multisql
