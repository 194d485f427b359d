#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

struct sqlite3;
struct sqlite3_stmt;

namespace multisql {

struct Null {
  bool operator==(const Null&) const = default;
};

// One result cell as the engine returned it.
using Cell = std::variant<Null, std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

std::string cell_to_string(const Cell& cell);

// Owning read-only SQLite connection. Move-only.
class SqliteDb {
 public:
  // Throws Error(kUnreadableDatabase) when the file is missing or not a
  // database.
  static SqliteDb open_readonly(const std::filesystem::path& path);

  SqliteDb(SqliteDb&& other) noexcept;
  SqliteDb& operator=(SqliteDb&& other) noexcept;
  SqliteDb(const SqliteDb&) = delete;
  SqliteDb& operator=(const SqliteDb&) = delete;
  ~SqliteDb();

  sqlite3* handle() const { return db_; }

  // Runs a trusted statement and hands every row to `on_row`; return false
  // from the callback to stop early. Throws Error(kUnreadableDatabase).
  void query(std::string_view sql, const std::function<bool(const Row&)>& on_row) const;
  std::vector<Row> query_all(std::string_view sql) const;

 private:
  explicit SqliteDb(sqlite3* db) : db_(db) {}
  sqlite3* db_ = nullptr;
};

Row read_row(sqlite3_stmt* stmt);

// Double-quoted identifier with embedded quotes escaped.
std::string quote_identifier(std::string_view name);

}  // namespace multisql
