#include "fixtures.hpp"

#include <sqlite3.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace multisql::testkit {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("multisql-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path build_db(const std::filesystem::path& file, std::string_view script) {
  std::filesystem::create_directories(file.parent_path());
  std::filesystem::remove(file);
  sqlite3* db = nullptr;
  if (sqlite3_open(file.c_str(), &db) != SQLITE_OK) {
    sqlite3_close(db);
    throw std::runtime_error("cannot create " + file.string());
  }
  char* message = nullptr;
  const std::string sql(script);
  const int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &message);
  std::string error = message ? message : "";
  sqlite3_free(message);
  sqlite3_close(db);
  if (rc != SQLITE_OK) throw std::runtime_error("fixture script failed: " + error);
  return file;
}

std::filesystem::path source_path(std::string_view relative) {
  return std::filesystem::path(MULTISQL_SOURCE_DIR) / relative;
}

std::string read_source(std::string_view relative) {
  std::ifstream in(source_path(relative), std::ios::binary);
  if (!in) throw std::runtime_error("missing source file " + std::string(relative));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path store_db(const TempDir& dir) { return build_db(dir / "store.db", read_source("demo/store.sql")); }

std::shared_ptr<MockChatBackend> scripted(std::vector<MockEntry> entries) {
  return std::make_shared<MockChatBackend>(std::move(entries));
}

CandidateSql candidate(std::string sql, std::string generator, ExecutionOutcome outcome) {
  CandidateSql c;
  c.sql = std::move(sql);
  c.generator_id = std::move(generator);
  c.outcome = std::move(outcome);
  c.backend_calls = 1;
  return c;
}

ExecutionOutcome int_rows(const std::vector<std::int64_t>& values) {
  std::vector<Row> rows;
  for (auto v : values) rows.push_back({Cell{v}});
  auto out = ExecutionOutcome::success(std::move(rows));
  out.column_names = {"v"};
  return out;
}

std::string fenced(std::string_view sql) { return "```sql\n" + std::string(sql) + "\n```"; }

}  // namespace multisql::testkit
