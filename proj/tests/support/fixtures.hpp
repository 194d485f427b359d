#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "multisql/backend.hpp"
#include "multisql/generation.hpp"
#include "multisql/sql_exec.hpp"

namespace multisql::testkit {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Creates `file` and runs `script` against it.
std::filesystem::path build_db(const std::filesystem::path& file, std::string_view script);

std::filesystem::path source_path(std::string_view relative);
std::string read_source(std::string_view relative);

// The three-table toy store from demo/store.sql.
std::filesystem::path store_db(const TempDir& dir);

std::shared_ptr<MockChatBackend> scripted(std::vector<MockEntry> entries);

CandidateSql candidate(std::string sql, std::string generator, ExecutionOutcome outcome);

// Single-column integer result, one row per value.
ExecutionOutcome int_rows(const std::vector<std::int64_t>& values);

std::string fenced(std::string_view sql);

}  // namespace multisql::testkit
