#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "multisql/schema.hpp"

namespace multisql {

struct BenchItem {
  std::int64_t question_id = 0;
  std::string db_id;
  std::string question;
  std::string evidence;
  std::string gold_sql;
};

enum class DatasetFlavor { kBird, kSpider };

DatasetFlavor parse_flavor(std::string_view name);

// BIRD: [{question_id, db_id, question, evidence, SQL}, ...]
// Spider: [{db_id, question, query}, ...], ids assigned sequentially from 0.
// Throws Error(kMalformedDataset) naming the first offending record.
std::vector<BenchItem> load_dataset(const std::filesystem::path& path, DatasetFlavor flavor);
std::vector<BenchItem> parse_dataset(std::string_view json_text, DatasetFlavor flavor);

// Resolves db_id -> database file and caches introspected schemas. The
// standard layout is <root>/<db_id>/<db_id>.sqlite; explicit registrations
// take precedence.
class DatabaseCatalog {
 public:
  DatabaseCatalog() = default;
  explicit DatabaseCatalog(std::filesystem::path root, std::size_t sample_cap = kDefaultSampleCap);

  void add(std::string db_id, std::filesystem::path db_file);

  // Throws Error(kUnreadableDatabase) if the file cannot be located.
  std::filesystem::path db_file(const std::string& db_id) const;
  SchemaDocPtr doc(const std::string& db_id) const;

 private:
  std::filesystem::path root_;
  std::size_t sample_cap_ = kDefaultSampleCap;
  std::map<std::string, std::filesystem::path> explicit_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, SchemaDocPtr> docs_;
};

}  // namespace multisql
