#include "multisql/dataset.hpp"

#include <json.hpp>

#include "multisql/error.hpp"
#include "multisql/jsonl.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

DatasetFlavor parse_flavor(std::string_view name) {
  if (text::iequals(name, "bird")) return DatasetFlavor::kBird;
  if (text::iequals(name, "spider")) return DatasetFlavor::kSpider;
  throw Error(ErrorCode::kConfigInvalid, "unknown dataset flavor " + std::string(name));
}

std::vector<BenchItem> parse_dataset(std::string_view json_text, DatasetFlavor flavor) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedDataset, std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::kMalformedDataset, "top level must be an array");
  std::vector<BenchItem> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& r = doc[i];
    try {
      BenchItem item;
      item.db_id = r.at("db_id").get<std::string>();
      item.question = r.at("question").get<std::string>();
      if (flavor == DatasetFlavor::kBird) {
        item.question_id = r.at("question_id").get<std::int64_t>();
        item.evidence = r.contains("evidence") && !r["evidence"].is_null() ? r["evidence"].get<std::string>() : "";
        item.gold_sql = r.at("SQL").get<std::string>();
      } else {
        item.question_id = static_cast<std::int64_t>(i);
        item.gold_sql = r.at("query").get<std::string>();
      }
      if (item.db_id.empty()) throw Error(ErrorCode::kMalformedDataset, "empty db_id");
      out.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedDataset, "record " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedDataset, "record " + std::to_string(i) + ": " + e.message());
    }
  }
  return out;
}

std::vector<BenchItem> load_dataset(const std::filesystem::path& path, DatasetFlavor flavor) {
  std::string contents;
  try {
    contents = read_text(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedDataset, e.message());
  }
  return parse_dataset(contents, flavor);
}

DatabaseCatalog::DatabaseCatalog(std::filesystem::path root, std::size_t sample_cap)
    : root_(std::move(root)), sample_cap_(sample_cap) {}

void DatabaseCatalog::add(std::string db_id, std::filesystem::path db_file) {
  std::lock_guard lock(mutex_);
  explicit_[std::move(db_id)] = std::move(db_file);
}

std::filesystem::path DatabaseCatalog::db_file(const std::string& db_id) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = explicit_.find(db_id); it != explicit_.end()) return it->second;
  }
  for (const auto& candidate : {root_ / db_id / (db_id + ".sqlite"), root_ / db_id / (db_id + ".db"),
                                root_ / (db_id + ".sqlite"), root_ / (db_id + ".db")}) {
    if (std::filesystem::is_regular_file(candidate)) return candidate;
  }
  throw Error(ErrorCode::kUnreadableDatabase, "cannot locate database " + db_id + " under " + root_.string());
}

SchemaDocPtr DatabaseCatalog::doc(const std::string& db_id) const {
  const auto path = db_file(db_id);
  std::lock_guard lock(mutex_);
  if (auto it = docs_.find(db_id); it != docs_.end()) return it->second;
  auto doc = std::make_shared<const SchemaDoc>(introspect(path, Dialect::kSqlite, sample_cap_, db_id));
  docs_.emplace(db_id, doc);
  return doc;
}

}  // namespace multisql
