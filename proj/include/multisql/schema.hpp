#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace multisql {

enum class Dialect { kSqlite, kPostgres, kMysql };

std::string_view dialect_name(Dialect dialect);
Dialect parse_dialect(std::string_view name);

struct ColumnRef {
  std::string table;
  std::string column;

  auto operator<=>(const ColumnRef&) const = default;
  bool operator==(const ColumnRef&) const = default;

  std::string qualified() const { return table + "." + column; }
};

using ColumnSet = std::set<ColumnRef>;

struct ColumnMeta {
  ColumnRef ref;
  std::string data_type;
  std::string description;
  bool is_primary_key = false;
  std::vector<std::string> sample_values;
};

struct ForeignKey {
  ColumnRef from;
  ColumnRef to;

  bool operator==(const ForeignKey&) const = default;
};

struct TableMeta {
  std::string name;
  std::string description;
  std::vector<ColumnMeta> columns;
};

inline constexpr std::size_t kDefaultSampleCap = 3;
inline constexpr std::size_t kSampleValueMaxChars = 64;

// Structured description of one database. Immutable once built; share it
// through std::shared_ptr<const SchemaDoc>.
class SchemaDoc {
 public:
  SchemaDoc() = default;
  // Validates table-name uniqueness, non-empty types, and that every foreign
  // key endpoint exists. Throws Error(kInvalidArgument) otherwise.
  SchemaDoc(std::string db_id, Dialect dialect, std::vector<TableMeta> tables,
            std::vector<ForeignKey> foreign_keys);

  const std::string& db_id() const { return db_id_; }
  Dialect dialect() const { return dialect_; }
  const std::vector<TableMeta>& tables() const { return tables_; }
  const std::vector<ForeignKey>& foreign_keys() const { return foreign_keys_; }

  const TableMeta* find_table(std::string_view name) const;
  const ColumnMeta* find_column(const ColumnRef& ref) const;
  bool contains(const ColumnRef& ref) const { return find_column(ref) != nullptr; }

  // Case-insensitive lookups, for resolving identifiers written by models
  // or found in SQL text. Return the canonical spelling.
  std::optional<ColumnRef> resolve(std::string_view table, std::string_view column) const;
  const TableMeta* resolve_table(std::string_view name) const;

  // Columns in document order.
  std::vector<ColumnRef> all_columns() const;
  std::size_t column_count() const;
  std::vector<ColumnRef> primary_keys(std::string_view table) const;

 private:
  std::string db_id_;
  Dialect dialect_ = Dialect::kSqlite;
  std::vector<TableMeta> tables_;
  std::vector<ForeignKey> foreign_keys_;
};

using SchemaDocPtr = std::shared_ptr<const SchemaDoc>;

// A selection of columns from a parent document. Construction adds the
// primary keys of every touched table, so the invariant holds for every
// instance.
class SchemaSubset {
 public:
  // Throws Error(kDanglingSubset) if any column is not in the parent.
  SchemaSubset(SchemaDocPtr parent, ColumnSet columns, int iteration_index = 1);

  const SchemaDoc& parent() const { return *parent_; }
  const SchemaDocPtr& parent_ptr() const { return parent_; }
  const ColumnSet& columns() const { return columns_; }
  int iteration_index() const { return iteration_index_; }
  bool empty() const { return columns_.empty(); }
  std::size_t size() const { return columns_.size(); }
  bool contains(const ColumnRef& ref) const { return columns_.contains(ref); }

 private:
  SchemaDocPtr parent_;
  ColumnSet columns_;
  int iteration_index_;
};

// Reads a database file into a SchemaDoc. Only SQLite files can be opened;
// the other dialects raise UnsupportedDialect.
SchemaDoc introspect(const std::filesystem::path& db_file, Dialect dialect = Dialect::kSqlite,
                     std::size_t sample_cap = kDefaultSampleCap, std::string db_id = {});

// Canonical schema text used in every prompt. When a subset is given only
// its columns (plus primary keys of touched tables) are listed.
std::string render_schema(const SchemaDoc& doc, const ColumnSet* subset = nullptr);
std::string render_schema(const SchemaSubset& subset);

// Primary keys of tables touched by `selected`, plus both endpoints of every
// foreign key with an endpoint in a touched table.
ColumnSet pf_key_closure(const SchemaDoc& doc, const ColumnSet& selected);

// Adds the primary keys of every table touched by `columns`.
ColumnSet with_primary_keys(const SchemaDoc& doc, ColumnSet columns);

// Metadata text embedded for retrieval: name, type, description.
std::string column_metadata_text(const SchemaDoc& doc, const ColumnMeta& column);
std::string table_metadata_text(const TableMeta& table);

std::string truncate_sample(std::string_view value);

}  // namespace multisql
