#include "multisql/schema.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "multisql/error.hpp"
#include "multisql/sqlite_db.hpp"
#include "multisql/text.hpp"

namespace multisql {

std::string_view dialect_name(Dialect dialect) {
  switch (dialect) {
    case Dialect::kSqlite: return "sqlite";
    case Dialect::kPostgres: return "postgres";
    case Dialect::kMysql: return "mysql";
  }
  return "sqlite";
}

Dialect parse_dialect(std::string_view name) {
  if (text::iequals(name, "sqlite")) return Dialect::kSqlite;
  if (text::iequals(name, "postgres") || text::iequals(name, "postgresql")) return Dialect::kPostgres;
  if (text::iequals(name, "mysql")) return Dialect::kMysql;
  throw Error(ErrorCode::kUnsupportedDialect, std::string(name));
}

SchemaDoc::SchemaDoc(std::string db_id, Dialect dialect, std::vector<TableMeta> tables,
                     std::vector<ForeignKey> foreign_keys)
    : db_id_(std::move(db_id)),
      dialect_(dialect),
      tables_(std::move(tables)),
      foreign_keys_(std::move(foreign_keys)) {
  std::set<std::string> names;
  for (const auto& table : tables_) {
    if (table.name.empty()) throw Error(ErrorCode::kInvalidArgument, "empty table name");
    if (!names.insert(table.name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate table " + table.name);
    }
    std::set<std::string> columns;
    for (const auto& column : table.columns) {
      if (column.ref.table != table.name || column.ref.column.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "bad column ref " + column.ref.qualified());
      }
      if (column.data_type.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "empty data type for " + column.ref.qualified());
      }
      if (!columns.insert(column.ref.column).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate column " + column.ref.qualified());
      }
    }
  }
  for (const auto& fk : foreign_keys_) {
    if (fk.from == fk.to || !contains(fk.from) || !contains(fk.to)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "invalid foreign key " + fk.from.qualified() + " -> " + fk.to.qualified());
    }
  }
}

const TableMeta* SchemaDoc::find_table(std::string_view name) const {
  for (const auto& table : tables_) {
    if (table.name == name) return &table;
  }
  return nullptr;
}

const ColumnMeta* SchemaDoc::find_column(const ColumnRef& ref) const {
  const TableMeta* table = find_table(ref.table);
  if (table == nullptr) return nullptr;
  for (const auto& column : table->columns) {
    if (column.ref.column == ref.column) return &column;
  }
  return nullptr;
}

const TableMeta* SchemaDoc::resolve_table(std::string_view name) const {
  if (const TableMeta* exact = find_table(name)) return exact;
  for (const auto& table : tables_) {
    if (text::iequals(table.name, name)) return &table;
  }
  return nullptr;
}

std::optional<ColumnRef> SchemaDoc::resolve(std::string_view table, std::string_view column) const {
  const TableMeta* t = resolve_table(table);
  if (t == nullptr) return std::nullopt;
  for (const auto& c : t->columns) {
    if (text::iequals(c.ref.column, column)) return c.ref;
  }
  return std::nullopt;
}

std::vector<ColumnRef> SchemaDoc::all_columns() const {
  std::vector<ColumnRef> out;
  for (const auto& table : tables_) {
    for (const auto& column : table.columns) out.push_back(column.ref);
  }
  return out;
}

std::size_t SchemaDoc::column_count() const {
  std::size_t n = 0;
  for (const auto& table : tables_) n += table.columns.size();
  return n;
}

std::vector<ColumnRef> SchemaDoc::primary_keys(std::string_view table) const {
  std::vector<ColumnRef> out;
  if (const TableMeta* t = find_table(table)) {
    for (const auto& column : t->columns) {
      if (column.is_primary_key) out.push_back(column.ref);
    }
  }
  return out;
}

ColumnSet with_primary_keys(const SchemaDoc& doc, ColumnSet columns) {
  std::set<std::string> touched;
  for (const auto& ref : columns) touched.insert(ref.table);
  for (const auto& table : touched) {
    for (auto& pk : doc.primary_keys(table)) columns.insert(std::move(pk));
  }
  return columns;
}

SchemaSubset::SchemaSubset(SchemaDocPtr parent, ColumnSet columns, int iteration_index)
    : parent_(std::move(parent)), iteration_index_(iteration_index) {
  if (!parent_) throw Error(ErrorCode::kInvalidArgument, "subset without parent document");
  if (iteration_index_ < 1) throw Error(ErrorCode::kInvalidArgument, "iteration index must be >= 1");
  for (const auto& ref : columns) {
    if (!parent_->contains(ref)) {
      throw Error(ErrorCode::kDanglingSubset, "unknown column " + ref.qualified());
    }
  }
  columns_ = with_primary_keys(*parent_, std::move(columns));
}

ColumnSet pf_key_closure(const SchemaDoc& doc, const ColumnSet& selected) {
  std::set<std::string> touched;
  for (const auto& ref : selected) touched.insert(ref.table);
  ColumnSet out;
  for (const auto& table : touched) {
    for (auto& pk : doc.primary_keys(table)) out.insert(std::move(pk));
  }
  for (const auto& fk : doc.foreign_keys()) {
    if (touched.contains(fk.from.table) || touched.contains(fk.to.table)) {
      out.insert(fk.from);
      out.insert(fk.to);
    }
  }
  return out;
}

std::string truncate_sample(std::string_view value) {
  if (value.size() <= kSampleValueMaxChars) return std::string(value);
  return std::string(text::utf8_prefix(value, kSampleValueMaxChars)) + "...";
}

std::string column_metadata_text(const SchemaDoc& /*doc*/, const ColumnMeta& column) {
  std::string out = column.ref.table + "." + column.ref.column + " " + column.data_type;
  if (!column.description.empty()) out += " " + column.description;
  return out;
}

std::string table_metadata_text(const TableMeta& table) {
  std::string out = table.name;
  if (!table.description.empty()) out += " " + table.description;
  out += " (";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i > 0) out += ", ";
    out += table.columns[i].ref.column;
  }
  out += ")";
  return out;
}

std::string render_schema(const SchemaDoc& doc, const ColumnSet* subset) {
  std::ostringstream out;
  out << "【DB_ID】 " << doc.db_id() << "\n";
  ColumnSet shown;
  if (subset != nullptr) {
    for (const auto& ref : *subset) {
      if (!doc.contains(ref)) throw Error(ErrorCode::kDanglingSubset, "unknown column " + ref.qualified());
    }
    shown = with_primary_keys(doc, *subset);
  }
  auto visible = [&](const ColumnRef& ref) { return subset == nullptr || shown.contains(ref); };

  out << "【Schema】\n";
  for (const auto& table : doc.tables()) {
    const bool any = std::any_of(table.columns.begin(), table.columns.end(),
                                 [&](const ColumnMeta& c) { return visible(c.ref); });
    if (!any) continue;
    out << "# Table: " << table.name;
    if (!table.description.empty()) out << ", " << table.description;
    out << "\n[\n";
    for (const auto& column : table.columns) {
      if (!visible(column.ref)) continue;
      out << "(" << column.ref.column << ": " << column.data_type;
      if (column.is_primary_key) out << ", Primary Key";
      if (!column.description.empty()) out << ", " << column.description;
      if (!column.sample_values.empty()) {
        out << ", Examples: ";
        for (std::size_t i = 0; i < column.sample_values.size(); ++i) {
          if (i > 0) out << ", ";
          out << truncate_sample(column.sample_values[i]);
        }
      }
      out << "),\n";
    }
    out << "]\n";
  }
  bool header = false;
  for (const auto& fk : doc.foreign_keys()) {
    if (!visible(fk.from) || !visible(fk.to)) continue;
    if (!header) {
      out << "【Foreign keys】\n";
      header = true;
    }
    out << fk.from.qualified() << " = " << fk.to.qualified() << "\n";
  }
  return out.str();
}

std::string render_schema(const SchemaSubset& subset) {
  return render_schema(subset.parent(), &subset.columns());
}

namespace {

std::string declared_type(std::string type) {
  type = std::string(text::trim(type));
  return type.empty() ? "TEXT" : text::to_upper(type);
}

}  // namespace

SchemaDoc introspect(const std::filesystem::path& db_file, Dialect dialect, std::size_t sample_cap,
                     std::string db_id) {
  if (dialect != Dialect::kSqlite) {
    throw Error(ErrorCode::kUnsupportedDialect,
                std::string(dialect_name(dialect)) + " files cannot be introspected offline");
  }
  SqliteDb db = SqliteDb::open_readonly(db_file);
  if (db_id.empty()) db_id = db_file.stem().string();

  std::vector<std::string> table_names;
  db.query(
      "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' "
      "ORDER BY rowid",
      [&](const Row& row) {
        table_names.push_back(cell_to_string(row[0]));
        return true;
      });

  std::vector<TableMeta> tables;
  struct RawFk {
    std::string from_table, from_column, to_table, to_column;
  };
  std::vector<RawFk> raw_fks;

  for (const auto& name : table_names) {
    TableMeta table;
    table.name = name;
    // cid, name, type, notnull, dflt_value, pk (1-based position in PK)
    std::vector<std::pair<int, std::string>> pk_order;
    for (const auto& row : db.query_all("PRAGMA table_info(" + quote_identifier(name) + ")")) {
      ColumnMeta column;
      column.ref = {name, cell_to_string(row[1])};
      column.data_type = declared_type(std::holds_alternative<Null>(row[2]) ? "" : cell_to_string(row[2]));
      const auto pk_pos = std::get_if<std::int64_t>(&row[5]);
      column.is_primary_key = pk_pos != nullptr && *pk_pos > 0;
      if (column.is_primary_key) pk_order.emplace_back(static_cast<int>(*pk_pos), column.ref.column);
      table.columns.push_back(std::move(column));
    }
    std::sort(pk_order.begin(), pk_order.end());

    if (sample_cap > 0) {
      bool has_rowid = true;
      try {
        db.query_all("SELECT rowid FROM " + quote_identifier(name) + " LIMIT 0");
      } catch (const Error&) {
        has_rowid = false;
      }
      std::string order_by;
      for (const auto& [pos, col] : pk_order) {
        order_by += (order_by.empty() ? "" : ", ") + quote_identifier(col);
      }
      if (order_by.empty() && has_rowid) order_by = "rowid";
      for (auto& column : table.columns) {
        std::string sql = "SELECT " + quote_identifier(column.ref.column) + " FROM " +
                          quote_identifier(name) + " WHERE " + quote_identifier(column.ref.column) +
                          " IS NOT NULL";
        if (!order_by.empty()) sql += " ORDER BY " + order_by;
        std::set<std::string> seen;
        db.query(sql, [&](const Row& row) {
          std::string value = cell_to_string(row[0]);
          if (seen.insert(value).second) column.sample_values.push_back(std::move(value));
          return column.sample_values.size() < sample_cap;
        });
      }
    }

    // id, seq, table, from, to, on_update, on_delete, match
    for (const auto& row : db.query_all("PRAGMA foreign_key_list(" + quote_identifier(name) + ")")) {
      RawFk fk{name, cell_to_string(row[3]), cell_to_string(row[2]),
               std::holds_alternative<Null>(row[4]) ? std::string() : cell_to_string(row[4])};
      raw_fks.push_back(std::move(fk));
    }
    tables.push_back(std::move(table));
  }

  // Build a provisional doc for case-insensitive endpoint resolution; dataset
  // files often spell foreign-key targets with different casing, and some
  // reference columns that do not exist (those are dropped).
  SchemaDoc provisional(db_id, dialect, tables, {});
  std::vector<ForeignKey> fks;
  for (const auto& raw : raw_fks) {
    auto from = provisional.resolve(raw.from_table, raw.from_column);
    std::optional<ColumnRef> to;
    if (raw.to_column.empty()) {
      if (const TableMeta* target = provisional.resolve_table(raw.to_table)) {
        auto pks = provisional.primary_keys(target->name);
        if (pks.size() == 1) to = pks.front();
      }
    } else {
      to = provisional.resolve(raw.to_table, raw.to_column);
    }
    if (!from || !to || *from == *to) continue;
    ForeignKey fk{*from, *to};
    if (std::find(fks.begin(), fks.end(), fk) == fks.end()) fks.push_back(std::move(fk));
  }
  return SchemaDoc(std::move(db_id), dialect, std::move(tables), std::move(fks));
}

}  // namespace multisql
