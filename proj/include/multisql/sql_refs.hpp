#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "multisql/schema.hpp"
#include "multisql/sql_lexer.hpp"

namespace multisql {

// Schema-aware identifier scan of a SQL statement. Not a parser: aliases are
// collected globally, unqualified names resolve against the tables named in
// the statement, and ambiguous names take the first such table.
struct ColumnOccurrence {
  std::size_t token = 0;  // index into the token vector
  ColumnRef ref;
};

struct ValueOccurrence {
  ColumnRef ref;
  std::string literal;  // unquoted
};

struct SqlReferences {
  std::vector<const TableMeta*> tables;          // first-appearance order
  std::map<std::string, const TableMeta*> aliases;  // lower-cased alias or table name
  std::vector<ColumnOccurrence> columns;
  std::vector<ValueOccurrence> values;  // string literals compared against a column

  ColumnSet column_set() const;
};

SqlReferences scan_references(const std::vector<sql::Token>& tokens, const SchemaDoc& doc);
SqlReferences scan_references(std::string_view sql, const SchemaDoc& doc);

// Text of a quoted string literal with the quotes removed and '' unescaped.
std::string unquote_string(std::string_view literal);

}  // namespace multisql
